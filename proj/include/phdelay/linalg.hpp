#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace phdelay {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Largest real part over the spectrum of `m`.
double spectral_abscissa(const Matrix& m);

/// True when every off-diagonal entry is >= -tol.
bool is_metzler(const Matrix& m, double tol = 0.0);

/// exp(M t) v. Scaling-and-squaring Pade kernel.
Vector matrix_exp_action(const Matrix& m, double t, const Vector& v);

/// exp(M t) as a dense matrix.
Matrix matrix_exp(const Matrix& m, double t);

/// Block-diagonal assembly of square or rectangular blocks.
Matrix block_diagonal(const std::vector<Matrix>& blocks);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);
/// "[a, b, c]" with round-trip entries.
std::string format_vector(const Vector& v);

}  // namespace phdelay
