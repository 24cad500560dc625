#include "phdelay/linalg.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "phdelay/errors.hpp"

namespace phdelay {

double spectral_abscissa(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("spectral_abscissa: matrix is not square");
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw DomainError("spectral_abscissa: eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().real().maxCoeff();
}

bool is_metzler(const Matrix& m, double tol) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i != j && m(i, j) < -tol) return false;
    }
  }
  return true;
}

Matrix matrix_exp(const Matrix& m, double t) {
  if (m.rows() != m.cols()) throw ShapeError("matrix_exp: matrix is not square");
  if (m.size() == 0) return m;
  Matrix scaled = m * t;
  return scaled.exp();
}

Vector matrix_exp_action(const Matrix& m, double t, const Vector& v) {
  if (m.rows() != m.cols()) throw ShapeError("matrix_exp_action: matrix is not square");
  if (m.cols() != v.size()) throw ShapeError("matrix_exp_action: vector length does not match matrix");
  if (m.size() == 0) return v;
  return matrix_exp(m, t) * v;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_vector(const Vector& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_number(v(i));
  }
  return out + "]";
}

}  // namespace phdelay
