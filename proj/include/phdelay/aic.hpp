#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phdelay/linalg.hpp"
#include "phdelay/lp.hpp"
#include "phdelay/network.hpp"
#include "phdelay/phasetype.hpp"

namespace phdelay {

/// Antithetic integral controller: Z1 -> Z1 + X_a (k), X_l -> X_l + Z2 (theta),
/// 0 -> Z1 (mu), Z1 + Z2 -> 0 (eta).
struct AICSpec {
  std::size_t actuated = 0;
  std::size_t measured = 0;
  double k = 1.0;
  double theta = 1.0;
  double mu = 1.0;
  double eta = 1.0;
  std::optional<PhaseType> actuation_delay;
  std::optional<PhaseType> sensing_delay;
};

/// Throws DomainError on invalid rates/indices and on delays whose entry
/// vector or exit vector has more than one nonzero entry.
void validate_aic_spec(const Network& plant, const AICSpec& spec);

/// Closed loop with controller species appended after the plant species.
Network attach_aic(const Network& plant, const AICSpec& spec);

enum class AICVerdict { ControllableErgodic, NotCertified };

std::string to_string(AICVerdict v);

inline constexpr double kGainMargin = kStrictMargin;

struct AICCertificate {
  AICVerdict verdict = AICVerdict::NotCertified;
  std::optional<Vector> v;
  std::optional<Vector> w;
  double static_gain = 0.0;  ///< g = -e_l^T A_df^{-1} e_a
  double setpoint = 0.0;     ///< mu / theta
  bool output_controllable = false;
  double v_slack = 0.0;
  double w_residual = 0.0;
  std::vector<std::string> notes;
};

AICCertificate check_aic(const Network& plant, const AICSpec& spec);

/// Output controllability of (A, e_a, e_l^T): e_l^T A^j e_a != 0 for some j < d.
bool output_controllable(const Matrix& a, std::size_t actuated, std::size_t measured);

struct ClosedLoopReport {
  double mean = 0.0;
  double standard_error = 0.0;
  double target = 0.0;
  double tolerance = 0.0;  ///< max(5% of target, 3 SE)
  bool pass = false;
  std::size_t replicas = 0;
  double horizon = 0.0;
};

ClosedLoopReport verify_closed_loop(const Network& plant, const AICSpec& spec, double horizon, std::size_t replicas,
                                    std::uint64_t seed, double burn_in = -1.0, std::size_t threads = 0);

std::string format_aic_certificate(const AICCertificate& cert);

}  // namespace phdelay
