#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "phdelay/augment.hpp"
#include "phdelay/linalg.hpp"
#include "phdelay/network.hpp"

namespace phdelay {

/// Per-run time averages over [burn_in, horizon].
struct RunMoments {
  Vector mean;
  Vector second;        ///< time average of x^2
  Matrix batch_means;   ///< kBatches x p
  double window = 0.0;
};

inline constexpr std::size_t kBatches = 16;

/// Piecewise-constant sample path. Row 0 is the initial state at time 0;
/// row i > 0 is the state right after event i - 1.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::int64_t> states;  ///< row-major, `width` columns (projected)
  std::size_t width = 0;
  std::vector<std::size_t> projection;  ///< recorded species, indices into the simulated network
  /// Event log. The augmented engine logs reaction indices; the direct engine
  /// logs k for the firing of reaction k and K + k for a delayed completion.
  std::vector<std::size_t> events;
  std::vector<std::uint64_t> event_counts;
  std::vector<std::uint64_t> completion_counts;  ///< direct engine only
  std::vector<double> delay_samples;             ///< direct engine only
  std::vector<std::size_t> delay_sample_reaction;
  /// Streamed runs keep no path: `times`, `states` and `events` stay empty and
  /// the averages over the streaming window are stored here instead.
  std::optional<RunMoments> averages;
  std::uint64_t events_after_burn_in = 0;  ///< streamed runs only
  State initial_state;  ///< full state at time 0
  State final_state;    ///< full state at the horizon
  std::uint64_t seed = 0;
  double horizon = 0.0;

  std::size_t size() const { return times.size(); }
  std::span<const std::int64_t> state(std::size_t i) const {
    return {states.data() + i * width, width};
  }
};

struct SimulationOptions {
  /// Species recorded in the path; default is the base species.
  std::optional<std::vector<std::size_t>> projection;
  std::uint64_t max_events = 200'000'000;
  /// Accumulate time averages past this burn-in while simulating instead of
  /// storing the path; negative selects 20% of the horizon.
  std::optional<double> streaming_burn_in;
};

/// Direct-method SSA on the realized (delay-free) augmented network. `x0`
/// is either a base state (delay lines start empty) or a full state.
Trajectory simulate_ssa(const AugmentedNetwork& aug, std::span<const std::int64_t> x0, double horizon,
                        std::uint64_t seed, const SimulationOptions& options = {});

/// Direct-method SSA on a network whose delays must all be absent.
Trajectory simulate_plain(const Network& net, std::span<const std::int64_t> x0, double horizon, std::uint64_t seed,
                          const SimulationOptions& options = {});

/// Delay-queue SSA: sampled PH delays, pending completions in a binary heap.
Trajectory simulate_delayed_direct(const Network& net, std::span<const std::int64_t> x0, double horizon,
                                   std::uint64_t seed, const SimulationOptions& options = {});

/// `columns` index the recorded columns of the trajectory; empty means all.
/// Streamed runs only answer for their own window and all columns.
RunMoments time_average(const Trajectory& run, double burn_in, std::span<const std::size_t> columns = {});

struct EnsembleStats {
  Vector mean;
  Vector variance;
  Vector standard_error;           ///< of the mean
  Vector variance_standard_error;  ///< of the variance
  double window = 0.0;             ///< averaging window per run
  std::size_t runs = 0;
};

EnsembleStats pool(std::span<const RunMoments> runs);

/// Time averages pooled across runs. burn_in < 0 selects 20% of the horizon.
EnsembleStats ensemble_stats(std::span<const Trajectory> runs, double burn_in = -1.0,
                             std::span<const std::size_t> columns = {});

/// Independent per-replica seed.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t replica);

using Simulator = std::function<Trajectory(std::uint64_t seed)>;

/// Runs `replicas` seeded simulations on a worker pool. Results are in
/// replica order regardless of scheduling.
std::vector<Trajectory> run_ensemble(const Simulator& sim, std::size_t replicas, std::uint64_t seed,
                                     std::size_t threads = 0);

/// As run_ensemble, but reduces each run to its time averages as soon as it
/// finishes so paths are never held together.
EnsembleStats run_ensemble_stats(const Simulator& sim, std::size_t replicas, std::uint64_t seed, double burn_in = -1.0,
                                 std::span<const std::size_t> columns = {}, std::size_t threads = 0);

}  // namespace phdelay
