#include "phdelay/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <queue>
#include <random>
#include <stdexcept>
#include <thread>

#include "phdelay/errors.hpp"

namespace phdelay {

namespace {

constexpr std::int64_t kMaxCount = std::int64_t{1} << 62;

using SparseChange = std::vector<std::pair<std::size_t, std::int64_t>>;

SparseChange sparse(const Eigen::VectorXi& v) {
  SparseChange out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) != 0) out.emplace_back(static_cast<std::size_t>(i), v(i));
  }
  return out;
}

Eigen::VectorXi dense(const std::vector<Term>& terms, std::size_t d) {
  Eigen::VectorXi v = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(d));
  for (const auto& t : terms) v(static_cast<Eigen::Index>(t.species)) += t.count;
  return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Propensity bookkeeping shared by both engines.
class Kinetics {
 public:
  explicit Kinetics(const Network& net) : net_(net), users_(net.species_count()), a_(net.reaction_count(), 0.0) {
    for (std::size_t k = 0; k < net.reaction_count(); ++k) {
      for (const auto& t : net.reactions()[k].reactants) users_[t.species].push_back(k);
    }
    stamp_.assign(net.reaction_count(), 0);
  }

  void reset(const State& x) {
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] = mass_action(net_.reactions()[k], x);
  }

  void apply(State& x, const SparseChange& change) {
    ++epoch_;
    for (const auto& [i, c] : change) {
      x[i] += c;
      if (x[i] < 0) throw std::logic_error("simulation produced a negative count");
      if (x[i] > kMaxCount) throw std::overflow_error("species count exceeds the overflow guard");
      for (std::size_t k : users_[i]) {
        if (stamp_[k] == epoch_) continue;
        stamp_[k] = epoch_;
        touched_.push_back(k);
      }
    }
    for (std::size_t k : touched_) a_[k] = mass_action(net_.reactions()[k], x);
    touched_.clear();
  }

  double total() const {
    double s = 0.0;
    for (double v : a_) s += v;
    return s;
  }

  std::size_t pick(double target) const {
    std::size_t last = 0;
    for (std::size_t k = 0; k < a_.size(); ++k) {
      if (a_[k] <= 0.0) continue;
      last = k;
      target -= a_[k];
      if (target < 0.0) return k;
    }
    return last;  // rounding at the top end of the cumulative sum
  }

 private:
  const Network& net_;
  std::vector<std::vector<std::size_t>> users_;
  std::vector<double> a_;
  std::vector<std::uint64_t> stamp_;
  std::vector<std::size_t> touched_;
  std::uint64_t epoch_ = 0;
};

State checked_state(std::span<const std::int64_t> x0, std::size_t d) {
  if (x0.size() != d) throw ShapeError("initial state length does not match the species count");
  State x(x0.begin(), x0.end());
  for (auto v : x) {
    if (v < 0) throw DomainError("initial state has a negative entry");
  }
  return x;
}

/// Time-weighted sums over [burn_in, horizon], split into kBatches batches.
class Averager {
 public:
  Averager(double burn_in, double horizon, std::size_t p) : burn_in_(burn_in) {
    const auto n = static_cast<Eigen::Index>(p);
    m_.window = horizon - burn_in;
    m_.mean = Vector::Zero(n);
    m_.second = Vector::Zero(n);
    m_.batch_means = Matrix::Zero(static_cast<Eigen::Index>(kBatches), n);
    batch_len_ = m_.window / static_cast<double>(kBatches);
  }

  /// Adds row[cols[j]] held constant over [start, end).
  void add(double start, double end, std::span<const std::int64_t> row, std::span<const std::size_t> cols) {
    start = std::max(start, burn_in_);
    double a = start;
    while (a < end) {
      auto b_idx = static_cast<std::size_t>((a - burn_in_) / batch_len_);
      b_idx = std::min(b_idx, kBatches - 1);
      const double b_end =
          b_idx + 1 == kBatches ? end : std::min(end, burn_in_ + batch_len_ * static_cast<double>(b_idx + 1));
      const double dt = b_end - a;
      if (dt <= 0.0) {
        a = std::nextafter(a, end);
        continue;
      }
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto v = static_cast<double>(row[cols[j]]);
        const auto jj = static_cast<Eigen::Index>(j);
        m_.mean(jj) += v * dt;
        m_.second(jj) += v * v * dt;
        m_.batch_means(static_cast<Eigen::Index>(b_idx), jj) += v * dt;
      }
      a = b_end;
    }
  }

  RunMoments finish() {
    m_.mean /= m_.window;
    m_.second /= m_.window;
    m_.batch_means /= batch_len_;
    return m_;
  }

 private:
  double burn_in_;
  double batch_len_ = 0.0;
  RunMoments m_;
};

double resolve_burn_in(double burn_in, double horizon) {
  if (burn_in < 0.0) burn_in = 0.2 * horizon;
  if (!(burn_in < horizon)) throw DomainError("burn-in must be shorter than the horizon");
  return burn_in;
}

/// Stores the projected path, or streams it into an Averager.
class Recorder {
 public:
  Recorder(Trajectory& traj, std::vector<std::size_t> projection, std::optional<double> streaming_burn_in,
           double horizon)
      : traj_(traj) {
    traj_.projection = std::move(projection);
    traj_.width = traj_.projection.size();
    if (streaming_burn_in) {
      burn_in_ = resolve_burn_in(*streaming_burn_in, horizon);
      avg_.emplace(burn_in_, horizon, traj_.width);
      row_.resize(traj_.width);
      for (std::size_t j = 0; j < traj_.width; ++j) identity_.push_back(j);
    }
  }

  void push(double t, const State& x) {
    if (!avg_) {
      traj_.times.push_back(t);
      for (std::size_t i : traj_.projection) traj_.states.push_back(x[i]);
      return;
    }
    if (started_) avg_->add(last_, t, row_, identity_);
    if (started_ && t >= burn_in_) ++traj_.events_after_burn_in;
    started_ = true;
    last_ = t;
    for (std::size_t j = 0; j < traj_.width; ++j) row_[j] = x[traj_.projection[j]];
  }

  void event(std::size_t id) {
    ++count_;
    if (!avg_) traj_.events.push_back(id);
  }
  std::uint64_t events() const { return count_; }

  void finish(double horizon) {
    if (!avg_) return;
    avg_->add(last_, horizon, row_, identity_);
    traj_.averages = avg_->finish();
  }

 private:
  Trajectory& traj_;
  std::optional<Averager> avg_;
  double burn_in_ = 0.0;
  double last_ = 0.0;
  bool started_ = false;
  State row_;
  std::vector<std::size_t> identity_;
  std::uint64_t count_ = 0;
};

std::vector<std::size_t> resolve_projection(const SimulationOptions& options, std::size_t fallback, std::size_t d) {
  std::vector<std::size_t> proj;
  if (options.projection) {
    proj = *options.projection;
    for (auto i : proj) {
      if (i >= d) throw ShapeError("projection index out of range");
    }
  } else {
    for (std::size_t i = 0; i < fallback; ++i) proj.push_back(i);
  }
  return proj;
}

Trajectory run_plain(const Network& net, State x, double horizon, std::uint64_t seed, std::vector<std::size_t> projection,
                     const SimulationOptions& options) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  Trajectory traj;
  traj.seed = seed;
  traj.horizon = horizon;
  traj.initial_state = x;
  traj.event_counts.assign(net.reaction_count(), 0);
  Recorder rec(traj, std::move(projection), options.streaming_burn_in, horizon);
  std::vector<SparseChange> changes;
  for (std::size_t k = 0; k < net.reaction_count(); ++k) changes.push_back(sparse(net.stoichiometry(k)));

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Kinetics kin(net);
  kin.reset(x);
  double t = 0.0;
  rec.push(t, x);
  for (;;) {
    const double a0 = kin.total();
    if (a0 <= 0.0) break;
    t += std::exponential_distribution<double>(a0)(rng);
    if (t > horizon) break;
    const std::size_t k = kin.pick(uniform(rng) * a0);
    kin.apply(x, changes[k]);
    ++traj.event_counts[k];
    rec.event(k);
    rec.push(t, x);
    if (rec.events() > options.max_events) throw std::runtime_error("simulation exceeded the event limit");
  }
  rec.finish(horizon);
  traj.final_state = std::move(x);
  return traj;
}

}  // namespace

Trajectory simulate_ssa(const AugmentedNetwork& aug, std::span<const std::int64_t> x0, double horizon,
                        std::uint64_t seed, const SimulationOptions& options) {
  const std::size_t full = aug.network.species_count();
  State x = x0.size() == aug.base_species && x0.size() != full ? lift_state(aug, x0) : checked_state(x0, full);
  x = checked_state(x, full);
  return run_plain(aug.network, std::move(x), horizon, seed, resolve_projection(options, aug.base_species, full),
                   options);
}

Trajectory simulate_plain(const Network& net, std::span<const std::int64_t> x0, double horizon, std::uint64_t seed,
                          const SimulationOptions& options) {
  if (net.has_delays()) throw UsageError("simulate_plain: network has delays; augment it or use the direct engine");
  const std::size_t d = net.species_count();
  return run_plain(net, checked_state(x0, d), horizon, seed, resolve_projection(options, d, d), options);
}

Trajectory simulate_delayed_direct(const Network& net, std::span<const std::int64_t> x0, double horizon,
                                   std::uint64_t seed, const SimulationOptions& options) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  const std::size_t d = net.species_count();
  const std::size_t nk = net.reaction_count();
  State x = checked_state(x0, d);

  std::vector<SparseChange> on_fire(nk), on_complete(nk);
  for (std::size_t k = 0; k < nk; ++k) {
    const Reaction& r = net.reactions()[k];
    if (!r.delay) {
      on_fire[k] = sparse(net.stoichiometry(k));
      continue;
    }
    const ReactionParts parts = split_parts(r);
    if (r.delay->realization == Realization::Absorbing) {
      on_fire[k] = sparse(-dense(r.reactants, d));
      on_complete[k] = sparse(dense(r.products, d));
    } else {
      on_fire[k] = sparse(-dense(parts.consumed, d));
      on_complete[k] = sparse(dense(parts.produced, d));
    }
  }

  Trajectory traj;
  traj.seed = seed;
  traj.horizon = horizon;
  traj.initial_state = x;
  traj.event_counts.assign(nk, 0);
  traj.completion_counts.assign(nk, 0);
  Recorder rec(traj, resolve_projection(options, d, d), options.streaming_burn_in, horizon);

  struct Pending {
    double time;
    std::uint64_t seq;
    std::size_t reaction;
    bool operator>(const Pending& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
  std::uint64_t seq = 0;

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Kinetics kin(net);
  kin.reset(x);
  double t = 0.0;
  rec.push(t, x);
  for (;;) {
    const double a0 = kin.total();
    const double fire = a0 > 0.0 ? t + std::exponential_distribution<double>(a0)(rng)
                                 : std::numeric_limits<double>::infinity();
    const double complete = pending.empty() ? std::numeric_limits<double>::infinity() : pending.top().time;
    if (std::min(fire, complete) > horizon) break;
    if (complete <= fire) {
      // The firing clock is memoryless, so discarding its draw is exact.
      const Pending p = pending.top();
      pending.pop();
      t = p.time;
      kin.apply(x, on_complete[p.reaction]);
      ++traj.completion_counts[p.reaction];
      rec.event(nk + p.reaction);
    } else {
      t = fire;
      const std::size_t k = kin.pick(uniform(rng) * a0);
      kin.apply(x, on_fire[k]);
      ++traj.event_counts[k];
      rec.event(k);
      if (const auto& delay = net.reactions()[k].delay) {
        const double tau = sample_delay(delay->law, rng);
        traj.delay_samples.push_back(tau);
        traj.delay_sample_reaction.push_back(k);
        pending.push({t + tau, seq++, k});
      }
    }
    rec.push(t, x);
    if (rec.events() > options.max_events) throw std::runtime_error("simulation exceeded the event limit");
  }
  rec.finish(horizon);
  traj.final_state = std::move(x);
  return traj;
}

RunMoments time_average(const Trajectory& run, double burn_in, std::span<const std::size_t> columns) {
  burn_in = resolve_burn_in(burn_in, run.horizon);
  if (run.averages) {
    bool all = columns.empty();
    if (!all && columns.size() == run.width) {
      all = true;
      for (std::size_t j = 0; j < columns.size(); ++j) all = all && columns[j] == j;
    }
    if (!all || std::abs(run.averages->window - (run.horizon - burn_in)) > 1e-9 * run.horizon) {
      throw UsageError("time_average: streamed run only holds averages over its own window and columns");
    }
    return *run.averages;
  }
  if (run.times.empty()) throw UsageError("time_average: empty trajectory");
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  if (cols.empty()) {
    for (std::size_t j = 0; j < run.width; ++j) cols.push_back(j);
  }
  for (auto c : cols) {
    if (c >= run.width) throw ShapeError("time_average: column out of range");
  }
  Averager avg(burn_in, run.horizon, cols.size());
  const std::size_t n = run.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double end = i + 1 < n ? run.times[i + 1] : run.horizon;
    avg.add(run.times[i], end, run.state(i), cols);
  }
  return avg.finish();
}

EnsembleStats pool(std::span<const RunMoments> runs) {
  if (runs.empty()) throw UsageError("ensemble statistics need at least one run");
  const Eigen::Index p = runs.front().mean.size();
  const auto r = static_cast<double>(runs.size());
  EnsembleStats s;
  s.runs = runs.size();
  s.window = runs.front().window;
  s.mean = Vector::Zero(p);
  Vector second = Vector::Zero(p);
  for (const auto& run : runs) {
    if (run.mean.size() != p) throw ShapeError("ensemble runs disagree on the projection");
    s.mean += run.mean;
    second += run.second;
  }
  s.mean /= r;
  second /= r;
  s.variance = (second - s.mean.cwiseProduct(s.mean)).cwiseMax(0.0);

  s.standard_error = Vector::Zero(p);
  s.variance_standard_error = Vector::Zero(p);
  if (runs.size() >= 2) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double ss_mean = 0.0;
      double ss_var = 0.0;
      for (const auto& run : runs) {
        const double run_var = run.second(j) - run.mean(j) * run.mean(j);
        ss_mean += std::pow(run.mean(j) - s.mean(j), 2);
        ss_var += std::pow(run_var - s.variance(j), 2);
      }
      s.standard_error(j) = std::sqrt(ss_mean / (r - 1.0) / r);
      s.variance_standard_error(j) = std::sqrt(ss_var / (r - 1.0) / r);
    }
  } else {
    // Batch means for the mean; batch second moments are not kept, so the
    // variance error uses the delta method on the batch spread.
    const Matrix& b = runs.front().batch_means;
    const auto nb = static_cast<double>(b.rows());
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mean = b.col(j).mean();
      const double ss = (b.col(j).array() - mean).square().sum();
      s.standard_error(j) = std::sqrt(ss / (nb - 1.0) / nb);
      s.variance_standard_error(j) = 2.0 * std::sqrt(std::max(s.variance(j), 0.0)) * s.standard_error(j) +
                                     s.standard_error(j) * s.standard_error(j);
    }
  }
  return s;
}

EnsembleStats ensemble_stats(std::span<const Trajectory> runs, double burn_in, std::span<const std::size_t> columns) {
  if (runs.empty()) throw UsageError("ensemble_stats: no runs");
  std::vector<RunMoments> moments;
  for (const auto& run : runs) {
    if (run.horizon != runs.front().horizon) throw UsageError("ensemble_stats: runs have different horizons");
    moments.push_back(time_average(run, burn_in, columns));
  }
  return pool(moments);
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t replica) { return splitmix64(seed + replica); }

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<Trajectory> run_ensemble(const Simulator& sim, std::size_t replicas, std::uint64_t seed,
                                     std::size_t threads) {
  if (replicas == 0) throw UsageError("run_ensemble: at least one replica is required");
  std::vector<Trajectory> out(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) { out[r] = sim(replica_seed(seed, r)); });
  return out;
}

EnsembleStats run_ensemble_stats(const Simulator& sim, std::size_t replicas, std::uint64_t seed, double burn_in,
                                 std::span<const std::size_t> columns, std::size_t threads) {
  if (replicas == 0) throw UsageError("run_ensemble_stats: at least one replica is required");
  std::vector<RunMoments> moments(replicas);
  parallel_for(replicas, threads,
               [&](std::size_t r) { moments[r] = time_average(sim(replica_seed(seed, r)), burn_in, columns); });
  return pool(moments);
}

}  // namespace phdelay
