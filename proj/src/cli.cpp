#include "phdelay/cli.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "phdelay/aic.hpp"
#include "phdelay/augment.hpp"
#include "phdelay/errors.hpp"
#include "phdelay/ergodicity.hpp"
#include "phdelay/moments.hpp"
#include "phdelay/network.hpp"
#include "phdelay/simulate.hpp"

namespace phdelay {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 computation failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

struct Input {
  std::string path;
  std::string text;
  std::string hash;
  Network net;
};

Input load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read input file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Input input{path, buf.str(), "", {}};
  input.hash = sha256_hex(input.text);
  try {
    input.net = parse_network(input.text);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), e.line(), e.column(), path + ": " + e.what());
  }
  return input;
}

std::string header(const std::string& command, const Input* input, std::optional<std::uint64_t> seed) {
  std::string h = "# phdelay " + std::string(kToolVersion) + " command=" + command;
  h += " seed=" + (seed ? std::to_string(*seed) : std::string("none"));
  if (input != nullptr) h += " input=" + input->path + " input_sha256=" + input->hash;
  return h + "\n";
}

void write_artifact(const fs::path& path, const std::string& content, bool force) {
  if (fs::exists(path) && !force) {
    throw UsageError("refusing to overwrite '" + path.string() + "' (pass --force)");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << content;
}

std::size_t species_index(const Network& net, const std::string& name) {
  if (const auto idx = net.find_species(name)) return *idx;
  throw UsageError("unknown species '" + name + "'");
}

/// "5,0" or "X1=5,X2=0"; unspecified species start at zero.
State parse_initial(const Network& net, const std::string& text) {
  State x(net.species_count(), 0);
  if (text.empty()) return x;
  std::stringstream ss(text);
  std::string item;
  std::size_t position = 0;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    std::size_t idx = position;
    std::string value = item;
    if (eq != std::string::npos) {
      idx = species_index(net, item.substr(0, eq));
      value = item.substr(eq + 1);
    }
    if (idx >= x.size()) throw UsageError("too many initial values");
    try {
      std::size_t used = 0;
      x[idx] = std::stoll(value, &used);
      if (used != value.size() || x[idx] < 0) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw UsageError("invalid initial count '" + value + "'");
    }
    ++position;
  }
  return x;
}

std::string csv_row(double t, std::span<const std::int64_t> row) {
  std::string line = format_number(t);
  for (auto v : row) line += "," + std::to_string(v);
  return line + "\n";
}

int run_validate(const std::string& path, std::ostream& out) {
  const Input in = load(path);
  std::size_t delayed = 0;
  for (const auto& r : in.net.reactions()) delayed += r.delay ? 1 : 0;
  out << "valid: " << in.net.species_count() << " species, " << in.net.reaction_count() << " reactions, " << delayed
      << " delayed\n";
  out << "order: " << (in.net.is_unimolecular() ? "unimolecular" : "bimolecular") << "\n";
  return 0;
}

int run_augment(const std::string& path, const std::string& out_dir, bool force, std::ostream& out) {
  const Input in = load(path);
  const AugmentedNetwork aug = augment_network(in.net);
  const std::string h = header("augment", &in, std::nullopt);
  const std::string network_text = h + serialize(aug.network);
  const std::string blocks_text = h + (aug.has_bimolecular ? std::string("# bimolecular network: blocks cover first-order terms only\n") : "") +
                                  format_blocks(aug);
  if (out_dir.empty()) {
    out << network_text << blocks_text;
    return 0;
  }
  const std::string stem = fs::path(path).stem().string();
  write_artifact(fs::path(out_dir) / (stem + ".augmented.rxn"), network_text, force);
  write_artifact(fs::path(out_dir) / (stem + ".blocks.txt"), blocks_text, force);
  out << "wrote " << (fs::path(out_dir) / (stem + ".augmented.rxn")).string() << " and "
      << (fs::path(out_dir) / (stem + ".blocks.txt")).string() << "\n";
  return 0;
}

struct AnalyzeOptions {
  std::string path;
  bool assume_irreducible = false;
  bool relaxed = false;
  int bound = 6;
  std::string out;
  bool force = false;
};

int run_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const Input in = load(o.path);
  Certificate cert = check_network(in.net, BimolecularOptions{o.relaxed});
  std::string text = header("analyze", &in, std::nullopt);
  if (o.assume_irreducible) {
    cert.notes.push_back("irreducibility asserted by the user");
  } else {
    const ReachabilityReport rep = reachability_diagnostic(in.net, o.bound);
    cert.notes.push_back("irreducibility not asserted; verdict conditional on it (pass --assume-irreducible)");
    if (rep.explored) {
      cert.notes.push_back("reachability diagnostic: " + std::to_string(rep.reachable_from_origin) +
                           " lattice states reachable from the empty state, " + std::to_string(rep.returning_to_origin) +
                           " of them return");
    }
    for (const auto& w : rep.warnings) cert.notes.push_back("warning: " + w);
  }
  text += format_certificate(cert);
  if (o.out.empty()) {
    out << text;
  } else {
    write_artifact(o.out, text, o.force);
    out << "verdict: " << to_string(cert.verdict) << "\n";
  }
  return cert.verdict == Verdict::Ergodic ? 0 : 1;
}

struct SimulateOptions {
  std::string path;
  std::string engine = "augmented";
  double horizon = 100.0;
  std::uint64_t seed = 1;
  std::size_t replicas = 1;
  double burn_in = -1.0;
  std::string out;
  std::string x0;
  std::size_t threads = 0;
  bool force = false;
};

int run_simulate(const SimulateOptions& o, std::ostream& out) {
  const Input in = load(o.path);
  if (o.replicas == 0) throw UsageError("--replicas must be at least 1");
  if (!(o.horizon > 0.0)) throw UsageError("--T must be positive");
  if (o.burn_in >= o.horizon) throw UsageError("--burn-in must be shorter than --T");
  const State x0 = parse_initial(in.net, o.x0);
  const std::string stem = fs::path(o.path).stem().string();
  const fs::path dir = o.out.empty() ? fs::path(stem + "_sim") : fs::path(o.out);

  std::optional<AugmentedNetwork> aug;
  if (o.engine == "augmented") {
    aug = augment_network(in.net);
  } else if (o.engine != "direct") {
    throw UsageError("--engine must be 'augmented' or 'direct'");
  }
  const Simulator sim = [&](std::uint64_t s) {
    return aug ? simulate_ssa(*aug, x0, o.horizon, s) : simulate_delayed_direct(in.net, x0, o.horizon, s);
  };

  std::vector<fs::path> files;
  for (std::size_t r = 0; r < o.replicas; ++r) files.push_back(dir / (stem + "_r" + std::to_string(r) + ".csv"));
  files.push_back(dir / "summary.txt");
  for (const auto& f : files) {
    if (fs::exists(f) && !o.force) throw UsageError("refusing to overwrite '" + f.string() + "' (pass --force)");
  }

  const std::vector<Trajectory> runs = run_ensemble(sim, o.replicas, o.seed, o.threads);
  std::vector<RunMoments> moments;
  for (std::size_t r = 0; r < o.replicas; ++r) {
    const Trajectory& traj = runs[r];
    const std::uint64_t s = traj.seed;
    std::string csv = header("simulate engine=" + o.engine + " replica=" + std::to_string(r), &in, s);
    csv += "time";
    for (const auto& name : in.net.species()) csv += "," + name;
    csv += "\n";
    for (std::size_t i = 0; i < traj.size(); ++i) csv += csv_row(traj.times[i], traj.state(i));
    csv += csv_row(traj.horizon, traj.state(traj.size() - 1));
    write_artifact(files[r], csv, o.force);
    moments.push_back(time_average(traj, o.burn_in));
  }
  const EnsembleStats stats = pool(moments);
  std::string summary = header("simulate engine=" + o.engine, &in, o.seed);
  summary += "# empirical time averages past burn-in, pooled over replicas\n";
  summary += "replicas: " + std::to_string(o.replicas) + "\n";
  summary += "horizon: " + format_number(o.horizon) + "\n";
  summary += "window: " + format_number(stats.window) + "\n";
  summary += "species,mean,variance,se_mean,se_variance\n";
  for (std::size_t j = 0; j < in.net.species_count(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    summary += in.net.species()[j] + "," + format_number(stats.mean(jj)) + "," + format_number(stats.variance(jj)) +
               "," + format_number(stats.standard_error(jj)) + "," + format_number(stats.variance_standard_error(jj)) +
               "\n";
  }
  write_artifact(files.back(), summary, o.force);
  out << summary;
  return 0;
}

struct MomentsOptions {
  std::string path;
  double horizon = 50.0;
  std::size_t steps = 500;
  std::string x0;
  std::string out;
  bool force = false;
};

int run_moments(const MomentsOptions& o, std::ostream& out) {
  const Input in = load(o.path);
  const AugmentedNetwork aug = augment_network(in.net);
  const State x0 = parse_initial(in.net, o.x0);
  Vector m0(static_cast<Eigen::Index>(x0.size()));
  for (std::size_t i = 0; i < x0.size(); ++i) m0(static_cast<Eigen::Index>(i)) = static_cast<double>(x0[i]);
  const MomentTrajectory traj = moment_ode(aug, m0, o.horizon, o.steps);

  const std::string h = header("moments", &in, std::nullopt);
  std::string csv = h + "time";
  for (const auto& name : aug.network.species()) csv += "," + name;
  csv += "\n";
  for (std::size_t i = 0; i < traj.grid.size(); ++i) {
    csv += format_number(traj.grid[i]);
    for (Eigen::Index j = 0; j < traj.means.cols(); ++j) {
      csv += "," + format_number(traj.means(static_cast<Eigen::Index>(i), j));
    }
    csv += "\n";
  }
  std::string summary = h + "stationary mean (base species)\n";
  try {
    const Vector m = stationary_mean(aug);
    for (std::size_t j = 0; j < in.net.species_count(); ++j) {
      summary += in.net.species()[j] + " " + format_number(m(static_cast<Eigen::Index>(j))) + "\n";
    }
  } catch (const DomainError& e) {
    summary += std::string("none: ") + e.what() + "\n";
  }
  if (o.out.empty()) {
    out << csv << summary;
  } else {
    write_artifact(o.out, csv, o.force);
    write_artifact(o.out + ".stationary.txt", summary, o.force);
    out << summary;
  }
  return 0;
}

struct VarianceOptions {
  double k1 = 10.0, g1 = 1.0, k2 = 5.0, g2 = 1.0;
  std::optional<double> lambda;
};

int run_variance(const VarianceOptions& o, std::ostream& out) {
  const GeneExpressionVariance v = gene_expression_variance(o.k1, o.g1, o.k2, o.g2, o.lambda);
  out << header("variance", nullptr, std::nullopt);
  out << "mean: " << format_number(v.mean) << "\n";
  out << "variance_delay_free: " << format_number(v.variance) << "\n";
  if (v.delayed_variance) {
    out << "lambda: " << format_number(*o.lambda) << "\n";
    out << "variance_delayed: " << format_number(*v.delayed_variance) << "\n";
    out << "ratio: " << format_number(*v.ratio) << "\n";
    out << "ratio_derivative: " << format_number(*v.ratio_derivative) << "\n";
    out << "ordering_mean_lt_delayed_lt_delay_free: " << (v.ordered ? "yes" : "no") << "\n";
  }
  return 0;
}

struct ControlOptions {
  std::string path;
  double mu = 10.0, theta = 2.0, k = 1.0, eta = 1.0;
  std::string actuated, measured;
  std::string actuation_delay, sensing_delay;
  bool verify = false;
  double horizon = 500.0;
  std::size_t replicas = 8;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string out;
  bool force = false;
};

int run_control(const ControlOptions& o, std::ostream& out) {
  const Input in = load(o.path);
  if (in.net.species_count() == 0) throw UsageError("plant has no species");
  AICSpec spec;
  spec.actuated = o.actuated.empty() ? 0 : species_index(in.net, o.actuated);
  spec.measured = o.measured.empty() ? in.net.species_count() - 1 : species_index(in.net, o.measured);
  spec.mu = o.mu;
  spec.theta = o.theta;
  spec.k = o.k;
  spec.eta = o.eta;
  if (!o.actuation_delay.empty()) spec.actuation_delay = parse_delay_spec(o.actuation_delay).law;
  if (!o.sensing_delay.empty()) spec.sensing_delay = parse_delay_spec(o.sensing_delay).law;

  const AICCertificate cert = check_aic(in.net, spec);
  std::string text = header("control", &in, o.verify ? std::optional<std::uint64_t>(o.seed) : std::nullopt);
  text += "actuated: " + in.net.species()[spec.actuated] + "\n";
  text += "measured: " + in.net.species()[spec.measured] + "\n";
  text += format_aic_certificate(cert);
  bool ok = cert.verdict == AICVerdict::ControllableErgodic;
  if (o.verify) {
    if (!ok) {
      text += "verification: skipped (not certified)\n";
    } else {
      const ClosedLoopReport rep = verify_closed_loop(in.net, spec, o.horizon, o.replicas, o.seed, -1.0, o.threads);
      text += "verification_mean: " + format_number(rep.mean) + "\n";
      text += "verification_standard_error: " + format_number(rep.standard_error) + "\n";
      text += "verification_target: " + format_number(rep.target) + "\n";
      text += "verification_tolerance: " + format_number(rep.tolerance) + "\n";
      text += "verification_replicas: " + std::to_string(rep.replicas) + "\n";
      text += "verification_horizon: " + format_number(rep.horizon) + "\n";
      text += std::string("verification: ") + (rep.pass ? "pass" : "fail") + "\n";
      ok = ok && rep.pass;
    }
  }
  if (o.out.empty()) {
    out << text;
  } else {
    write_artifact(o.out, text, o.force);
    out << "verdict: " << to_string(cert.verdict) << "\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic reaction networks with phase-type delays", "phdelay"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string path;
  std::string out_dir;
  bool force = false;

  auto* validate = app.add_subcommand("validate", "Parse and validate a network file");
  validate->add_option("file", path, "network file")->required();

  auto* augment = app.add_subcommand("augment", "Emit the augmented network and its moment blocks");
  augment->add_option("file", path, "network file")->required();
  augment->add_option("--out", out_dir, "output directory (default: stdout)");
  augment->add_flag("--force", force, "overwrite existing outputs");

  AnalyzeOptions ao;
  auto* analyze = app.add_subcommand("analyze", "Ergodicity certificate");
  analyze->add_option("file", ao.path, "network file")->required();
  analyze->add_flag("--assume-irreducible", ao.assume_irreducible, "assert irreducibility of the state space");
  analyze->add_flag("--relaxed", ao.relaxed, "use v^T S_b <= 0 for bimolecular networks");
  analyze->add_option("--reachability-bound", ao.bound, "lattice bound of the reachability diagnostic")
      ->check(CLI::Range(1, 1000));
  analyze->add_option("--out", ao.out, "certificate file (default: stdout)");
  analyze->add_flag("--force", ao.force, "overwrite existing outputs");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Exact stochastic simulation");
  simulate->add_option("file", so.path, "network file")->required();
  simulate->add_option("--engine", so.engine, "augmented or direct")->check(CLI::IsMember({"augmented", "direct"}));
  simulate->add_option("--T", so.horizon, "time horizon");
  simulate->add_option("--seed", so.seed, "base seed");
  simulate->add_option("--replicas", so.replicas, "number of replicas");
  simulate->add_option("--burn-in", so.burn_in, "burn-in time (default 20% of the horizon)");
  simulate->add_option("--x0", so.x0, "initial counts, e.g. 5,0 or X1=5");
  simulate->add_option("--out", so.out, "output directory (default <stem>_sim)");
  simulate->add_option("--threads", so.threads, "worker threads (default: hardware)");
  simulate->add_flag("--force", so.force, "overwrite existing outputs");

  MomentsOptions mo;
  auto* moments = app.add_subcommand("moments", "First-moment dynamics and stationary mean");
  moments->add_option("file", mo.path, "network file")->required();
  moments->add_option("--T", mo.horizon, "time horizon");
  moments->add_option("--steps", mo.steps, "number of grid intervals")->check(CLI::PositiveNumber);
  moments->add_option("--x0", mo.x0, "initial means of the base species");
  moments->add_option("--out", mo.out, "CSV file (default: stdout)");
  moments->add_flag("--force", mo.force, "overwrite existing outputs");

  VarianceOptions vo;
  auto* variance = app.add_subcommand("variance", "Gene-expression protein variance closed forms");
  variance->add_option("--k1", vo.k1, "transcription rate")->check(CLI::PositiveNumber);
  variance->add_option("--g1", vo.g1, "mRNA degradation rate")->check(CLI::PositiveNumber);
  variance->add_option("--k2", vo.k2, "translation rate")->check(CLI::PositiveNumber);
  variance->add_option("--g2", vo.g2, "protein degradation rate")->check(CLI::PositiveNumber);
  variance->add_option("--lambda", vo.lambda, "exponential delay rate")->check(CLI::PositiveNumber);

  ControlOptions co;
  auto* control = app.add_subcommand("control", "Antithetic integral control certificate");
  control->add_option("file", co.path, "plant network file")->required();
  control->add_option("--mu", co.mu, "reference rate")->check(CLI::PositiveNumber);
  control->add_option("--theta", co.theta, "sensing rate")->check(CLI::PositiveNumber);
  control->add_option("--k", co.k, "actuation rate")->check(CLI::PositiveNumber);
  control->add_option("--eta", co.eta, "annihilation rate")->check(CLI::PositiveNumber);
  control->add_option("--actuated", co.actuated, "actuated species (default: first)");
  control->add_option("--measured", co.measured, "measured species (default: last)");
  control->add_option("--actuation-delay", co.actuation_delay, "delay block, e.g. \"kind=erlang shape=3 rate=3\"");
  control->add_option("--sensing-delay", co.sensing_delay, "delay block");
  control->add_flag("--verify", co.verify, "run closed-loop simulations");
  control->add_option("--T", co.horizon, "verification horizon");
  control->add_option("--replicas", co.replicas, "verification replicas");
  control->add_option("--seed", co.seed, "verification seed");
  control->add_option("--threads", co.threads, "worker threads (default: hardware)");
  control->add_option("--out", co.out, "certificate file (default: stdout)");
  control->add_flag("--force", co.force, "overwrite existing outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return run_validate(path, out);
    if (*augment) return run_augment(path, out_dir, force, out);
    if (*analyze) return run_analyze(ao, out);
    if (*simulate) return run_simulate(so, out);
    if (*moments) return run_moments(mo, out);
    if (*variance) return run_variance(vo, out);
    if (*control) return run_control(co, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace phdelay
