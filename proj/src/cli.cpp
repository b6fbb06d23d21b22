#include "lmflow/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "lmflow/bootstrap.hpp"
#include "lmflow/carima.hpp"
#include "lmflow/equilibrium.hpp"
#include "lmflow/estimator.hpp"
#include "lmflow/flow_io.hpp"
#include "lmflow/panel.hpp"
#include "lmflow/synthgen.hpp"

namespace lmflow::cli {

namespace fs = std::filesystem;

namespace {

struct RunOptions {
  std::string input;
  std::string states = "SE,TE,PE,U,IN";
  std::string window;
  std::string tstar;
  std::string true_tstar;
  std::string new_tstar;
  std::string filter = "all";
  int young_cutoff = 35;
  std::string weight = "destination";
  bool all_ages = false;
  int horizon = 4;
  double population = 0.0;
  int bootstrap = 999;
  std::optional<std::uint64_t> seed;
  std::string mode = "full_pipeline";
  std::string scale = "logit";
  bool seasonal = false;
  bool keep_replicates = false;
  std::string out;
  int threads = 1;
  std::string matrix;
  std::optional<double> delta;
  std::string world;
  std::optional<long> persons;
};

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::ConfigInvalid, message);
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) config_error(flag + " is required");
}

// Outputs are written to a private directory first and copied into the
// output directory only once every file exists.
class Staging {
 public:
  Staging() {
    static std::atomic<int> counter{0};
    dir_ = fs::temp_directory_path() /
           ("lmflow-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::error_code ec;
    fs::remove_all(dir_, ec);
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  const fs::path& dir() const noexcept { return dir_; }

  void commit(const fs::path& target) const {
    std::error_code ec;
    fs::create_directories(target, ec);
    if (!ec) {
      fs::copy(dir_, target, fs::copy_options::recursive | fs::copy_options::overwrite_existing,
               ec);
    }
    if (ec) throw Error(ErrorCode::IoError, "cannot write " + target.string() + ": " + ec.message());
  }

 private:
  fs::path dir_;
};

StateSpace space_of(const RunOptions& o) {
  try {
    return StateSpace::parse(o.states);
  } catch (const Error& e) {
    config_error(std::string("--states: ") + e.what());
  }
}

QuarterId quarter_flag(const std::string& value, const std::string& flag) {
  try {
    return QuarterId::parse(value);
  } catch (const Error&) {
    config_error(flag + ": expected YYYYQn, got '" + value + "'");
  }
}

QuarterWindow window_flag(const std::string& value) {
  try {
    return QuarterWindow::parse(value);
  } catch (const Error&) {
    config_error("--window: expected YYYYQn:YYYYQn, got '" + value + "'");
  }
}

carima::InterventionSpec spec_of(const RunOptions& o) {
  require(o.window, "--window");
  QuarterWindow w = window_flag(o.window);
  if (!o.tstar.empty()) {
    const QuarterId t = quarter_flag(o.tstar, "--tstar");
    if (t != w.last) {
      config_error("--tstar " + t.str() + " must be the last quarter of --window " + w.str());
    }
  }
  carima::InterventionSpec spec{w, o.horizon};
  try {
    spec.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  return spec;
}

bootstrap::BootstrapConfig boot_of(const RunOptions& o) {
  bootstrap::BootstrapConfig cfg;
  cfg.replicates = o.bootstrap;
  if (o.seed) cfg.master_seed = *o.seed;
  cfg.threads = o.threads;
  try {
    cfg.mode = bootstrap::parse_mode(o.mode);
  } catch (const Error& e) {
    config_error(std::string("--mode: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    config_error(std::string("--bootstrap: ") + e.what());
  }
  return cfg;
}

carima::EffectOptions effect_options_of(const RunOptions& o) {
  carima::EffectOptions opt;
  opt.forecast.scale = carima::parse_scale(o.scale);
  opt.forecast.seasonal = o.seasonal;
  opt.forecast.threads = o.threads;
  opt.keep_replicates = o.keep_replicates;
  opt.filter = o.filter;
  return opt;
}

SubgroupFilter filter_of(const RunOptions& o) {
  try {
    return SubgroupFilter::parse(o.filter, o.young_cutoff);
  } catch (const Error& e) {
    config_error(std::string("--filter: ") + e.what());
  }
}

LinkOptions link_of(const RunOptions& o) {
  LinkOptions link;
  if (o.weight == "destination") {
    link.weight = WeightConvention::Destination;
  } else if (o.weight == "origin") {
    link.weight = WeightConvention::Origin;
  } else {
    config_error("--weight must be destination or origin");
  }
  return link;
}

double population_of(const RunOptions& o) {
  if (!(o.population > 0.0)) config_error("--population must be a positive number");
  return o.population;
}

QuarterSeries load_series(const RunOptions& o, const QuarterWindow& window) {
  require(o.input, "--input");
  const StateSpace space = space_of(o);
  const SubgroupFilter filter = filter_of(o);
  const LinkOptions link = link_of(o);
  PanelOptions panel;
  panel.space = space;
  panel.working_age_only = !o.all_ages;
  const auto records = parse_panel(o.input, panel);
  return build_series(records, space, window, filter, link);
}

int cmd_estimate(const RunOptions& o, std::ostream& out) {
  require(o.window, "--window");
  require(o.out, "--out");
  const QuarterSeries series = load_series(o, window_flag(o.window));
  Staging staging;
  export_series(series, staging.dir());
  staging.commit(o.out);
  out << "estimated " << series.shares.size() << " share vectors and " << series.matrices.size()
      << " matrices into " << o.out << "\n";
  return kOk;
}

void print_effects(const carima::EffectReport& r, std::ostream& out) {
  const auto counts = r.count_diffs();
  for (int i = 0; i < r.space.size(); ++i) {
    out << r.space.label(i) << " count_diff " << io::format_double(counts(i))
        << (r.count_diff_ci[i].significant() ? " *" : "") << "\n";
  }
}

int cmd_evaluate(const RunOptions& o, std::ostream& out) {
  require(o.out, "--out");
  const auto spec = spec_of(o);
  const auto cfg = boot_of(o);
  const double population = population_of(o);
  const auto options = effect_options_of(o);
  const QuarterSeries series = load_series(o, {spec.observation_window.first, spec.horizon_end()});
  const auto report = carima::effects(series, spec, population, cfg, options);
  Staging staging;
  carima::write_report(report, series, staging.dir());
  staging.commit(o.out);
  print_effects(report, out);
  return kOk;
}

int cmd_placebo(const RunOptions& o, std::ostream& out) {
  require(o.out, "--out");
  require(o.true_tstar, "--true-tstar");
  const auto spec = spec_of(o);
  const QuarterId true_t = quarter_flag(o.true_tstar, "--true-tstar");
  const auto cfg = boot_of(o);
  const double population = population_of(o);
  const auto options = effect_options_of(o);
  if (spec.horizon_end() > true_t) {
    throw Error(ErrorCode::PlaceboOverlap, "placebo horizon ends at " + spec.horizon_end().str() +
                                               ", after the true intervention quarter " +
                                               true_t.str());
  }
  const QuarterSeries series = load_series(o, {spec.observation_window.first, spec.horizon_end()});
  const auto report = carima::placebo(series, spec, true_t, population, cfg, options);
  Staging staging;
  carima::write_report(report.report, series, staging.dir());
  io::write_text_file(staging.dir() / "placebo.json", carima::to_json(report).dump(2) + "\n");
  staging.commit(o.out);
  print_effects(report.report, out);
  out << "placebo " << (report.pass ? "pass" : "fail") << "\n";
  return kOk;
}

int cmd_shift(const RunOptions& o, std::ostream& out) {
  require(o.out, "--out");
  require(o.new_tstar, "--new-tstar");
  const auto spec = spec_of(o);
  const QuarterId moved = quarter_flag(o.new_tstar, "--new-tstar");
  if (std::abs(moved.minus(spec.t_star())) > 1) {
    throw Error(ErrorCode::ShiftTooLarge, "--new-tstar may differ from t* by at most one quarter");
  }
  const auto cfg = boot_of(o);
  const double population = population_of(o);
  const auto options = effect_options_of(o);
  const QuarterId last = std::max(spec.horizon_end(), moved.plus(spec.horizon));
  const QuarterSeries series = load_series(o, {spec.observation_window.first, last});
  const auto report = carima::shift_tstar(series, spec, moved, population, cfg, options);
  Staging staging;
  carima::write_report(report.base, series, staging.dir() / "base");
  carima::write_report(report.shifted, series, staging.dir() / "shifted");
  io::write_text_file(staging.dir() / "shift.json", carima::to_json(report).dump(2) + "\n");
  staging.commit(o.out);
  out << "base t* " << spec.t_star().str() << "\n";
  print_effects(report.base, out);
  out << "shifted t* " << moved.str() << "\n";
  print_effects(report.shifted, out);
  return kOk;
}

int cmd_equilibrium(const RunOptions& o, std::ostream& out) {
  require(o.matrix, "--matrix");
  const TransitionMatrix m = io::read_matrix_file(o.matrix);
  nlohmann::json report;
  std::string table;
  if (m.size() == 3) {
    const equilibrium::ThreeStateChain chain(m, o.population > 0.0 ? o.population : 1.0);
    const auto result = equilibrium::analyse(chain);
    report = equilibrium::to_json(result);
    table = equilibrium::format_table(result, chain);
    if (o.delta) {
      report["composition"] = equilibrium::to_json(equilibrium::composition_effect_demo(chain, *o.delta));
    }
  } else {
    if (o.delta) config_error("--delta needs a three-state (T,P,U) matrix");
    report["stationary"] = io::to_json(equilibrium::stationary_distribution(m));
  }
  report["kind"] = "equilibrium";
  report["matrix"] = io::to_json(m);
  if (!o.out.empty()) {
    Staging staging;
    io::write_text_file(staging.dir() / "equilibrium.json", report.dump(2) + "\n");
    staging.commit(o.out);
  }
  if (!table.empty()) {
    out << table;
  } else {
    out << report["stationary"].dump() << "\n";
  }
  return kOk;
}

int cmd_synth(const RunOptions& o, std::ostream& out) {
  require(o.out, "--out");
  synth::WorldConfig cfg =
      o.world.empty() ? synth::WorldConfig::defaults() : synth::WorldConfig::load(o.world);
  if (o.seed) cfg.seed = *o.seed;
  if (o.persons) cfg.population = *o.persons;
  const auto world = synth::generate(cfg);
  Staging staging;
  synth::write_world(world, staging.dir());
  staging.commit(o.out);
  out << "wrote " << world.records.size() << " records for " << cfg.population << " persons into "
      << o.out << "\n";
  return kOk;
}

void print_error(std::ostream& err, const std::string& code, const std::string& message, int exit,
                 std::optional<long> row = std::nullopt) {
  nlohmann::json j{{"error", code}, {"message", message}, {"exit_code", exit}};
  if (row) j["row"] = *row;
  err << j.dump() << "\n";
}

}  // namespace

int exit_code_for(ErrorCode code, bool has_row) {
  switch (code) {
    case ErrorCode::IoError:
      return kIoError;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidStateSpace:
    case ErrorCode::ConfigInvalid:
    case ErrorCode::ShiftTooLarge:
    case ErrorCode::PlaceboOverlap:
    case ErrorCode::TooFewReplicates:
    case ErrorCode::HorizonOutOfRange:
    case ErrorCode::InvalidPerturbation:
      return kConfigError;
    case ErrorCode::BadQuarterFormat:
      return has_row ? kDataError : kConfigError;
    case ErrorCode::NonConvergence:
    case ErrorCode::AllFitsFailed:
    case ErrorCode::TooManyFailedReplicates:
    case ErrorCode::NotIrreducible:
    case ErrorCode::NotAperiodic:
    case ErrorCode::NonUniqueStationary:
    case ErrorCode::ClosedFormMismatch:
      return kNumericalError;
    default:
      return kDataError;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Labour-market flow estimation and counterfactual policy evaluation", "lmflow"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Plain-text key = value file; keys are the long flag names");

  RunOptions o;
  app.add_option("--input", o.input, "Panel CSV (.csv or .csv.gz)");
  app.add_option("--states", o.states, "Comma-separated state labels")->capture_default_str();
  app.add_option("--window", o.window, "Observation window, e.g. 2016Q1:2018Q3 (ends at t*)");
  app.add_option("--tstar", o.tstar, "Last pre-intervention quarter (must end --window)");
  app.add_option("--true-tstar", o.true_tstar, "Placebo: the real intervention quarter");
  app.add_option("--new-tstar", o.new_tstar, "Shift: the moved intervention quarter");
  app.add_option("--horizon", o.horizon, "Forecast horizon in quarters")->capture_default_str();
  app.add_option("--population", o.population, "Working-age population for head counts");
  app.add_option("--bootstrap", o.bootstrap, "Bootstrap replicates")->capture_default_str();
  app.add_option("--seed", o.seed, "Master seed (bootstrap, or synthetic world)");
  app.add_option("--mode", o.mode, "full_pipeline | fixed_orders | estimation_only")
      ->capture_default_str();
  app.add_option("--filter", o.filter, "Subgroup, e.g. sex=F, age<35, edu=low, region=south")
      ->capture_default_str();
  app.add_option("--young-cutoff", o.young_cutoff, "Age threshold of the 'young' filter")
      ->capture_default_str();
  app.add_option("--weight", o.weight, "Transition weight: destination | origin")
      ->capture_default_str();
  app.add_flag("--all-ages", o.all_ages, "Keep records outside ages 15..64");
  app.add_option("--scale", o.scale, "Forecast scale: logit | raw | alr")->capture_default_str();
  app.add_flag("--seasonal", o.seasonal, "Remove quarter-of-year means before forecasting");
  app.add_flag("--keep-replicates", o.keep_replicates, "Write replicates_effects.csv");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--threads", o.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--matrix", o.matrix, "Equilibrium: matrix file (.csv or .json)");
  app.add_option("--delta", o.delta, "Equilibrium: raise m(T,P) by delta, lowering m(T,T)");
  app.add_option("--world", o.world, "Synth: world configuration file");
  app.add_option("--persons", o.persons, "Synth: override the number of simulated persons");

  auto* estimate = app.add_subcommand("estimate", "Per-quarter shares and matrices of a panel");
  auto* evaluate = app.add_subcommand("evaluate", "Fitted versus forecast effects at t*");
  auto* placebo = app.add_subcommand("placebo", "Effects at a fake t* before the real one");
  auto* shift = app.add_subcommand("shift", "Effects with t* moved by one quarter");
  auto* equil = app.add_subcommand("equilibrium", "Stationary shares and the pi_U derivative");
  auto* synth = app.add_subcommand("synth", "Simulate a rotating panel and its truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "UsageError", e.what(), kConfigError);
    return kConfigError;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(o, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    if (placebo->parsed()) return cmd_placebo(o, out);
    if (shift->parsed()) return cmd_shift(o, out);
    if (equil->parsed()) return cmd_equilibrium(o, out);
    if (synth->parsed()) return cmd_synth(o, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code(), e.row().has_value());
    print_error(err, std::string(to_string(e.code())), e.what(), code, e.row());
    return code;
  } catch (const std::exception& e) {
    print_error(err, "InternalError", e.what(), kNumericalError);
    return kNumericalError;
  }
  return kConfigError;
}

}  // namespace lmflow::cli
