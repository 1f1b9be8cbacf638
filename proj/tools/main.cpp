// Command line front end: estimators, chain-rule suite verification, chaining
// experiments and bound calculators, all emitting reproducible JSON or CSV.
#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gchain/bounds.hpp"
#include "gchain/chain_rule.hpp"
#include "gchain/chaining.hpp"
#include "gchain/errors.hpp"
#include "gchain/function_class.hpp"
#include "gchain/gaussian_average.hpp"
#include "gchain/io.hpp"
#include "gchain/point_set.hpp"
#include "gchain/random.hpp"

namespace {

using gchain::GaussianStream;
using ordered_json = nlohmann::ordered_json;

struct RunConfig {
  std::uint64_t seed = 0;
  std::int64_t mc_budget = 100000;
  std::int64_t trials = 10000;
  double sigma_slack = 4.0;
  double ratio_r = 2.0;
  std::string output_format = "json";
};

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["mc_budget"] = cfg.mc_budget;
  j["trials"] = cfg.trials;
  j["sigma_slack"] = cfg.sigma_slack;
  j["ratio_r"] = cfg.ratio_r;
  j["output_format"] = cfg.output_format;
  return j;
}

std::string config_csv_line(const RunConfig& cfg) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# seed=" << cfg.seed << " mc_budget=" << cfg.mc_budget
      << " trials=" << cfg.trials << " sigma_slack=" << cfg.sigma_slack
      << " ratio_r=" << cfg.ratio_r << " format=" << cfg.output_format;
  return out.str();
}

// One read per input file; the bytes feed both the parser and the hash that
// the output embeds.
struct LoadedFile {
  std::string path;
  std::string bytes;
  std::string hash;
};

LoadedFile load_file(const std::string& path) {
  LoadedFile f;
  f.path = path;
  f.bytes = gchain::read_text_file(path);
  f.hash = gchain::content_hash(f.bytes);
  return f;
}

ordered_json inputs_json(const std::vector<LoadedFile>& files) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : files) {
    ordered_json j;
    j["path"] = f.path;
    j["hash"] = f.hash;
    arr.push_back(std::move(j));
  }
  return arr;
}

gchain::PointSet parse_point_file(const LoadedFile& f) {
  const auto pos = f.bytes.find_first_not_of(" \t\r\n");
  if (pos != std::string::npos && f.bytes[pos] == '{')
    return gchain::point_set_from_json(f.bytes);
  return gchain::point_set_from_csv(f.bytes);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    gchain::write_text_file(out_path, text);
}

std::string csv_envelope(const std::string& command, const RunConfig& cfg,
                         const std::vector<LoadedFile>& files, const std::string& table) {
  std::string out = "# command=" + command + "\n" + config_csv_line(cfg) + "\n";
  for (const auto& f : files) out += "# input " + f.path + " " + f.hash + "\n";
  return out + table;
}

std::string json_envelope(const std::string& command, const RunConfig& cfg,
                          const std::vector<LoadedFile>& files, ordered_json payload) {
  ordered_json j;
  j["command"] = command;
  j["config"] = config_json(cfg);
  j["inputs"] = inputs_json(files);
  for (auto& [key, value] : payload.items()) j[key] = std::move(value);
  return j.dump(2) + "\n";
}

std::string fixed(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

// ---- estimate ------------------------------------------------------------

int cmd_estimate(const RunConfig& cfg, const std::string& kind,
                 const std::vector<std::string>& paths, const std::string& out_path) {
  std::vector<LoadedFile> files;
  ordered_json rows = ordered_json::array();
  std::string table = "input,kind,value,std_error,samples,seed,stream_id\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    files.push_back(load_file(paths[i]));
    const auto stream_id = static_cast<std::uint32_t>(i);
    gchain::McEstimate est;
    est.seed = cfg.seed;
    est.stream_id = stream_id;
    if (kind == "G") {
      const auto y = parse_point_file(files.back());
      est = gchain::estimate_gaussian_average(y, cfg.mc_budget,
                                              GaussianStream{cfg.seed, stream_id});
    } else if (kind == "D") {
      const auto y = parse_point_file(files.back());
      est.value = gchain::diameter(y);
    } else if (kind == "L") {
      const auto f = gchain::tabulated_from_json(files.back().bytes);
      est.value = gchain::lipschitz_constant(f, f.bound_points);
    } else {
      const auto f = gchain::tabulated_from_json(files.back().bytes);
      est = gchain::estimate_quotient_average(f, f.bound_points, cfg.mc_budget,
                                              GaussianStream{cfg.seed, stream_id});
    }
    ordered_json row;
    row["input"] = paths[i];
    row["kind"] = kind;
    row["value"] = est.value;
    row["std_error"] = est.std_error;
    row["samples"] = est.samples;
    row["seed"] = est.seed;
    row["stream_id"] = est.stream_id;
    rows.push_back(std::move(row));
    table += paths[i] + "," + kind + "," + fixed(est.value) + "," + fixed(est.std_error) +
             "," + std::to_string(est.samples) + "," + std::to_string(est.seed) + "," +
             std::to_string(est.stream_id) + "\n";
  }
  ordered_json payload;
  payload["kind"] = kind;
  payload["rows"] = std::move(rows);
  emit(out_path, cfg.output_format == "csv"
                     ? csv_envelope("estimate", cfg, files, table)
                     : json_envelope("estimate", cfg, files, std::move(payload)));
  return 0;
}

// ---- verify-chain --------------------------------------------------------

int cmd_verify_chain(const RunConfig& cfg, const std::string& suite_path,
                     const std::string& out_path, const std::string& suite_out) {
  std::vector<LoadedFile> files{load_file(suite_path)};
  int count = 30;
  auto kind = gchain::InstanceKind::generic;
  std::string kind_name = "generic";
  gchain::InstanceShape shape;
  try {
    const auto j = ordered_json::parse(files[0].bytes);
    if (j.contains("count")) count = j.at("count").get<int>();
    if (j.contains("kind")) {
      kind_name = j.at("kind").get<std::string>();
      if (kind_name == "generic")
        kind = gchain::InstanceKind::generic;
      else if (kind_name == "one_point")
        kind = gchain::InstanceKind::one_point;
      else if (kind_name == "one_function")
        kind = gchain::InstanceKind::one_function;
      else
        throw gchain::parse_error("suite config: unknown kind '" + kind_name + "'");
    }
    if (j.contains("n_points")) shape.n_points = j.at("n_points").get<int>();
    if (j.contains("in_dim")) shape.in_dim = j.at("in_dim").get<int>();
    if (j.contains("members")) shape.members = j.at("members").get<int>();
    if (j.contains("out_dim")) shape.out_dim = j.at("out_dim").get<int>();
    if (j.contains("radius")) shape.radius = j.at("radius").get<double>();
    if (j.contains("lip_cap")) shape.lip_cap = j.at("lip_cap").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw gchain::parse_error(std::string("suite config: ") + e.what());
  }
  if (count < 1) throw gchain::invariant_error("suite config: count must be positive");

  std::vector<gchain::ChainTerms> suite;
  suite.reserve(count);
  for (int i = 0; i < count; ++i) {
    GaussianStream stream{cfg.seed, static_cast<std::uint32_t>(i)};
    const auto inst = gchain::make_chain_instance(shape, kind, stream);
    suite.push_back(gchain::chain_terms(inst.f, inst.y, 0, cfg.mc_budget, stream));
  }
  const auto fit = gchain::fit_constants(suite);
  if (!suite_out.empty()) gchain::write_text_file(suite_out, gchain::suite_to_json_lines(suite));

  // property assertions; a violated one dumps the offending record and exits 4
  int violating = -1;
  std::string violated;
  if (!gchain::constraints_hold(suite, fit)) {
    violated = "fitted constraint";
    for (std::size_t i = 0; i < suite.size() && violating < 0; ++i)
      if (suite[i].lhs.value >
          gchain::constraint_bound_side(suite[i], fit.c1, fit.c2))
        violating = static_cast<int>(i);
  } else if (kind == gchain::InstanceKind::one_point) {
    for (std::size_t i = 0; i < suite.size() && violating < 0; ++i)
      if (suite[i].lhs.value != suite[i].base.value ||
          suite[i].lhs.std_error != suite[i].base.std_error) {
        violated = "one-point image average must equal the base average exactly";
        violating = static_cast<int>(i);
      }
  } else if (kind == gchain::InstanceKind::one_function) {
    for (std::size_t i = 0; i < suite.size() && violating < 0; ++i) {
      const auto& t = suite[i];
      const double slack = cfg.sigma_slack *
                           (t.lhs.std_error + t.l_f * t.g_y.std_error + t.base.std_error);
      if (t.lhs.value > t.l_f * t.g_y.value + t.base.value + slack) {
        violated = "single-member class must contract";
        violating = static_cast<int>(i);
      }
    }
  }
  if (!violated.empty()) {
    std::cerr << "assertion failed: " << violated << "\n"
              << "instance " << violating << ": "
              << gchain::chain_terms_to_json(suite[violating]) << "\n";
    return 4;
  }

  ordered_json payload;
  payload["suite"] = ordered_json::object(
      {{"count", count}, {"kind", kind_name}, {"records", suite_out}});
  payload["fit"] = ordered_json::parse(gchain::fit_to_json(fit));
  std::string table = "c1,c2,instances,binding_instance,dropped\n" + fixed(fit.c1) + "," +
                      fixed(fit.c2) + "," + std::to_string(fit.instances) + "," +
                      std::to_string(fit.binding_instance) + "," +
                      std::to_string(fit.dropped.size()) + "\n";
  emit(out_path, cfg.output_format == "csv"
                     ? csv_envelope("verify-chain", cfg, files, table)
                     : json_envelope("verify-chain", cfg, files, std::move(payload)));
  return 0;
}

// ---- chaining ------------------------------------------------------------

int cmd_chaining(const RunConfig& cfg, const std::string& point_path, double k_factor,
                 double delta, int max_depth, int quadrature, const std::string& out_path) {
  std::vector<LoadedFile> files{load_file(point_path)};
  const auto y = parse_point_file(files[0]);
  auto tree = gchain::build_partition_tree(y, cfg.ratio_r, max_depth, 0);

  const double functional = gchain::chaining_functional(tree);
  const double explicit_bound = gchain::explicit_esup_bound(tree, k_factor, quadrature);
  const auto mc = gchain::estimate_gaussian_average(y, cfg.mc_budget,
                                                    GaussianStream{cfg.seed, 0});
  gchain::SubgaussianSpec spec;
  spec.kind = gchain::SubgaussianSpec::Kind::canonical_gaussian;
  spec.k_factor = k_factor;
  const double exceedance = gchain::empirical_claim9_check(
      y, spec, tree, delta, cfg.trials, GaussianStream{cfg.seed, 1});
  const auto thresholds = gchain::claim9_thresholds(tree, k_factor, delta);

  const double binom_sigma =
      std::sqrt(delta * (1.0 - delta) / static_cast<double>(cfg.trials));
  ordered_json tree_stats;
  tree_stats["depth"] = tree.depth();
  tree_stats["k0"] = tree.k0;
  ordered_json cells = ordered_json::array();
  for (const auto& level : tree.levels) cells.push_back(level.size());
  tree_stats["cells_per_level"] = std::move(cells);

  ordered_json payload;
  payload["points"] = y.size();
  payload["tree"] = std::move(tree_stats);
  payload["functional"] = functional;
  payload["explicit_bound"] = explicit_bound;
  payload["mc_estimate"] = ordered_json::object({{"value", mc.value},
                                                 {"std_error", mc.std_error},
                                                 {"samples", mc.samples},
                                                 {"seed", mc.seed},
                                                 {"stream_id", mc.stream_id}});
  payload["claim9"] = ordered_json::object({{"delta", delta},
                                            {"k_factor", k_factor},
                                            {"trials", cfg.trials},
                                            {"exceedance", exceedance},
                                            {"threshold_sup", thresholds.sup}});
  std::string table =
      "points,depth,k0,functional,explicit_bound,mc_value,mc_std_error,exceedance,delta\n" +
      std::to_string(y.size()) + "," + std::to_string(tree.depth()) + "," +
      std::to_string(tree.k0) + "," + fixed(functional) + "," + fixed(explicit_bound) +
      "," + fixed(mc.value) + "," + fixed(mc.std_error) + "," + fixed(exceedance) + "," +
      fixed(delta) + "\n";
  emit(out_path, cfg.output_format == "csv"
                     ? csv_envelope("chaining", cfg, files, table)
                     : json_envelope("chaining", cfg, files, std::move(payload)));

  if (y.size() > 1 && exceedance >= delta + cfg.sigma_slack * binom_sigma) {
    std::cerr << "assertion failed: exceedance " << exceedance
              << " is not below delta + slack = " << delta + cfg.sigma_slack * binom_sigma
              << "\n";
    return 4;
  }
  return 0;
}

// ---- bounds --------------------------------------------------------------

ordered_json report_json(const gchain::BoundReport& report) {
  return ordered_json::parse(gchain::bound_report_to_json(report));
}

int cmd_bounds(const RunConfig& cfg, const std::string& sub, const std::string& spec_path,
               double delta, const std::vector<int>& task_grid, const std::string& out_path) {
  std::vector<LoadedFile> files{load_file(spec_path)};
  ordered_json payload;
  std::string table;
  if (sub == "risk") {
    const auto input = gchain::risk_input_from_json(files[0].bytes);
    gchain::BoundReport report;
    report.total = gchain::theorem1_bound(input);
    report.terms.push_back({"empirical_mean", input.empirical_mean, "input"});
    report.terms.push_back({"g_hat", input.g_hat, "input"});
    report.terms.push_back(
        {"sample_size", static_cast<double>(input.n), "input"});
    report.terms.push_back({"delta", input.delta, "input"});
    report.notes.push_back("total is the high-probability bound on the population mean");
    payload["report"] = report_json(report);
    table = gchain::bound_report_to_csv(report);
  } else if (sub == "two-layer") {
    const auto spec = gchain::two_layer_spec_from_json(files[0].bytes);
    const auto report = gchain::two_layer_bound(spec, delta);
    payload["delta"] = delta;
    payload["report"] = report_json(report);
    table = gchain::bound_report_to_csv(report);
  } else if (sub == "multitask") {
    const auto spec = gchain::two_layer_spec_from_json(files[0].bytes);
    payload["delta"] = delta;
    ordered_json reports = ordered_json::array();
    table = "tasks,name,value\n";
    for (int tasks : task_grid) {
      const auto report = gchain::multitask_bound(spec, tasks, delta);
      ordered_json entry;
      entry["tasks"] = tasks;
      entry["report"] = report_json(report);
      reports.push_back(std::move(entry));
      for (const auto& t : report.terms)
        table += std::to_string(tasks) + "," + t.name + "," + fixed(t.value) + "\n";
      table += std::to_string(tasks) + ",total," + fixed(report.total) + "\n";
    }
    payload["reports"] = std::move(reports);
  } else {
    const auto spec = gchain::deep_spec_from_json(files[0].bytes);
    const auto report = gchain::deep_iterated_bound(spec.layers, spec.c1, spec.c2);
    payload["report"] = report_json(report);
    table = gchain::bound_report_to_csv(report);
  }
  emit(out_path, cfg.output_format == "csv"
                     ? csv_envelope("bounds " + sub, cfg, files, table)
                     : json_envelope("bounds " + sub, cfg, files, std::move(payload)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian complexity estimators, chain-rule verification and bound calculators"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string config_path;
  std::uint64_t flag_seed = 0;
  std::int64_t flag_budget = 0;
  std::int64_t flag_trials = 0;
  double flag_slack = 0.0;
  double flag_ratio = 0.0;
  std::string flag_format;
  std::string out_path;
  auto* opt_config = app.add_option("--config", config_path, "JSON config file; flags win");
  auto* opt_seed = app.add_option("--seed", flag_seed, "master seed (default 0)");
  auto* opt_budget =
      app.add_option("--budget", flag_budget, "Monte Carlo budget (default 100000)")
          ->check(CLI::PositiveNumber);
  auto* opt_trials = app.add_option("--trials", flag_trials, "tail trials (default 10000)")
                         ->check(CLI::PositiveNumber);
  auto* opt_slack =
      app.add_option("--slack", flag_slack, "sigma multiplier for assertions (default 4)")
          ->check(CLI::PositiveNumber);
  auto* opt_ratio = app.add_option("--ratio", flag_ratio, "partition scale ratio (default 2)");
  auto* opt_format = app.add_option("--format", flag_format, "output format")
                         ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", out_path, "write the report here instead of stdout");

  auto* est = app.add_subcommand("estimate", "estimate G, R, D or L for each input file");
  std::string est_kind;
  std::vector<std::string> est_inputs;
  est->add_option("kind", est_kind, "quantity to estimate")
      ->required()
      ->check(CLI::IsMember({"G", "R", "D", "L"}));
  est->add_option("inputs", est_inputs, "point set files (G, D) or class files (R, L)")
      ->required();

  auto* verify = app.add_subcommand("verify-chain", "measure a random suite and fit constants");
  std::string suite_config;
  std::string suite_out;
  verify->add_option("suite_config", suite_config, "suite configuration file")->required();
  verify->add_option("--suite-out", suite_out, "also write the measured suite here");

  auto* chain = app.add_subcommand("chaining", "partition tree experiment on a point set");
  std::string chain_points;
  double chain_k = 1.0;
  double chain_delta = 0.1;
  int chain_depth = 48;
  int chain_quadrature = 512;
  chain->add_option("points", chain_points, "point set file")->required();
  chain->add_option("--k-factor", chain_k, "subgaussian tail factor (default 1)");
  chain->add_option("--delta", chain_delta, "failure probability (default 0.1)");
  chain->add_option("--max-depth", chain_depth, "partition depth cap (default 48)");
  chain->add_option("--quadrature", chain_quadrature, "quadrature points (default 512)");

  auto* bounds = app.add_subcommand("bounds", "evaluate a closed-form bound from a spec file");
  std::string bounds_sub;
  std::string bounds_spec;
  double bounds_delta = 0.05;
  std::vector<int> bounds_tasks{1};
  bounds->add_option("calculator", bounds_sub, "risk, two-layer, multitask or deep")
      ->required()
      ->check(CLI::IsMember({"risk", "two-layer", "multitask", "deep"}));
  bounds->add_option("spec", bounds_spec, "bound spec file")->required();
  bounds->add_option("--delta", bounds_delta, "confidence level (default 0.05)");
  bounds->add_option("--tasks", bounds_tasks, "task counts for the multitask grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*opt_config) {
      const auto text = gchain::read_text_file(config_path);
      try {
        const auto j = ordered_json::parse(text);
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("mc_budget")) cfg.mc_budget = j.at("mc_budget").get<std::int64_t>();
        if (j.contains("trials")) cfg.trials = j.at("trials").get<std::int64_t>();
        if (j.contains("sigma_slack")) cfg.sigma_slack = j.at("sigma_slack").get<double>();
        if (j.contains("ratio_r")) cfg.ratio_r = j.at("ratio_r").get<double>();
        if (j.contains("output_format"))
          cfg.output_format = j.at("output_format").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw gchain::parse_error(std::string("config file: ") + e.what());
      }
    }
    if (*opt_seed) cfg.seed = flag_seed;
    if (*opt_budget) cfg.mc_budget = flag_budget;
    if (*opt_trials) cfg.trials = flag_trials;
    if (*opt_slack) cfg.sigma_slack = flag_slack;
    if (*opt_ratio) cfg.ratio_r = flag_ratio;
    if (*opt_format) cfg.output_format = flag_format;
    if (cfg.mc_budget < 2) throw gchain::invariant_error("mc_budget must be at least 2");
    if (cfg.trials < 1) throw gchain::invariant_error("trials must be positive");
    if (cfg.sigma_slack <= 0.0) throw gchain::invariant_error("sigma_slack must be positive");
    if (!(cfg.ratio_r >= 2.0)) throw gchain::invariant_error("ratio_r must be at least 2");
    if (cfg.output_format != "csv" && cfg.output_format != "json")
      throw gchain::invariant_error("output_format must be csv or json");

    if (app.got_subcommand(est)) return cmd_estimate(cfg, est_kind, est_inputs, out_path);
    if (app.got_subcommand(verify))
      return cmd_verify_chain(cfg, suite_config, out_path, suite_out);
    if (app.got_subcommand(chain))
      return cmd_chaining(cfg, chain_points, chain_k, chain_delta, chain_depth,
                          chain_quadrature, out_path);
    return cmd_bounds(cfg, bounds_sub, bounds_spec, bounds_delta, bounds_tasks, out_path);
  } catch (const gchain::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const gchain::invariant_error& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  }
}
