#include "spfit/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spfit/common.hpp"
#include "spfit/harness.hpp"

namespace spfit::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void emit_error(const std::string& kind, const std::string& message) {
  json err;
  err["error"] = kind;
  err["message"] = message;
  std::cerr << err.dump() << std::endl;
}

std::string likelihood_name(Likelihood lik) {
  switch (lik) {
    case Likelihood::Gaussian: return "gaussian";
    case Likelihood::GammaMeanPrecision: return "gamma_mean_precision";
    case Likelihood::SkewNormal: return "skew_normal";
  }
  return "";
}

std::string spatial_name(SpatialEffect sp) {
  switch (sp) {
    case SpatialEffect::None: return "none";
    case SpatialEffect::SpdeGmrf: return "spde_gmrf";
    case SpatialEffect::TpsLowrank: return "tps_lowrank";
  }
  return "";
}

void write_json_file(const std::string& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  return json::parse(read_file(path));
}

// ------------------------------------------------------------------ simulate

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 long seed_override) {
  KvConfig cfg = KvConfig::load(config_path);
  fs::create_directories(out_dir);
  const std::string kind = cfg.str("kind", "sim");

  if (kind == "cpue") {
    CpueConfig cc;
    cc.n_sites = static_cast<int>(cfg.integer("sites", cc.n_sites));
    cc.year_min = static_cast<int>(cfg.integer("year_min", cc.year_min));
    cc.year_max = static_cast<int>(cfg.integer("year_max", cc.year_max));
    cc.obs_per_cell = static_cast<int>(cfg.integer("obs_per_cell", cc.obs_per_cell));
    cc.keep_prob = cfg.num("keep_prob", cc.keep_prob);
    cc.phi = cfg.num("phi", cc.phi);
    cc.seed = static_cast<std::uint64_t>(cfg.integer("seed", static_cast<long>(cc.seed)));
    if (seed_override >= 0) cc.seed = static_cast<std::uint64_t>(seed_override);

    CpueData data = synth_cpue(cc);
    write_dataset_csv(out_dir + "/data.csv", data.raw);
    json truth;
    truth["kind"] = "cpue";
    truth["year_min"] = cc.year_min;
    truth["seed"] = cc.seed;
    truth["phi"] = cc.phi;
    truth["year_effect"] = std::vector<double>(
        data.year_effect_truth.data(),
        data.year_effect_truth.data() + data.year_effect_truth.size());
    truth["site_field"] = std::vector<double>(
        data.site_field_truth.data(),
        data.site_field_truth.data() + data.site_field_truth.size());
    write_json_file(out_dir + "/truth.json", truth);
    cfg.set("kind", "cpue");
    cfg.set("seed", std::to_string(cc.seed));
    cfg.set("factors", "year,season,destine");
    cfg.save(out_dir + "/config.resolved.ini");
  } else if (kind == "sim") {
    SimulationConfig sc;
    sc.n_locations = static_cast<int>(cfg.integer("n_locations", sc.n_locations));
    sc.beta0 = cfg.num("beta0", sc.beta0);
    sc.beta1 = cfg.num("beta1", sc.beta1);
    sc.sigma = cfg.num("sigma", sc.sigma);
    sc.field_kind = cfg.str("field_kind", sc.field_kind);
    sc.field_sigma2 = cfg.num("field_sigma2", sc.field_sigma2);
    sc.field_range = cfg.num("field_range", sc.field_range);
    sc.surface_anchors = static_cast<int>(cfg.integer("surface_anchors", sc.surface_anchors));
    sc.seed = static_cast<std::uint64_t>(cfg.integer("seed", static_cast<long>(sc.seed)));
    sc.n_holdout = static_cast<int>(cfg.integer("n_holdout", sc.n_holdout));
    if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);

    SimulatedData sim = simulate(sc);
    CsvTable raw;
    raw.columns = {"y", "s1", "s2", "x1"};
    raw.data.resize(4);
    for (int i = 0; i < sim.data.n(); ++i) {
      raw.data[0].push_back(sim.data.y[i]);
      raw.data[1].push_back(sim.data.coords(i, 0));
      raw.data[2].push_back(sim.data.coords(i, 1));
      raw.data[3].push_back(sim.data.x(i, 1));
    }
    write_dataset_csv(out_dir + "/data.csv", raw);
    write_file_atomic(out_dir + "/truth.json", sim.truth.to_json() + "\n");
    cfg.set("kind", "sim");
    cfg.set("seed", std::to_string(sc.seed));
    cfg.save(out_dir + "/config.resolved.ini");
  } else {
    fail(ErrorKind::ConfigError, "kind must be sim or cpue");
  }
  std::cout << "wrote " << out_dir << "/data.csv" << std::endl;
  return 0;
}

// ----------------------------------------------------------------------- fit

json summaries_to_json(const std::vector<ParamSummary>& summaries) {
  json arr = json::array();
  for (const auto& s : summaries) {
    json row;
    row["name"] = s.name;
    row["mean"] = s.mean;
    row["p25"] = s.p25;
    row["p75"] = s.p75;
    arr.push_back(row);
  }
  return arr;
}

void write_convergence_csv(const std::string& path,
                           const ConvergenceReport& report) {
  std::ostringstream os;
  os << "name,rhat,ess_bulk\n";
  os.precision(10);
  for (const auto& p : report.parameters) {
    os << csv_quote(p.name) << ',';
    if (p.defined)
      os << p.rhat << ',' << p.ess;
    else
      os << "undefined,undefined";
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

int cmd_fit(const std::string& model, const std::string& data_path,
            const std::string& config_path, const SamplerConfig& sampler,
            const std::string& out_dir, bool strict) {
  KvConfig cfg = config_path.empty() ? KvConfig() : KvConfig::load(config_path);
  if (!fs::exists(data_path))
    fail(ErrorKind::InputNotFound, "data file " + data_path + " does not exist");
  Dataset data = load_dataset_csv(data_path, cfg);
  FitConfig fit_cfg = FitConfig::from_kv(cfg, model);
  BuiltModel built = build_model(fit_cfg, data);
  FitResult result = fit_model(built, sampler);

  fs::create_directories(out_dir);
  save_draws_csv(out_dir + "/draws.csv", result.draws);
  write_convergence_csv(out_dir + "/convergence.csv", result.convergence);

  // fully resolved config next to the outputs
  fit_cfg.apply_to_kv(cfg);
  for (const auto& [key, prior] : built.spec.priors)
    cfg.set("prior." + key, format_prior(prior));
  cfg.set("sampler.chains", std::to_string(sampler.chains));
  cfg.set("sampler.warmup", std::to_string(sampler.warmup));
  cfg.set("sampler.total_iter", std::to_string(sampler.total_iter));
  cfg.set("sampler.adapt_delta", std::to_string(sampler.adapt_delta));
  cfg.set("sampler.max_treedepth", std::to_string(sampler.max_treedepth));
  cfg.set("sampler.seed", std::to_string(sampler.seed));
  cfg.save(out_dir + "/config.resolved.ini");

  write_file_atomic(out_dir + "/data.csv", read_file(data_path));
  fs::path truth_src = fs::path(data_path).parent_path() / "truth.json";
  if (fs::exists(truth_src))
    write_file_atomic(out_dir + "/truth.json", read_file(truth_src.string()));

  json summary;
  summary["model"] = model;
  summary["likelihood"] = likelihood_name(built.spec.likelihood);
  summary["spatial"] = spatial_name(built.spec.spatial);
  summary["transform"] =
      built.spec.transform == ResponseTransform::Sqrt ? "sqrt" : "identity";
  summary["n_obs"] = built.posterior.n_obs();
  summary["dim"] = built.posterior.dim();
  summary["spatial_dim"] = built.posterior.spatial_dim();
  summary["sampler"] = {
      {"chains", sampler.chains},         {"warmup", sampler.warmup},
      {"total_iter", sampler.total_iter}, {"adapt_delta", sampler.adapt_delta},
      {"max_treedepth", sampler.max_treedepth}, {"seed", sampler.seed}};
  summary["wall_seconds"] = result.draws.wall_seconds;
  summary["total_wall_seconds"] = result.total_wall_seconds;
  summary["divergences"] = result.divergences;
  summary["rhat"] = result.convergence.max_rhat;
  summary["min_ess"] = result.convergence.min_ess;
  summary["efficiency"] = result.convergence.efficiency;
  summary["summaries"] = summaries_to_json(result.summaries);
  summary["data_file"] = "data.csv";
  if (built.spec.transform == ResponseTransform::Sqrt)
    summary["jacobian_sqrt"] = jacobian_sqrt_correction(data.y);
  write_json_file(out_dir + "/summary.json", summary);

  std::cout << "fit " << model << ": n=" << built.posterior.n_obs()
            << " dim=" << built.posterior.dim()
            << " rhat=" << result.convergence.max_rhat
            << " min_ess=" << result.convergence.min_ess
            << " divergences=" << result.divergences
            << " wall=" << result.total_wall_seconds << "s" << std::endl;

  if (strict && !(result.convergence.max_rhat < 1.05)) {
    emit_error("ConvergenceFailure",
               "max rhat " + std::to_string(result.convergence.max_rhat));
    return 4;
  }
  return 0;
}

// ------------------------------------------------------------------ fit dirs

struct LoadedFit {
  KvConfig config;
  Dataset data;
  BuiltModel model;
  DrawMatrix draws;
  json summary;
  bool has_truth = false;
  TruthRecord truth;
};

LoadedFit load_fit(const std::string& dir) {
  if (!fs::exists(dir + "/summary.json"))
    fail(ErrorKind::InputNotFound, dir + " is not a fit directory");
  LoadedFit fit;
  fit.summary = read_json_file(dir + "/summary.json");
  fit.config = KvConfig::load(dir + "/config.resolved.ini");
  fit.data = load_dataset_csv(dir + "/data.csv", fit.config);
  fit.model = build_model(
      FitConfig::from_kv(fit.config, fit.config.require("model")), fit.data);
  fit.draws = load_draws_csv(dir + "/draws.csv");
  if (fit.draws.dim() != fit.model.posterior.dim())
    fail(ErrorKind::ConfigError, "draws do not match rebuilt model in " + dir);
  if (fs::exists(dir + "/truth.json")) {
    json t = read_json_file(dir + "/truth.json");
    if (!t.contains("kind")) {  // simulation truth only
      fit.truth = TruthRecord::from_json(t.dump());
      fit.has_truth = true;
    }
  }
  return fit;
}

// ------------------------------------------------------------------ diagnose

int cmd_diagnose(const std::string& fit_dir) {
  LoadedFit fit = load_fit(fit_dir);
  const double wall = fit.summary.value("total_wall_seconds", 0.0);
  ConvergenceReport report = convergence_report(fit.draws, wall);
  write_convergence_csv(fit_dir + "/convergence.csv", report);
  json j;
  j["rhat"] = report.max_rhat;
  j["ess_bulk"] = report.min_ess;
  j["min_ess"] = report.min_ess;
  j["efficiency"] = report.efficiency;
  write_json_file(fit_dir + "/diagnostics.json", j);
  std::cout << j.dump() << std::endl;
  return 0;
}

// ----------------------------------------------------------------------- ppd

int cmd_ppd(const std::string& fit_dir, int reps, long seed) {
  LoadedFit fit = load_fit(fit_dir);
  PpdSummary ppd = posterior_predictive(fit.model.posterior, fit.draws, reps,
                                        static_cast<std::uint64_t>(seed));
  std::ostringstream os;
  os.precision(10);
  os << "rep";
  for (int i = 0; i < ppd.replicates.cols(); ++i) os << ",y" << i;
  os << '\n';
  for (int r = 0; r < ppd.replicates.rows(); ++r) {
    os << r;
    for (int i = 0; i < ppd.replicates.cols(); ++i) os << ',' << ppd.replicates(r, i);
    os << '\n';
  }
  write_file_atomic(fit_dir + "/ppd.csv", os.str());
  json j;
  j["mean_data"] = ppd.mean_data;
  j["sd_data"] = ppd.sd_data;
  j["mean_ppd"] = ppd.mean_ppd;
  j["sd_ppd"] = ppd.sd_ppd;
  j["n_rep"] = reps;
  write_json_file(fit_dir + "/ppd_summary.json", j);
  std::cout << j.dump() << std::endl;
  return 0;
}

// ------------------------------------------------------------------- compare

int cmd_compare(const std::vector<std::string>& fit_dirs, bool jacobian,
                const std::string& out_dir) {
  std::vector<LooReport> reports;
  std::vector<std::string> labels;
  std::vector<double> walls;
  for (const auto& dir : fit_dirs) {
    LoadedFit fit = load_fit(dir);
    Eigen::MatrixXd ll =
        pointwise_loglik_matrix(fit.model.posterior, fit.draws, jacobian);
    reports.push_back(psis_loo(ll));
    labels.push_back(fs::path(dir).filename().string());
    walls.push_back(fit.summary.value("total_wall_seconds", 0.0));
  }
  auto rows = loo_compare(reports, labels);
  for (auto& row : rows)
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == row.label) row.wall_seconds = walls[i];

  std::ostringstream csv;
  csv.precision(10);
  csv << "model,elpd_loo,p_loo,elpd_diff,se_diff,pareto_k_max,wall_seconds\n";
  for (const auto& row : rows)
    csv << csv_quote(row.label) << ',' << row.elpd_loo << ',' << row.p_loo << ','
        << row.elpd_diff << ',' << row.se_diff << ',' << row.khat_max << ','
        << row.wall_seconds << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file_atomic(out_dir + "/loo_compare.csv", csv.str());
    json j = json::array();
    for (const auto& row : rows) {
      json r;
      r["model"] = row.label;
      r["elpd_loo"] = row.elpd_loo;
      r["p_loo"] = row.p_loo;
      r["elpd_diff"] = row.elpd_diff;
      r["se_diff"] = row.se_diff;
      r["pareto_k_max"] = row.khat_max;
      j.push_back(r);
    }
    write_json_file(out_dir + "/loo_compare.json", j);
  }
  // Table-4 style output
  std::cout << "| model | p_loo | elpd_diff | se_diff | time (s) |\n";
  std::cout << "|-------|-------|-----------|---------|----------|\n";
  char buffer[256];
  for (const auto& row : rows) {
    std::snprintf(buffer, sizeof(buffer), "| %s | %.2f | %.2f | %.2f | %.2f |",
                  row.label.c_str(), row.p_loo, row.elpd_diff, row.se_diff,
                  row.wall_seconds);
    std::cout << buffer << '\n';
  }
  return 0;
}

// ------------------------------------------------------------------- predict

int cmd_predict(const std::string& fit_dir, int grid) {
  LoadedFit fit = load_fit(fit_dir);
  PredictionResult pred = predict_surface(
      fit.model, fit.draws, fit.has_truth ? &fit.truth : nullptr, grid);
  std::ostringstream os;
  os.precision(10);
  os << "s1,s2,spatial_effect\n";
  for (int r = 0; r < pred.grid.rows(); ++r)
    os << pred.grid(r, 0) << ',' << pred.grid(r, 1) << ',' << pred.grid(r, 2)
       << '\n';
  write_file_atomic(fit_dir + "/predictions.csv", os.str());
  json j;
  j["grid_resolution"] = grid;
  if (pred.has_holdout)
    j["rmse_standardized"] = pred.rmse;
  else
    j["rmse_standardized"] = nullptr;
  write_json_file(fit_dir + "/prediction.json", j);
  std::cout << j.dump() << std::endl;
  return 0;
}

// -------------------------------------------------------------------- report

int cmd_report(const std::string& experiments_dir, const std::string& out_dir) {
  if (!fs::exists(experiments_dir))
    fail(ErrorKind::InputNotFound, experiments_dir + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(experiments_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "summary.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    fail(ErrorKind::InputNotFound, "no fit directories under " + experiments_dir);

  std::ostringstream table_csv, table_md, eff_csv;
  table_csv << "fit,model,n_obs,parameter,truth,mean,p25,p75,rel_error,wall_seconds\n";
  table_md << "| fit | model | n | parameter | truth | mean | p25 | p75 | R.error | time (s) |\n"
           << "|-----|-------|---|-----------|-------|------|-----|-----|---------|----------|\n";
  eff_csv << "fit,model,n_obs,min_ess,wall_seconds,efficiency,log_efficiency\n";
  table_csv.precision(10);
  eff_csv.precision(10);

  for (const auto& dir : dirs) {
    json summary = read_json_file((dir / "summary.json").string());
    const std::string label = dir.filename().string();
    const std::string model = summary.value("model", "");
    const int n_obs = summary.value("n_obs", 0);
    const double wall = summary.value("total_wall_seconds", 0.0);
    const double min_ess = summary.value("min_ess", 0.0);
    const double eff = summary.value("efficiency", 0.0);
    eff_csv << label << ',' << model << ',' << n_obs << ',' << min_ess << ','
            << wall << ',' << eff << ',' << (eff > 0 ? std::log(eff) : 0.0)
            << '\n';

    if (!fs::exists(dir / "truth.json")) continue;
    json truth = read_json_file((dir / "truth.json").string());
    if (truth.contains("kind")) continue;  // cpue truth has no beta rows
    const std::map<std::string, double> truths = {
        {"beta[intercept]", truth.value("beta0", 0.0)},
        {"beta[x1]", truth.value("beta1", 0.0)},
        {"sigma", truth.value("sigma", 0.0)}};
    for (const auto& s : summary["summaries"]) {
      const std::string name = s["name"];
      auto it = truths.find(name);
      if (it == truths.end()) continue;
      const double mean = s["mean"], p25 = s["p25"], p75 = s["p75"];
      const double rel = std::abs(it->second - mean);
      table_csv << label << ',' << model << ',' << n_obs << ',' << name << ','
                << it->second << ',' << mean << ',' << p25 << ',' << p75 << ','
                << rel << ',' << wall << '\n';
      char buffer[256];
      std::snprintf(buffer, sizeof(buffer),
                    "| %s | %s | %d | %s | %.2f | %.2f | %.2f | %.2f | %.2f | %.1f |",
                    label.c_str(), model.c_str(), n_obs, name.c_str(),
                    it->second, mean, p25, p75, rel, wall);
      table_md << buffer << '\n';
    }
  }
  const std::string out = out_dir.empty() ? experiments_dir : out_dir;
  fs::create_directories(out);
  write_file_atomic(out + "/table1.csv", table_csv.str());
  write_file_atomic(out + "/table1.md", table_md.str());
  write_file_atomic(out + "/efficiency.csv", eff_csv.str());
  std::cout << "wrote " << out << "/table1.md" << std::endl;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Bayesian spatial models with SPDE-GMRF and low-rank TPS effects"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a dataset");
  std::string sim_config, sim_out;
  long sim_seed = -1;
  sim->add_option("--config", sim_config)->required();
  sim->add_option("--out", sim_out)->required();
  sim->add_option("--seed", sim_seed);

  // fit
  auto* fit = app.add_subcommand("fit", "fit a model with the NUTS sampler");
  std::string fit_model_name, fit_data, fit_config, fit_out = "fit";
  SamplerConfig sampler;
  bool paper_scale = false, strict = false, sequential = false;
  fit->add_option("--model", fit_model_name)->required();
  fit->add_option("--data", fit_data)->required();
  fit->add_option("--config", fit_config);
  fit->add_option("--out", fit_out);
  fit->add_option("--chains", sampler.chains);
  fit->add_option("--warmup", sampler.warmup);
  fit->add_option("--iter", sampler.total_iter);
  fit->add_option("--adapt-delta", sampler.adapt_delta);
  fit->add_option("--max-treedepth", sampler.max_treedepth);
  std::uint64_t fit_seed = 1;
  fit->add_option("--seed", fit_seed);
  fit->add_flag("--paper-scale", paper_scale, "use the full 4500 iterations");
  fit->add_flag("--strict", strict, "exit 4 when rhat >= 1.05");
  fit->add_flag("--sequential", sequential, "run chains sequentially");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "convergence report for a fit");
  std::string diag_fit;
  diag->add_option("--fit", diag_fit)->required();

  // ppd
  auto* ppd = app.add_subcommand("ppd", "posterior predictive replicates");
  std::string ppd_fit;
  int ppd_reps = 100;
  long ppd_seed = 7;
  ppd->add_option("--fit", ppd_fit)->required();
  ppd->add_option("--reps", ppd_reps);
  ppd->add_option("--seed", ppd_seed);

  // compare
  auto* cmp = app.add_subcommand("compare", "PSIS-LOO model comparison");
  std::vector<std::string> cmp_fits;
  std::string cmp_out;
  bool no_jacobian = false;
  cmp->add_option("--fits", cmp_fits)->required()->expected(-1);
  cmp->add_option("--out", cmp_out);
  cmp->add_flag("--no-jacobian", no_jacobian,
                "skip the sqrt-transform Jacobian correction");

  // predict
  auto* pred = app.add_subcommand("predict", "posterior-mean surface prediction");
  std::string pred_fit;
  int pred_grid = 25;
  pred->add_option("--fit", pred_fit)->required();
  pred->add_option("--grid", pred_grid);

  // report
  auto* rep = app.add_subcommand("report", "aggregate experiment tables");
  std::string rep_dir, rep_out;
  rep->add_option("--experiments", rep_dir)->required();
  rep->add_option("--out", rep_out);

  std::vector<std::string> argv_vec = args;
  std::vector<char*> argv;
  std::string prog = "spfit";
  argv.push_back(prog.data());
  for (auto& a : argv_vec) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help() << std::endl;
      return 0;
    }
    emit_error("ConfigError", e.what());
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_seed);
    if (fit->parsed()) {
      if (paper_scale) sampler.total_iter = 4500;
      sampler.seed = fit_seed;
      sampler.parallel_chains = !sequential;
      return cmd_fit(fit_model_name, fit_data, fit_config, sampler, fit_out,
                     strict);
    }
    if (diag->parsed()) return cmd_diagnose(diag_fit);
    if (ppd->parsed()) return cmd_ppd(ppd_fit, ppd_reps, ppd_seed);
    if (cmp->parsed()) return cmd_compare(cmp_fits, !no_jacobian, cmp_out);
    if (pred->parsed()) return cmd_predict(pred_fit, pred_grid);
    if (rep->parsed()) return cmd_report(rep_dir, rep_out);
  } catch (const Error& e) {
    emit_error(to_string(e.kind()), e.what());
    return is_input_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    emit_error("Unhandled", e.what());
    return 3;
  }
  emit_error("ConfigError", "no subcommand given");
  return 2;
}

}  // namespace spfit::cli
