#include "spfit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spfit/common.hpp"

namespace spfit {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i];
  return v;
}

json points_to_json(const PointSet2D& p) {
  json arr = json::array();
  for (int i = 0; i < p.rows(); ++i) arr.push_back({p(i, 0), p(i, 1)});
  return arr;
}

PointSet2D points_from_json(const json& arr) {
  PointSet2D p(arr.size(), 2);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    p(static_cast<int>(i), 0) = arr[i][0];
    p(static_cast<int>(i), 1) = arr[i][1];
  }
  return p;
}

PointSet2D uniform_points(Rng& rng, int n) {
  PointSet2D pts(n, 2);
  for (int i = 0; i < n; ++i) {
    pts(i, 0) = rng.uniform();
    pts(i, 1) = rng.uniform();
  }
  return pts;
}

// Matern nu=1 field over arbitrary points by dense covariance Cholesky.
Eigen::VectorXd draw_matern_field(Rng& rng, const PointSet2D& pts, double sigma2,
                                  double range) {
  const int n = static_cast<int>(pts.rows());
  MaternParams mp{sigma2, std::sqrt(8.0) / range, 1.0};
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    cov(i, i) = sigma2 + 1e-10 * sigma2;
    for (int j = i + 1; j < n; ++j) {
      double v = matern_cov((pts.row(i) - pts.row(j)).norm(), mp);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "field covariance not PD");
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  return llt.matrixL() * z;
}

}  // namespace

SimulatedData simulate(const SimulationConfig& config) {
  if (config.n_locations < 10)
    fail(ErrorKind::ConfigError, "n_locations must be at least 10");
  if (!(config.sigma >= 0.0))
    fail(ErrorKind::ConfigError, "sigma must be nonnegative");
  Rng rng(config.seed);

  const int n = config.n_locations;
  const int total = n + config.n_holdout;
  PointSet2D all = uniform_points(rng, total);

  Eigen::VectorXd x1(total);
  for (int i = 0; i < total; ++i) x1[i] = rng.uniform();

  Eigen::VectorXd field(total);
  if (config.field_kind == "matern_grf") {
    field = draw_matern_field(rng, all, config.field_sigma2, config.field_range);
  } else if (config.field_kind == "tps_surface") {
    PointSet2D anchors = uniform_points(rng, config.surface_anchors);
    Eigen::VectorXd coef(config.surface_anchors);
    for (int j = 0; j < config.surface_anchors; ++j) coef[j] = rng.normal();
    field = cross_kernel(all, anchors) * coef;
    const double mean = field.head(n).mean();
    const double sd = std::sqrt(
        (field.head(n).array() - mean).square().sum() / (n - 1));
    field = (field.array() - mean) / sd * std::sqrt(config.field_sigma2);
  } else {
    fail(ErrorKind::ConfigError, "unknown field_kind '" + config.field_kind + "'");
  }

  SimulatedData out;
  out.data.y.resize(n);
  for (int i = 0; i < n; ++i)
    out.data.y[i] = config.beta0 + config.beta1 * x1[i] + field[i] +
                    config.sigma * rng.normal();
  out.data.x.resize(n, 2);
  out.data.x.col(0).setOnes();
  out.data.x.col(1) = x1.head(n);
  out.data.x_names = {"intercept", "x1"};
  out.data.coords = all.topRows(n);

  out.truth.config = config;
  out.truth.field = field.head(n);
  if (config.n_holdout > 0) {
    out.truth.holdout_coords = all.bottomRows(config.n_holdout);
    out.truth.holdout_x.resize(config.n_holdout, 2);
    out.truth.holdout_x.col(0).setOnes();
    out.truth.holdout_x.col(1) = x1.tail(config.n_holdout);
    out.truth.holdout_field = field.tail(config.n_holdout);
    out.truth.holdout_mu = config.beta0 +
                           (config.beta1 * x1.tail(config.n_holdout)).array() +
                           field.tail(config.n_holdout).array();
  } else {
    out.truth.holdout_coords.resize(0, 2);
  }
  return out;
}

std::string TruthRecord::to_json() const {
  json j;
  j["n_locations"] = config.n_locations;
  j["beta0"] = config.beta0;
  j["beta1"] = config.beta1;
  j["sigma"] = config.sigma;
  j["field_kind"] = config.field_kind;
  j["field_sigma2"] = config.field_sigma2;
  j["field_range"] = config.field_range;
  j["field_kappa"] = std::sqrt(8.0) / config.field_range;
  j["field_nu"] = 1.0;
  j["surface_anchors"] = config.surface_anchors;
  j["seed"] = config.seed;
  j["n_holdout"] = config.n_holdout;
  j["field"] = vector_to_json(field);
  j["holdout_coords"] = points_to_json(holdout_coords);
  if (holdout_coords.rows() > 0) {
    j["holdout_x1"] = vector_to_json(holdout_x.col(1));
    j["holdout_mu"] = vector_to_json(holdout_mu);
    j["holdout_field"] = vector_to_json(holdout_field);
  }
  return j.dump(2);
}

TruthRecord TruthRecord::from_json(const std::string& text) {
  json j = json::parse(text);
  TruthRecord t;
  t.config.n_locations = j["n_locations"];
  t.config.beta0 = j["beta0"];
  t.config.beta1 = j["beta1"];
  t.config.sigma = j["sigma"];
  t.config.field_kind = j["field_kind"];
  t.config.field_sigma2 = j["field_sigma2"];
  t.config.field_range = j["field_range"];
  t.config.surface_anchors = j["surface_anchors"];
  t.config.seed = j["seed"];
  t.config.n_holdout = j["n_holdout"];
  t.field = vector_from_json(j["field"]);
  t.holdout_coords = points_from_json(j["holdout_coords"]);
  if (t.holdout_coords.rows() > 0) {
    Eigen::VectorXd x1 = vector_from_json(j["holdout_x1"]);
    t.holdout_x.resize(x1.size(), 2);
    t.holdout_x.col(0).setOnes();
    t.holdout_x.col(1) = x1;
    t.holdout_mu = vector_from_json(j["holdout_mu"]);
    t.holdout_field = vector_from_json(j["holdout_field"]);
  }
  return t;
}

CpueData synth_cpue(const CpueConfig& config) {
  if (config.n_sites < 1) fail(ErrorKind::ConfigError, "need at least one site");
  if (config.year_max < config.year_min)
    fail(ErrorKind::ConfigError, "empty year span");
  Rng rng(config.seed);

  // scattered sites with a minimum separation
  PointSet2D sites(config.n_sites, 2);
  for (int s = 0; s < config.n_sites; ++s) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Eigen::RowVector2d cand(rng.uniform(), rng.uniform());
      bool ok = true;
      for (int t = 0; t < s; ++t)
        if ((sites.row(t) - cand).norm() < 0.12) {
          ok = false;
          break;
        }
      if (ok) {
        sites.row(s) = cand;
        break;
      }
    }
  }

  Eigen::VectorXd site_field =
      draw_matern_field(rng, sites, 0.25, 0.5);

  const int n_years = config.year_max - config.year_min + 1;
  Eigen::VectorXd year_effect(n_years);
  year_effect[0] = 0.0;  // reference level
  for (int t = 1; t < n_years; ++t)
    year_effect[t] =
        0.3 * std::sin(2.0 * std::numbers::pi * t / 7.0) - 0.015 * t;

  const double beta0 = 1.2, b_depth = -0.3;
  const double season_effect[3] = {0.0, 0.15, -0.1};
  const double destine_effect[2] = {0.0, 0.2};

  std::vector<double> y, s1, s2, year, depth, season, destine;
  for (int s = 0; s < config.n_sites; ++s) {
    for (int t = 0; t < n_years; ++t) {
      for (int r = 0; r < config.obs_per_cell; ++r) {
        const double coin = rng.uniform();
        const double d = rng.normal();
        const int se = static_cast<int>(rng.below(3));
        const int de = static_cast<int>(rng.below(2));
        // always keep the first replicate at site 0 so every year is observed
        if (!(s == 0 && r == 0) && coin > config.keep_prob) continue;
        const double eta = beta0 + year_effect[t] + b_depth * d +
                           season_effect[se] + destine_effect[de] +
                           site_field[s];
        y.push_back(sample_gamma_mean_precision(rng, std::exp(eta), config.phi));
        s1.push_back(sites(s, 0));
        s2.push_back(sites(s, 1));
        year.push_back(config.year_min + t);
        depth.push_back(d);
        season.push_back(se + 1);
        destine.push_back(de + 1);
      }
    }
  }

  CpueData out;
  out.sites = sites;
  out.site_field_truth = site_field;
  out.year_effect_truth = year_effect.tail(n_years - 1);
  out.raw.columns = {"y", "s1", "s2", "year", "depth", "season", "destine"};
  out.raw.data = {y, s1, s2, year, depth, season, destine};

  KvConfig kv;
  kv.set("factors", "year,season,destine");
  out.data = load_dataset(out.raw, kv);
  return out;
}

Dataset load_dataset(const CsvTable& table, const KvConfig& cfg) {
  const int iy = table.column_index("y");
  const int is1 = table.column_index("s1");
  const int is2 = table.column_index("s2");
  if (iy < 0 || is1 < 0 || is2 < 0)
    fail(ErrorKind::ConfigError, "data csv must contain columns y,s1,s2");
  const int n = table.n_rows();
  if (n < 1) fail(ErrorKind::ConfigError, "data csv has no rows");

  std::set<std::string> factors;
  {
    std::stringstream ss(cfg.str("factors", ""));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
      if (!tok.empty()) factors.insert(tok);
    }
  }

  Dataset data;
  data.y = Eigen::Map<const Eigen::VectorXd>(table.data[iy].data(), n);
  data.coords.resize(n, 2);
  data.coords.col(0) = Eigen::Map<const Eigen::VectorXd>(table.data[is1].data(), n);
  data.coords.col(1) = Eigen::Map<const Eigen::VectorXd>(table.data[is2].data(), n);

  std::vector<Eigen::VectorXd> cols;
  std::vector<std::string> names;
  cols.push_back(Eigen::VectorXd::Ones(n));
  names.push_back("intercept");
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const std::string& nm = table.columns[c];
    if (static_cast<int>(c) == iy || static_cast<int>(c) == is1 ||
        static_cast<int>(c) == is2)
      continue;
    const auto& raw = table.data[c];
    if (factors.count(nm)) {
      std::vector<double> levels(raw.begin(), raw.end());
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      // treatment coding, lowest level as reference
      for (std::size_t l = 1; l < levels.size(); ++l) {
        Eigen::VectorXd col(n);
        for (int i = 0; i < n; ++i) col[i] = raw[i] == levels[l] ? 1.0 : 0.0;
        cols.push_back(col);
        std::ostringstream lab;
        if (levels[l] == std::floor(levels[l]))
          lab << nm << '_' << static_cast<long>(levels[l]);
        else
          lab << nm << '_' << levels[l];
        names.push_back(lab.str());
      }
    } else {
      cols.push_back(Eigen::Map<const Eigen::VectorXd>(raw.data(), n));
      names.push_back(nm);
    }
  }
  data.x.resize(n, static_cast<int>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    data.x.col(static_cast<int>(c)) = cols[c];
  data.x_names = names;
  return data;
}

Dataset load_dataset_csv(const std::string& path, const KvConfig& cfg) {
  return load_dataset(load_csv(path), cfg);
}

void write_dataset_csv(const std::string& path, const CsvTable& raw) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t c = 0; c < raw.columns.size(); ++c)
    os << (c ? "," : "") << csv_quote(raw.columns[c]);
  os << '\n';
  for (int r = 0; r < raw.n_rows(); ++r) {
    for (std::size_t c = 0; c < raw.columns.size(); ++c)
      os << (c ? "," : "") << raw.data[c][r];
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

FitConfig FitConfig::from_kv(const KvConfig& kv, const std::string& model) {
  FitConfig fc;
  fc.model = model;
  fc.mesh_extension = kv.num("mesh.extension", fc.mesh_extension);
  fc.mesh_ring = static_cast<int>(kv.integer("mesh.ring", fc.mesh_ring));
  fc.knots = static_cast<int>(kv.integer("tps.knots", fc.knots));
  fc.rank = static_cast<int>(kv.integer("tps.rank", fc.rank));
  fc.tps_penalty = kv.boolean("tps.penalty", fc.tps_penalty);
  fc.tps_c_prior = kv.boolean("tps.c_prior", fc.tps_c_prior);
  fc.knot_seed = static_cast<std::uint64_t>(kv.integer("tps.knot_seed", 99));
  if (kv.has("sigma.fixed")) fc.sigma_fixed = kv.num("sigma.fixed", 0.0);
  if (kv.has("lambda.fixed")) fc.lambda_fixed = kv.num("lambda.fixed", 0.0);
  for (const auto& [key, value] : kv.values)
    if (key.rfind("prior.", 0) == 0)
      fc.prior_overrides[key.substr(6)] = parse_prior(value);
  return fc;
}

void FitConfig::apply_to_kv(KvConfig& kv) const {
  kv.set("model", model);
  kv.set("mesh.extension", std::to_string(mesh_extension));
  kv.set("mesh.ring", std::to_string(mesh_ring));
  kv.set("tps.knots", std::to_string(knots));
  kv.set("tps.rank", std::to_string(rank));
  kv.set("tps.penalty", tps_penalty ? "on" : "off");
  kv.set("tps.c_prior", tps_c_prior ? "on" : "off");
  kv.set("tps.knot_seed", std::to_string(knot_seed));
  if (sigma_fixed) kv.set("sigma.fixed", std::to_string(*sigma_fixed));
  if (lambda_fixed) kv.set("lambda.fixed", std::to_string(*lambda_fixed));
}

namespace {

// distinct coordinates in first-appearance order
PointSet2D unique_coords(const PointSet2D& coords) {
  std::vector<Eigen::RowVector2d> uniq;
  for (int i = 0; i < coords.rows(); ++i) {
    bool found = false;
    for (const auto& u : uniq)
      if ((u - coords.row(i)).norm() < 1e-9) {
        found = true;
        break;
      }
    if (!found) uniq.push_back(coords.row(i));
  }
  PointSet2D out(static_cast<int>(uniq.size()), 2);
  for (std::size_t i = 0; i < uniq.size(); ++i)
    out.row(static_cast<int>(i)) = uniq[i];
  return out;
}

ModelSpec preset_spec(const std::string& model) {
  ModelSpec spec;
  auto set = [&](const std::string& key, const std::string& prior) {
    spec.priors[key] = parse_prior(prior);
  };
  if (model == "gaussian") {
    spec.likelihood = Likelihood::Gaussian;
    spec.spatial = SpatialEffect::None;
    set("beta", "normal(0, 5)");
    set("sigma", "half_cauchy(5)");
  } else if (model == "mgrf") {
    spec.likelihood = Likelihood::Gaussian;
    spec.spatial = SpatialEffect::SpdeGmrf;
    set("beta", "normal(1, 2)");
    set("sigma", "half_cauchy(5)");
    set("tau", "normal(0, 0.5)");
    set("kappa", "normal(0, 0.5)");
  } else if (model == "mtps" || model == "mtps_fixed_knots") {
    spec.likelihood = Likelihood::Gaussian;
    spec.spatial = SpatialEffect::TpsLowrank;
    set("beta", "normal(1, 2)");
    set("sigma", "half_cauchy(5)");
    set("c", "normal(0, 1)");
    set("lambda", "normal(0, 1)");
  } else if (model == "m1" || model == "m3") {
    spec.likelihood = Likelihood::GammaMeanPrecision;
    spec.spatial = model == "m1" ? SpatialEffect::SpdeGmrf
                                 : SpatialEffect::TpsLowrank;
    set("beta", "normal(0, 5)");
    set("phi", "half_cauchy(2)");
    if (model == "m1") {
      set("tau", "normal(0, 1)");
      set("kappa", "normal(0, 1)");
    } else {
      set("c", "normal(0, 1)");
      set("lambda", "normal(0, 1)");
    }
  } else if (model == "m2" || model == "m4") {
    spec.likelihood = Likelihood::SkewNormal;
    spec.transform = ResponseTransform::Sqrt;
    spec.spatial = model == "m2" ? SpatialEffect::SpdeGmrf
                                 : SpatialEffect::TpsLowrank;
    set("beta", "normal(0, 5)");
    set("sigma", "half_cauchy(2)");
    set("omega", "normal(0, 1)");
    if (model == "m2") {
      set("tau", "normal(0, 1)");
      set("kappa", "normal(0, 1)");
    } else {
      set("c", "normal(0, 1)");
      set("lambda", "normal(0, 1)");
    }
  } else {
    fail(ErrorKind::ConfigError, "unknown model '" + model + "'");
  }
  return spec;
}

}  // namespace

BuiltModel build_model(const FitConfig& config, const Dataset& data) {
  BuiltModel built;
  built.config = config;
  built.spec = preset_spec(config.model);
  built.spec.tps_penalty = config.tps_penalty;
  built.spec.tps_c_prior = config.tps_c_prior;
  built.spec.sigma_fixed = config.sigma_fixed;
  built.spec.lambda_fixed = config.lambda_fixed;
  for (const auto& [key, prior] : config.prior_overrides)
    built.spec.priors[key] = prior;

  SpatialStructures structures;
  if (built.spec.spatial == SpatialEffect::SpdeGmrf) {
    PointSet2D uniq = unique_coords(data.coords);
    built.mesh = std::make_shared<Mesh>(
        triangulate(uniq, config.mesh_extension, config.mesh_ring));
    auto fem = std::make_shared<FemMatrices>(assemble_fem(*built.mesh));
    structures.fem = fem;
    structures.spde = std::make_shared<SpdeOperator>(*fem);
    structures.projector = std::make_shared<Eigen::SparseMatrix<double>>(
        projector(*built.mesh, data.coords).a);
  } else if (built.spec.spatial == SpatialEffect::TpsLowrank) {
    PointSet2D uniq = unique_coords(data.coords);
    const int n_uniq = static_cast<int>(uniq.rows());
    int m = config.knots;
    if (m == 0 && (config.model == "mtps"))
      m = std::max(3, static_cast<int>(std::lround(data.n() / 10.0)));
    if (m == 0 && config.model == "mtps_fixed_knots") m = 30;
    PointSet2D anchors;
    if (m == 0 || m >= n_uniq) {
      anchors = uniq;
      m = n_uniq;
      built.knot_indices.resize(n_uniq);
      std::iota(built.knot_indices.begin(), built.knot_indices.end(), 0);
    } else {
      built.knot_indices = select_knots(uniq, m, config.knot_seed);
      anchors.resize(m, 2);
      for (int j = 0; j < m; ++j)
        anchors.row(j) = uniq.row(built.knot_indices[j]);
    }
    int k = config.rank;
    if (k == 0) k = (config.knots == 0 && config.model != "mtps" &&
                     config.model != "mtps_fixed_knots")
                        ? std::max(1, m - 1)
                        : m;
    k = std::min(k, m);
    built.basis = std::make_shared<TpsBasis>(
        make_knot_tps_basis(data.coords, anchors, k));
    structures.tps = built.basis;
  }
  built.posterior = Posterior::assemble(built.spec, data, structures);
  return built;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) fail(ErrorKind::ConfigError, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

std::optional<ParamSummary> find_summary(const std::vector<ParamSummary>& s,
                                         const std::string& name) {
  for (const auto& ps : s)
    if (ps.name == name) return ps;
  return std::nullopt;
}

FitResult fit_model(const BuiltModel& model, const SamplerConfig& sampler) {
  PosteriorTarget target(model.posterior);
  FitResult result;
  result.draws = run_chains(target, sampler);
  result.draws.names = model.posterior.names();
  result.total_wall_seconds = result.draws.total_wall_seconds;
  result.divergences = result.draws.divergence_count();
  result.convergence = convergence_report(result.draws, result.total_wall_seconds);

  auto add_summary = [&](const std::string& name, std::vector<double> vals) {
    ParamSummary ps;
    ps.name = name;
    ps.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    ps.p25 = quantile(vals, 0.25);
    ps.p75 = quantile(vals, 0.75);
    result.summaries.push_back(ps);
  };

  const int rows = static_cast<int>(result.draws.draws.rows());
  for (int j = 0; j < result.draws.dim(); ++j) {
    std::vector<double> vals(rows);
    for (int r = 0; r < rows; ++r) vals[r] = result.draws.draws(r, j);
    add_summary(result.draws.names[j], vals);
    // natural-scale views of log-parameterized blocks
    const std::string& nm = result.draws.names[j];
    if (nm.rfind("log_", 0) == 0) {
      std::vector<double> nat(rows);
      for (int r = 0; r < rows; ++r) nat[r] = std::exp(vals[r]);
      add_summary(nm.substr(4), nat);
    }
  }
  return result;
}

ExperimentResult run_experiment(int sl, const std::string& model,
                                const SamplerConfig& sampler,
                                std::optional<SimulationConfig> sim_override) {
  if (sl < 1 || sl > 10)
    fail(ErrorKind::ConfigError, "unknown SL tag " + std::to_string(sl));
  if (model != "mgrf" && model != "mtps" && model != "mtps_fixed_knots")
    fail(ErrorKind::ConfigError, "experiment model must be mgrf or mtps");

  SimulationConfig sim_cfg;
  if (sim_override) {
    sim_cfg = *sim_override;
  } else {
    sim_cfg.n_locations = 100 * sl;
    sim_cfg.seed = 20240800 + static_cast<std::uint64_t>(sl);
  }

  ExperimentResult result;
  result.sl_tag = "SL" + std::to_string(sl);
  result.model = model;
  result.n_locations = sim_cfg.n_locations;
  result.sim = simulate(sim_cfg);

  FitConfig fc;
  fc.model = model;
  result.model_built = build_model(fc, result.sim.data);
  result.fit = fit_model(result.model_built, sampler);

  auto row = [&](const std::string& name, double truth) {
    auto ps = find_summary(result.fit.summaries, name);
    if (!ps) fail(ErrorKind::SpecMismatch, "summary missing " + name);
    ParamRow r;
    r.name = name;
    r.truth = truth;
    r.mean = ps->mean;
    r.p25 = ps->p25;
    r.p75 = ps->p75;
    r.rel_error = std::abs(truth - ps->mean);
    return r;
  };
  result.rows.push_back(row("beta[intercept]", sim_cfg.beta0));
  result.rows.push_back(row("beta[x1]", sim_cfg.beta1));
  result.rows.push_back(row("sigma", sim_cfg.sigma));

  result.wall_seconds = result.fit.total_wall_seconds;
  result.min_ess = result.fit.convergence.min_ess;
  result.max_rhat = result.fit.convergence.max_rhat;
  result.efficiency = result.fit.convergence.efficiency;
  result.divergences = result.fit.divergences;
  return result;
}

PredictionResult predict_surface(const BuiltModel& model, const DrawMatrix& draws,
                                 const TruthRecord* truth, int grid_resolution) {
  if (!model.basis)
    fail(ErrorKind::SpecMismatch, "prediction requires a fitted TPS model");
  if (grid_resolution < 1)
    fail(ErrorKind::ConfigError, "grid resolution must be >= 1");

  const Posterior& post = model.posterior;
  Eigen::VectorXd mean = draws.parameter_mean();
  const int p = post.n_beta();
  const int k = post.spatial_dim();
  Eigen::VectorXd beta = mean.head(p);
  Eigen::VectorXd c = mean.segment(p, k);

  PredictionResult result;
  const int g = grid_resolution;
  PointSet2D grid_pts(g * g, 2);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      grid_pts(i * g + j, 0) = (i + 0.5) / g;
      grid_pts(i * g + j, 1) = (j + 0.5) / g;
    }
  Eigen::VectorXd surface = predict_at(*model.basis, c, grid_pts);
  result.grid.resize(g * g, 3);
  result.grid.col(0) = grid_pts.col(0);
  result.grid.col(1) = grid_pts.col(1);
  result.grid.col(2) = surface;

  if (truth && truth->holdout_coords.rows() > 0) {
    Eigen::VectorXd f_hat = predict_at(*model.basis, c, truth->holdout_coords);
    Eigen::VectorXd mu_hat = truth->holdout_x * beta + f_hat;
    const Eigen::VectorXd& y = post.data().y;
    const double sd_y =
        std::sqrt((y.array() - y.mean()).square().sum() / (y.size() - 1));
    result.rmse = std::sqrt((mu_hat - truth->holdout_mu).squaredNorm() /
                            truth->holdout_mu.size()) /
                  sd_y;
    result.has_holdout = true;
  }
  return result;
}

PredictionResult predict_experiment(const ExperimentResult& experiment,
                                    int grid_resolution) {
  return predict_surface(experiment.model_built, experiment.fit.draws,
                         &experiment.sim.truth, grid_resolution);
}

Eigen::MatrixXd pointwise_loglik_matrix(const Posterior& posterior,
                                        const DrawMatrix& draws,
                                        bool jacobian) {
  const int s = static_cast<int>(draws.draws.rows());
  Eigen::MatrixXd ll(s, posterior.n_obs());
  for (int r = 0; r < s; ++r) {
    Eigen::VectorXd x = draws.draws.row(r).transpose();
    ll.row(r) = jacobian ? posterior.pointwise_loglik(x).transpose()
                         : posterior.pointwise_loglik_raw(x).transpose();
  }
  return ll;
}

}  // namespace spfit
