#ifndef SPFIT_HARNESS_HPP
#define SPFIT_HARNESS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spfit/csvio.hpp"
#include "spfit/diagnostics.hpp"
#include "spfit/loo.hpp"
#include "spfit/nuts.hpp"
#include "spfit/posterior.hpp"

namespace spfit {

// ---------------------------------------------------------------- simulation

struct SimulationConfig {
  int n_locations = 100;
  double beta0 = 1.0;
  double beta1 = 2.0;
  double sigma = 0.1;
  std::string field_kind = "matern_grf";  // matern_grf | tps_surface
  double field_sigma2 = 1.0;
  double field_range = 0.3;  // practical range sqrt(8)/kappa on the unit square
  int surface_anchors = 12;  // tps_surface complexity
  std::uint64_t seed = 20240801;
  int n_holdout = 0;
};

struct TruthRecord {
  SimulationConfig config;
  Eigen::VectorXd field;          // spatial effect at the data locations
  PointSet2D holdout_coords;
  Eigen::MatrixXd holdout_x;      // design rows at holdout locations
  Eigen::VectorXd holdout_mu;     // noise-free response at holdout locations
  Eigen::VectorXd holdout_field;

  std::string to_json() const;
  static TruthRecord from_json(const std::string& text);
};

struct SimulatedData {
  Dataset data;
  TruthRecord truth;
};

SimulatedData simulate(const SimulationConfig& config);

// ------------------------------------------------------------ synthetic CPUE

struct CpueConfig {
  int n_sites = 13;
  int year_min = 1996;
  int year_max = 2016;
  int obs_per_cell = 2;     // per site x year before thinning
  double keep_prob = 0.65;  // random thinning for ragged site coverage
  double phi = 8.0;         // gamma precision of the response
  std::uint64_t seed = 4242;
};

struct CpueData {
  Dataset data;  // design already expanded (intercept, year_*, depth, season_*, destine_*)
  CsvTable raw;  // y,s1,s2,year,depth,season,destine for csv export
  Eigen::VectorXd year_effect_truth;  // one per non-reference year
  PointSet2D sites;
  Eigen::VectorXd site_field_truth;
};

CpueData synth_cpue(const CpueConfig& config);

// ------------------------------------------------------------- model presets

struct FitConfig {
  std::string model = "mtps";  // mgrf|mtps|mtps_fixed_knots|m1|m2|m3|m4|gaussian
  double mesh_extension = 0.2;
  int mesh_ring = 8;
  int knots = 0;       // 0: model default (n/10 for mtps, all unique for m3/m4)
  int rank = 0;        // 0: number of knots
  bool tps_penalty = true;
  bool tps_c_prior = true;
  std::uint64_t knot_seed = 99;
  std::optional<double> sigma_fixed;
  std::optional<double> lambda_fixed;
  std::map<std::string, PriorSpec> prior_overrides;

  static FitConfig from_kv(const KvConfig& kv, const std::string& model);
  void apply_to_kv(KvConfig& kv) const;
};

struct BuiltModel {
  Posterior posterior;
  std::shared_ptr<Mesh> mesh;            // gmrf models
  std::shared_ptr<TpsBasis> basis;       // tps models
  std::vector<int> knot_indices;         // into the unique-coordinate set
  ModelSpec spec;
  FitConfig config;
};

BuiltModel build_model(const FitConfig& config, const Dataset& data);

// ------------------------------------------------------------------- fitting

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};

struct FitResult {
  DrawMatrix draws;
  ConvergenceReport convergence;
  std::vector<ParamSummary> summaries;  // sampled and derived natural-scale
  double total_wall_seconds = 0.0;
  int divergences = 0;
};

FitResult fit_model(const BuiltModel& model, const SamplerConfig& sampler);

double quantile(std::vector<double> values, double p);
std::optional<ParamSummary> find_summary(const std::vector<ParamSummary>& s,
                                         const std::string& name);

// --------------------------------------------------------------- experiments

struct ParamRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double rel_error = 0.0;  // |truth - mean|
};

struct ExperimentResult {
  std::string sl_tag;
  std::string model;
  int n_locations = 0;
  std::vector<ParamRow> rows;
  double wall_seconds = 0.0;
  double min_ess = 0.0;
  double max_rhat = 0.0;
  double efficiency = 0.0;
  int divergences = 0;
  FitResult fit;
  SimulatedData sim;
  BuiltModel model_built;
};

// sl in 1..10 maps to n = 100 * sl
ExperimentResult run_experiment(int sl, const std::string& model,
                                const SamplerConfig& sampler,
                                std::optional<SimulationConfig> sim_override =
                                    std::nullopt);

struct PredictionResult {
  Eigen::MatrixXd grid;       // s1, s2, spatial effect (grid_resolution^2 rows)
  double rmse = 0.0;          // vs withheld truth, standardized response scale
  bool has_holdout = false;
};

// Posterior-mean surface prediction for a fitted TPS model; truth may be null.
PredictionResult predict_surface(const BuiltModel& model, const DrawMatrix& draws,
                                 const TruthRecord* truth, int grid_resolution);

PredictionResult predict_experiment(const ExperimentResult& experiment,
                                    int grid_resolution);

// --------------------------------------------------------------- dataset i/o

// CSV schema: required columns y,s1,s2; everything else is a covariate.
// Factor columns are named in cfg key "factors" (comma separated) and are
// expanded by treatment coding against their lowest level.
Dataset load_dataset(const CsvTable& table, const KvConfig& cfg);
Dataset load_dataset_csv(const std::string& path, const KvConfig& cfg);
void write_dataset_csv(const std::string& path, const CsvTable& raw);

Eigen::MatrixXd pointwise_loglik_matrix(const Posterior& posterior,
                                        const DrawMatrix& draws,
                                        bool jacobian = true);

}  // namespace spfit

#endif
