#ifndef SPFIT_LOO_HPP
#define SPFIT_LOO_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace spfit {

struct GpdFit {
  double khat = 0.0;
  double sigma = 0.0;
};

// Generalized Pareto fit to tail exceedances (profile-posterior-mean method
// with the weak shape prior); needs at least 5 samples.
GpdFit gpd_fit(const Eigen::VectorXd& tail);

struct LooReport {
  Eigen::VectorXd elpd_i;           // pointwise contributions
  Eigen::VectorXd pareto_k;         // NaN where not estimable
  std::vector<bool> khat_estimable;
  double elpd_loo = 0.0;
  double p_loo = 0.0;
  double khat_threshold = 0.7;      // min(1 - 1/log10(S), 0.7)
  int n_obs = 0;
  int n_draws = 0;

  double khat_max() const;
  int n() const { return n_obs; }
};

// loglik is draws x observations.  With smoothing disabled this reduces to
// naive importance-sampling LOO.
LooReport psis_loo(const Eigen::MatrixXd& loglik, bool smooth = true);

struct LooComparisonRow {
  std::string label;
  double elpd_loo = 0.0;
  double p_loo = 0.0;
  double elpd_diff = 0.0;
  double se_diff = 0.0;
  double khat_max = 0.0;
  double wall_seconds = 0.0;  // optional, filled by callers that know it
};

// Ranked by elpd_loo descending; the first row has elpd_diff = se_diff = 0.
std::vector<LooComparisonRow> loo_compare(const std::vector<LooReport>& reports,
                                          const std::vector<std::string>& labels);

}  // namespace spfit

#endif
