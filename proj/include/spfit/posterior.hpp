#ifndef SPFIT_POSTERIOR_HPP
#define SPFIT_POSTERIOR_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spfit/likelihoods.hpp"
#include "spfit/mesh.hpp"
#include "spfit/priors.hpp"
#include "spfit/spde.hpp"
#include "spfit/tps.hpp"

namespace spfit {

enum class Likelihood { Gaussian, GammaMeanPrecision, SkewNormal };
enum class SpatialEffect { None, SpdeGmrf, TpsLowrank };
enum class ResponseTransform { Identity, Sqrt };

struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;                  // fixed-effects design, intercept included
  std::vector<std::string> x_names;
  PointSet2D coords;

  int n() const { return static_cast<int>(y.size()); }
};

struct ModelSpec {
  Likelihood likelihood = Likelihood::Gaussian;
  SpatialEffect spatial = SpatialEffect::None;
  ResponseTransform transform = ResponseTransform::Identity;
  std::map<std::string, PriorSpec> priors;  // beta, sigma, omega, phi, tau, kappa, lambda, c
  bool tps_penalty = true;
  bool tps_c_prior = true;
  std::optional<double> sigma_fixed;
  std::optional<double> lambda_fixed;
};

// Prebuilt spatial structures a model binds to.
struct SpatialStructures {
  std::shared_ptr<const FemMatrices> fem;
  std::shared_ptr<const SpdeOperator> spde;
  std::shared_ptr<const Eigen::SparseMatrix<double>> projector;  // n x n_vertex
  std::shared_ptr<const TpsBasis> tps;
};

// Sum over observations of log |d sqrt(y) / dy| = -log 2 - log(y)/2.
double jacobian_sqrt_correction(const Eigen::VectorXd& y_original);
Eigen::VectorXd jacobian_sqrt_pointwise(const Eigen::VectorXd& y_original);

// Unconstrained joint log-density with gradient; the single target the
// sampler consumes.  Immutable and safe to share across chains.
class Posterior {
 public:
  Posterior() = default;  // empty placeholder; assemble() builds a usable one
  static Posterior assemble(const ModelSpec& spec, const Dataset& data,
                            const SpatialStructures& structures);

  int dim() const { return dim_; }
  int n_obs() const { return static_cast<int>(y_fit_.size()); }
  int n_beta() const { return p_; }
  int spatial_dim() const { return m_; }
  const std::vector<std::string>& names() const { return names_; }
  const ModelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }
  const SpatialStructures& structures() const { return structures_; }
  const Eigen::VectorXd& response_fit_scale() const { return y_fit_; }

  double logp_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
  double logp(const Eigen::VectorXd& x) const;

  // Likelihood-only pieces (fit-scale response), including the sqrt-transform
  // Jacobian so that transformed-response models are comparable.
  double likelihood_term(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pointwise_loglik_raw(const Eigen::VectorXd& x) const;

  // Replicate response drawn from the likelihood at x, on the fit scale.
  Eigen::VectorXd simulate_replicate(const Eigen::VectorXd& x, Rng& rng) const;

  // Linear predictor at x (log-mean scale for the gamma family).
  Eigen::VectorXd linear_predictor(const Eigen::VectorXd& x) const;

  std::optional<int> index_of(const std::string& name) const;

 private:
  struct LikEval;
  void eval_likelihood(const Eigen::VectorXd& x, LikEval& out,
                       bool want_grad) const;

  ModelSpec spec_;
  Dataset data_;
  SpatialStructures structures_;
  Eigen::VectorXd y_fit_;
  Eigen::MatrixXd z_;  // TPS design columns
  double sqrt_jacobian_const_ = 0.0;
  Eigen::VectorXd sqrt_jacobian_pointwise_;

  int p_ = 0, m_ = 0, dim_ = 0;
  int i_log_sigma_ = -1, i_omega_ = -1, i_log_phi_ = -1;
  int i_log_tau_ = -1, i_log_kappa_ = -1, i_log_lambda_ = -1;
  std::vector<std::string> names_;
};

}  // namespace spfit

#endif
