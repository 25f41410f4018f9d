#include "spfit/posterior.hpp"

#include <cmath>
#include <numbers>

#include "spfit/common.hpp"

namespace spfit {

namespace {

const PriorSpec& require_prior(const std::map<std::string, PriorSpec>& priors,
                               const std::string& key) {
  auto it = priors.find(key);
  if (it == priors.end())
    fail(ErrorKind::SpecMismatch, "missing prior for block '" + key + "'");
  return it->second;
}

}  // namespace

double jacobian_sqrt_correction(const Eigen::VectorXd& y_original) {
  return jacobian_sqrt_pointwise(y_original).sum();
}

Eigen::VectorXd jacobian_sqrt_pointwise(const Eigen::VectorXd& y_original) {
  Eigen::VectorXd out(y_original.size());
  for (int i = 0; i < y_original.size(); ++i) {
    if (!(y_original[i] > 0.0))
      fail(ErrorKind::NonPositiveResponse,
           "sqrt transform needs a positive response");
    out[i] = -std::numbers::ln2 - 0.5 * std::log(y_original[i]);
  }
  return out;
}

Posterior Posterior::assemble(const ModelSpec& spec, const Dataset& data,
                              const SpatialStructures& structures) {
  const int n = data.n();
  if (data.x.rows() != n || data.coords.rows() != n)
    fail(ErrorKind::DimensionMismatch, "dataset field lengths disagree");
  if (!data.y.allFinite() || !data.x.allFinite())
    fail(ErrorKind::SpecMismatch, "dataset contains missing values");

  Posterior post;
  post.spec_ = spec;
  post.data_ = data;
  post.structures_ = structures;

  if (spec.transform == ResponseTransform::Sqrt) {
    if (spec.likelihood != Likelihood::SkewNormal)
      fail(ErrorKind::SpecMismatch,
           "sqrt transform is defined for the skew-normal likelihood only");
    post.sqrt_jacobian_pointwise_ = jacobian_sqrt_pointwise(data.y);
    post.sqrt_jacobian_const_ = post.sqrt_jacobian_pointwise_.sum();
    post.y_fit_ = data.y.cwiseSqrt();
  } else {
    post.sqrt_jacobian_pointwise_ = Eigen::VectorXd::Zero(n);
    post.y_fit_ = data.y;
  }
  if (spec.likelihood == Likelihood::GammaMeanPrecision &&
      (post.y_fit_.array() <= 0.0).any())
    fail(ErrorKind::SpecMismatch, "gamma likelihood needs a positive response");

  post.p_ = static_cast<int>(data.x.cols());
  switch (spec.spatial) {
    case SpatialEffect::None:
      post.m_ = 0;
      break;
    case SpatialEffect::SpdeGmrf: {
      if (!structures.fem || !structures.spde || !structures.projector)
        fail(ErrorKind::SpecMismatch, "gmrf model needs fem + projector");
      if (structures.projector->rows() != n ||
          structures.projector->cols() != structures.spde->dim())
        fail(ErrorKind::DimensionMismatch, "projector shape mismatch");
      post.m_ = structures.spde->dim();
      break;
    }
    case SpatialEffect::TpsLowrank: {
      if (!structures.tps) fail(ErrorKind::SpecMismatch, "tps model needs a basis");
      if (structures.tps->data_points.rows() != n)
        fail(ErrorKind::DimensionMismatch, "tps basis built for different data");
      post.m_ = structures.tps->k;
      post.z_ = design_columns(*structures.tps);
      break;
    }
  }

  // parameter layout: beta, spatial, then hyperparameters
  for (int j = 0; j < post.p_; ++j) {
    std::string nm = j < static_cast<int>(data.x_names.size())
                         ? data.x_names[j]
                         : "x" + std::to_string(j);
    post.names_.push_back("beta[" + nm + "]");
  }
  const char* sp_name = spec.spatial == SpatialEffect::SpdeGmrf ? "u" : "c";
  for (int j = 0; j < post.m_; ++j)
    post.names_.push_back(std::string(sp_name) + "[" + std::to_string(j) + "]");

  int idx = post.p_ + post.m_;
  require_prior(spec.priors, "beta");
  const bool has_sigma = (spec.likelihood == Likelihood::Gaussian ||
                          spec.likelihood == Likelihood::SkewNormal) &&
                         !spec.sigma_fixed;
  if (has_sigma) {
    require_prior(spec.priors, "sigma");
    post.i_log_sigma_ = idx++;
    post.names_.push_back("log_sigma");
  }
  if (spec.likelihood == Likelihood::SkewNormal) {
    require_prior(spec.priors, "omega");
    post.i_omega_ = idx++;
    post.names_.push_back("omega");
  }
  if (spec.likelihood == Likelihood::GammaMeanPrecision) {
    require_prior(spec.priors, "phi");
    post.i_log_phi_ = idx++;
    post.names_.push_back("log_phi");
  }
  if (spec.spatial == SpatialEffect::SpdeGmrf) {
    require_prior(spec.priors, "tau");
    require_prior(spec.priors, "kappa");
    post.i_log_tau_ = idx++;
    post.names_.push_back("log_tau");
    post.i_log_kappa_ = idx++;
    post.names_.push_back("log_kappa");
  }
  if (spec.spatial == SpatialEffect::TpsLowrank) {
    if (spec.tps_c_prior) require_prior(spec.priors, "c");
    if (spec.tps_penalty && !spec.lambda_fixed) {
      require_prior(spec.priors, "lambda");
      post.i_log_lambda_ = idx++;
      post.names_.push_back("log_lambda");
    }
  }
  post.dim_ = idx;
  if (post.dim_ < 1) fail(ErrorKind::SpecMismatch, "model has no parameters");
  return post;
}

std::optional<int> Posterior::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

struct Posterior::LikEval {
  double value = 0.0;
  Eigen::VectorXd pointwise;
  Eigen::VectorXd d_eta;
  double d_log_sigma = 0.0;
  double d_omega = 0.0;
  double d_log_phi = 0.0;
};

void Posterior::eval_likelihood(const Eigen::VectorXd& x, LikEval& out,
                                bool want_grad) const {
  const int n = n_obs();
  Eigen::VectorXd eta = linear_predictor(x);
  const double sigma = spec_.sigma_fixed
                           ? *spec_.sigma_fixed
                           : (i_log_sigma_ >= 0 ? std::exp(x[i_log_sigma_]) : 1.0);
  const double omega = i_omega_ >= 0 ? x[i_omega_] : 0.0;
  const double phi = i_log_phi_ >= 0 ? std::exp(x[i_log_phi_]) : 1.0;

  out.value = 0.0;
  out.pointwise.resize(n);
  out.d_log_sigma = out.d_omega = out.d_log_phi = 0.0;
  if (want_grad) out.d_eta.resize(n);

  for (int i = 0; i < n; ++i) {
    double li = 0.0;
    switch (spec_.likelihood) {
      case Likelihood::Gaussian: {
        if (want_grad) {
          auto g = gaussian_logpdf_grad(y_fit_[i], eta[i], sigma);
          li = g.value;
          out.d_eta[i] = g.d_mu;
          out.d_log_sigma += g.d_log_sigma;
        } else {
          li = gaussian_logpdf(y_fit_[i], eta[i], sigma);
        }
        break;
      }
      case Likelihood::GammaMeanPrecision: {
        const double mu = std::exp(eta[i]);
        if (want_grad) {
          auto g = gamma_logpdf_grad(y_fit_[i], mu, phi);
          li = g.value;
          out.d_eta[i] = g.d_mu * mu;
          out.d_log_phi += g.d_log_phi;
        } else {
          li = gamma_logpdf(y_fit_[i], mu, phi);
        }
        break;
      }
      case Likelihood::SkewNormal: {
        if (want_grad) {
          auto g = skew_normal_logpdf_grad(y_fit_[i], eta[i], sigma, omega);
          li = g.value;
          out.d_eta[i] = g.d_mu;
          out.d_log_sigma += g.d_log_sigma;
          out.d_omega += g.d_omega;
        } else {
          li = skew_normal_logpdf(y_fit_[i], eta[i], sigma, omega);
        }
        break;
      }
    }
    li += sqrt_jacobian_pointwise_[i];
    out.pointwise[i] = li;
    out.value += li;
  }
}

Eigen::VectorXd Posterior::linear_predictor(const Eigen::VectorXd& x) const {
  if (x.size() != dim_)
    fail(ErrorKind::DimensionMismatch, "parameter vector has wrong length");
  Eigen::VectorXd eta = data_.x * x.head(p_);
  if (spec_.spatial == SpatialEffect::SpdeGmrf)
    eta += *structures_.projector * x.segment(p_, m_);
  else if (spec_.spatial == SpatialEffect::TpsLowrank)
    eta += z_ * x.segment(p_, m_);
  return eta;
}

double Posterior::logp_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  grad.setZero(dim_);
  LikEval lik;
  eval_likelihood(x, lik, /*want_grad=*/true);
  double value = lik.value;

  grad.head(p_) += data_.x.transpose() * lik.d_eta;

  // fixed-effect priors
  const PriorSpec& beta_prior = require_prior(spec_.priors, "beta");
  for (int j = 0; j < p_; ++j) {
    auto [v, d] = prior_logpdf_grad(beta_prior, x[j], false);
    value += v;
    grad[j] += d;
  }

  if (i_log_sigma_ >= 0) {
    grad[i_log_sigma_] += lik.d_log_sigma;
    auto [v, d] =
        prior_logpdf_grad(require_prior(spec_.priors, "sigma"), x[i_log_sigma_], true);
    value += v;
    grad[i_log_sigma_] += d;
  }
  if (i_omega_ >= 0) {
    grad[i_omega_] += lik.d_omega;
    auto [v, d] =
        prior_logpdf_grad(require_prior(spec_.priors, "omega"), x[i_omega_], false);
    value += v;
    grad[i_omega_] += d;
  }
  if (i_log_phi_ >= 0) {
    grad[i_log_phi_] += lik.d_log_phi;
    auto [v, d] =
        prior_logpdf_grad(require_prior(spec_.priors, "phi"), x[i_log_phi_], true);
    value += v;
    grad[i_log_phi_] += d;
  }

  if (spec_.spatial == SpatialEffect::SpdeGmrf) {
    const auto u = x.segment(p_, m_);
    grad.segment(p_, m_) += structures_.projector->transpose() * lik.d_eta;

    SpdeHyperparams h{x[i_log_tau_], x[i_log_kappa_]};
    const double tau2 = std::exp(2.0 * h.log_tau);
    const double kappa2 = std::exp(2.0 * h.log_kappa);
    Eigen::VectorXd qu;
    structures_.spde->q_times(u, h, qu);
    auto parts = structures_.spde->quad_parts(u);
    const double quad = parts.quad(tau2, kappa2);
    value += -0.5 * m_ * std::log(2.0 * std::numbers::pi) +
             0.5 * structures_.spde->logdet(h) - 0.5 * quad;
    grad.segment(p_, m_) -= qu;
    grad[i_log_tau_] += m_ - quad;
    grad[i_log_kappa_] += 0.5 * structures_.spde->dlogdet_dlogkappa(h) -
                          2.0 * tau2 * kappa2 *
                              (kappa2 * parts.u_c_u + parts.u_g1_u);

    auto [vt, dt] =
        prior_logpdf_grad(require_prior(spec_.priors, "tau"), x[i_log_tau_], true);
    value += vt;
    grad[i_log_tau_] += dt;
    auto [vk, dk] = prior_logpdf_grad(require_prior(spec_.priors, "kappa"),
                                      x[i_log_kappa_], true);
    value += vk;
    grad[i_log_kappa_] += dk;
  } else if (spec_.spatial == SpatialEffect::TpsLowrank) {
    const auto c = x.segment(p_, m_);
    grad.segment(p_, m_) += z_.transpose() * lik.d_eta;

    if (spec_.tps_c_prior) {
      const PriorSpec& c_prior = require_prior(spec_.priors, "c");
      for (int j = 0; j < m_; ++j) {
        auto [v, d] = prior_logpdf_grad(c_prior, x[p_ + j], false);
        value += v;
        grad[p_ + j] += d;
      }
    }
    if (spec_.tps_penalty) {
      const double lambda = spec_.lambda_fixed
                                ? *spec_.lambda_fixed
                                : std::exp(x[i_log_lambda_]);
      PenaltySpec pen = make_penalty(*structures_.tps, lambda);
      auto [pv, pg] = penalty_value_grad(c, pen);
      value -= pv;
      grad.segment(p_, m_) -= pg;
      if (i_log_lambda_ >= 0) {
        grad[i_log_lambda_] -= pv;  // d/dlog(lambda) of (lambda/2) c'Sc
        auto [v, d] = prior_logpdf_grad(require_prior(spec_.priors, "lambda"),
                                        x[i_log_lambda_], true);
        value += v;
        grad[i_log_lambda_] += d;
      }
    }
  }
  return value;
}

double Posterior::logp(const Eigen::VectorXd& x) const {
  Eigen::VectorXd grad;
  return logp_grad(x, grad);
}

double Posterior::likelihood_term(const Eigen::VectorXd& x) const {
  LikEval lik;
  eval_likelihood(x, lik, /*want_grad=*/false);
  return lik.value;
}

Eigen::VectorXd Posterior::pointwise_loglik(const Eigen::VectorXd& x) const {
  LikEval lik;
  eval_likelihood(x, lik, /*want_grad=*/false);
  return lik.pointwise;
}

Eigen::VectorXd Posterior::pointwise_loglik_raw(const Eigen::VectorXd& x) const {
  return pointwise_loglik(x) - sqrt_jacobian_pointwise_;
}

Eigen::VectorXd Posterior::simulate_replicate(const Eigen::VectorXd& x,
                                              Rng& rng) const {
  Eigen::VectorXd eta = linear_predictor(x);
  const double sigma = spec_.sigma_fixed
                           ? *spec_.sigma_fixed
                           : (i_log_sigma_ >= 0 ? std::exp(x[i_log_sigma_]) : 1.0);
  const double omega = i_omega_ >= 0 ? x[i_omega_] : 0.0;
  const double phi = i_log_phi_ >= 0 ? std::exp(x[i_log_phi_]) : 1.0;
  Eigen::VectorXd rep(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    switch (spec_.likelihood) {
      case Likelihood::Gaussian:
        rep[i] = sample_gaussian(rng, eta[i], sigma);
        break;
      case Likelihood::GammaMeanPrecision:
        rep[i] = sample_gamma_mean_precision(rng, std::exp(eta[i]), phi);
        break;
      case Likelihood::SkewNormal:
        rep[i] = sample_skew_normal(rng, eta[i], sigma, omega);
        break;
    }
  }
  return rep;
}

}  // namespace spfit
