#include "spfit/likelihoods.hpp"

#include <cmath>
#include <numbers>

#include "spfit/common.hpp"
#include "spfit/special.hpp"

namespace spfit {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178032974;
}

double gaussian_logpdf(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

double gamma_logpdf(double y, double mu, double phi) {
  if (!(y > 0.0))
    fail(ErrorKind::NonPositiveResponse, "gamma response must be positive");
  return phi * std::log(phi / mu) - std::lgamma(phi) + (phi - 1.0) * std::log(y) -
         (phi / mu) * y;
}

double skew_normal_logpdf(double y, double mu, double sigma, double omega) {
  const double z = (y - mu) / sigma;
  return std::numbers::ln2 - std::log(sigma) + log_norm_pdf(z) +
         log_norm_cdf(omega * z);
}

GaussianGrad gaussian_logpdf_grad(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  GaussianGrad g;
  g.value = -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
  g.d_mu = z / sigma;
  g.d_log_sigma = z * z - 1.0;
  return g;
}

GammaGrad gamma_logpdf_grad(double y, double mu, double phi) {
  GammaGrad g;
  g.value = gamma_logpdf(y, mu, phi);
  g.d_mu = phi * (y - mu) / (mu * mu);
  g.d_log_phi =
      phi * (std::log(phi / mu) + 1.0 - digamma(phi) + std::log(y) - y / mu);
  return g;
}

SkewNormalGrad skew_normal_logpdf_grad(double y, double mu, double sigma,
                                       double omega) {
  const double z = (y - mu) / sigma;
  const double zeta = mills_ratio_inv(omega * z);  // phi/Phi at omega z
  SkewNormalGrad g;
  g.value = std::numbers::ln2 - std::log(sigma) + log_norm_pdf(z) +
            log_norm_cdf(omega * z);
  g.d_mu = (z - omega * zeta) / sigma;
  g.d_log_sigma = z * z - 1.0 - omega * z * zeta;
  g.d_omega = z * zeta;
  return g;
}

double sample_gaussian(Rng& rng, double mu, double sigma) {
  return rng.normal(mu, sigma);
}

double sample_gamma_mean_precision(Rng& rng, double mu, double phi) {
  return rng.gamma(phi) * (mu / phi);
}

double sample_skew_normal(Rng& rng, double mu, double sigma, double omega) {
  const double delta = omega / std::sqrt(1.0 + omega * omega);
  const double z0 = rng.normal();
  const double z1 = rng.normal();
  return mu + sigma * (delta * std::abs(z0) +
                       std::sqrt(1.0 - delta * delta) * z1);
}

}  // namespace spfit
