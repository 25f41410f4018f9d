#ifndef SPFIT_LIKELIHOODS_HPP
#define SPFIT_LIKELIHOODS_HPP

#include "spfit/rng.hpp"

namespace spfit {

double gaussian_logpdf(double y, double mu, double sigma);
// Gamma in mean-precision form: mean mu, variance mu^2/phi (shape phi, rate phi/mu).
double gamma_logpdf(double y, double mu, double phi);
// log[(2/sigma) phi((y-mu)/sigma) Phi(omega (y-mu)/sigma)]
double skew_normal_logpdf(double y, double mu, double sigma, double omega);

// Derivatives on the natural parameter scales, packaged for the posterior.
struct GaussianGrad {
  double value, d_mu, d_log_sigma;
};
GaussianGrad gaussian_logpdf_grad(double y, double mu, double sigma);

struct GammaGrad {
  double value, d_mu, d_log_phi;
};
GammaGrad gamma_logpdf_grad(double y, double mu, double phi);

struct SkewNormalGrad {
  double value, d_mu, d_log_sigma, d_omega;
};
SkewNormalGrad skew_normal_logpdf_grad(double y, double mu, double sigma,
                                       double omega);

double sample_gaussian(Rng& rng, double mu, double sigma);
double sample_gamma_mean_precision(Rng& rng, double mu, double phi);
double sample_skew_normal(Rng& rng, double mu, double sigma, double omega);

}  // namespace spfit

#endif
