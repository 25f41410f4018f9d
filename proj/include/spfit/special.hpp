#ifndef SPFIT_SPECIAL_HPP
#define SPFIT_SPECIAL_HPP

namespace spfit {

// Modified Bessel function of the second kind, nu >= 0, x > 0.
// Series expansions for x <= 6, divergent asymptotic expansion truncated at
// its smallest term beyond.
double bessel_k(double nu, double x);

double digamma(double x);

// Standard normal helpers, stable far into the lower tail.
double log_norm_pdf(double z);
double log_norm_cdf(double z);
// phi(z) / Phi(z)
double mills_ratio_inv(double z);
// Phi^{-1}(p), p in (0,1)
double inv_norm_cdf(double p);

}  // namespace spfit

#endif
