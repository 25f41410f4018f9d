#ifndef SPFIT_PRIORS_HPP
#define SPFIT_PRIORS_HPP

#include <string>
#include <utility>

namespace spfit {

// Families accepted in model configs.  `x` below is always the sampled
// (unconstrained) coordinate; positive blocks are sampled as x = log(theta).
//   normal(m, s)              on x itself (for positive blocks: lognormal)
//   half_cauchy(s)            on theta = exp(x), +x Jacobian
//   normal_on_positive(m, s)  on theta = exp(x), +x Jacobian
//   flat                      improper constant
enum class PriorFamily { Normal, HalfCauchy, NormalOnPositive, Flat };

struct PriorSpec {
  PriorFamily family = PriorFamily::Normal;
  double location = 0.0;
  double scale = 1.0;
};

PriorSpec parse_prior(const std::string& text);
std::string format_prior(const PriorSpec& spec);

double cauchy_logpdf(double x, double loc, double scale);

// (log prior, d/dx), where positive_block selects the exp(x) interpretation
// for the families that need it.
std::pair<double, double> prior_logpdf_grad(const PriorSpec& spec, double x,
                                            bool positive_block);

}  // namespace spfit

#endif
