#ifndef SPFIT_DIAGNOSTICS_HPP
#define SPFIT_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spfit/nuts.hpp"
#include "spfit/posterior.hpp"

namespace spfit {

// Rank-normalized split-Rhat on a chains x N draw slab.
// Throws ConstantDraws when the statistic is undefined.
double split_rhat(const Eigen::MatrixXd& draws);

// Rank-normalized bulk effective sample size (Geyer initial-monotone).
double ess_bulk(const Eigen::MatrixXd& draws);

double efficiency(double min_ess, double wall_seconds);
double log_efficiency(double min_ess, double wall_seconds);

struct ParameterDiagnostic {
  std::string name;
  double rhat = 0.0;
  double ess = 0.0;
  bool defined = true;  // false when draws were constant
};

struct ConvergenceReport {
  std::vector<ParameterDiagnostic> parameters;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  double efficiency = 0.0;  // min_ess / total wall seconds
};

ConvergenceReport convergence_report(const DrawMatrix& draws,
                                     double wall_seconds);

struct PpdSummary {
  Eigen::MatrixXd replicates;  // n_rep x n, fit-scale response
  double mean_data = 0.0;
  double sd_data = 0.0;
  double mean_ppd = 0.0;
  double sd_ppd = 0.0;
};

PpdSummary posterior_predictive(const Posterior& posterior,
                                const DrawMatrix& draws, int n_rep,
                                std::uint64_t seed);

}  // namespace spfit

#endif
