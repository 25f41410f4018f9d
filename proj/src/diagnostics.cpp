#include "spfit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spfit/common.hpp"
#include "spfit/special.hpp"

namespace spfit {

namespace {

// Split each chain in half and drop the last draw when the length is odd.
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& draws) {
  const int m = static_cast<int>(draws.rows());
  const int n = static_cast<int>(draws.cols());
  const int half = n / 2;
  if (half < 2) fail(ErrorKind::ConstantDraws, "too few draws to split");
  Eigen::MatrixXd out(2 * m, half);
  for (int c = 0; c < m; ++c) {
    out.row(2 * c) = draws.row(c).head(half);
    out.row(2 * c + 1) = draws.row(c).segment(half, half);
  }
  return out;
}

// Inverse-normal transform of fractional ranks, average rank for ties.
Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws) {
  const int m = static_cast<int>(draws.rows());
  const int n = static_cast<int>(draws.cols());
  const int s = m * n;
  std::vector<double> flat(s);
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < n; ++i) flat[c * n + i] = draws(c, i);
  std::vector<int> order(s);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return flat[a] < flat[b]; });
  std::vector<double> rank(s);
  int i = 0;
  while (i < s) {
    int j = i;
    while (j + 1 < s && flat[order[j + 1]] == flat[order[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // 1-based average rank
    for (int t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  Eigen::MatrixXd z(m, n);
  for (int c = 0; c < m; ++c)
    for (int k = 0; k < n; ++k)
      z(c, k) = inv_norm_cdf((rank[c * n + k] - 0.375) / (s + 0.25));
  return z;
}

void check_not_constant(const Eigen::MatrixXd& draws) {
  const double lo = draws.minCoeff();
  const double hi = draws.maxCoeff();
  if (!(hi > lo))
    fail(ErrorKind::ConstantDraws, "all draws are equal; statistic undefined");
  if (!draws.allFinite())
    fail(ErrorKind::ConstantDraws, "non-finite draws");
}

double rhat_on(const Eigen::MatrixXd& z) {
  const int m = static_cast<int>(z.rows());
  const int n = static_cast<int>(z.cols());
  Eigen::VectorXd means = z.rowwise().mean();
  double w = 0.0;
  for (int c = 0; c < m; ++c)
    w += (z.row(c).array() - means[c]).square().sum() / (n - 1);
  w /= m;
  const double grand = means.mean();
  const double b = n * (means.array() - grand).square().sum() / (m - 1);
  if (!(w > 0.0)) fail(ErrorKind::ConstantDraws, "zero within-chain variance");
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

}  // namespace

double split_rhat(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 2) fail(ErrorKind::ConstantDraws, "need at least 2 chains");
  if (draws.cols() < 4) fail(ErrorKind::ConstantDraws, "need at least 4 draws");
  check_not_constant(draws);
  return rhat_on(rank_normalize(split_chains(draws)));
}

double ess_bulk(const Eigen::MatrixXd& draws) {
  if (draws.cols() < 4) fail(ErrorKind::ConstantDraws, "need at least 4 draws");
  check_not_constant(draws);
  Eigen::MatrixXd z = rank_normalize(split_chains(draws));
  const int m = static_cast<int>(z.rows());
  const int n = static_cast<int>(z.cols());
  const double s_total = static_cast<double>(m) * n;

  Eigen::VectorXd means = z.rowwise().mean();
  Eigen::MatrixXd centered = z.colwise() - means;
  // biased autocovariances per chain, computed on demand
  auto acov = [&](int lag) {
    double total = 0.0;
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (int i = 0; i + lag < n; ++i) s += centered(c, i) * centered(c, i + lag);
      total += s / n;
    }
    return total / m;
  };

  const double acov0 = acov(0);
  const double mean_var = acov0 * n / (n - 1.0);
  double var_plus = mean_var * (n - 1.0) / n;
  if (m > 1) {
    const double grand = means.mean();
    var_plus += (means.array() - grand).square().sum() / (m - 1);
  }
  if (!(var_plus > 0.0)) fail(ErrorKind::ConstantDraws, "zero variance");

  auto rho = [&](int lag) { return 1.0 - (mean_var - acov(lag)) / var_plus; };

  // Geyer pairs: P_k = rho_{2k} + rho_{2k+1}; keep the initial positive
  // sequence and force it monotone non-increasing.
  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::max();
  for (int k = 0; 2 * k + 1 < n; ++k) {
    double pair = (2 * k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau -= 1.0;
  tau = std::max(tau, 1.0 / std::log10(s_total + 10.0));
  double ess = s_total / tau;
  return std::min(ess, 1.5 * s_total);
}

double efficiency(double min_ess, double wall_seconds) {
  if (!(wall_seconds > 0.0))
    fail(ErrorKind::ConfigError, "wall time must be positive");
  return min_ess / wall_seconds;
}

double log_efficiency(double min_ess, double wall_seconds) {
  return std::log(efficiency(min_ess, wall_seconds));
}

ConvergenceReport convergence_report(const DrawMatrix& draws,
                                     double wall_seconds) {
  ConvergenceReport report;
  report.max_rhat = 0.0;
  report.min_ess = std::numeric_limits<double>::infinity();
  for (int j = 0; j < draws.dim(); ++j) {
    ParameterDiagnostic pd;
    pd.name = j < static_cast<int>(draws.names.size()) ? draws.names[j]
                                                       : std::to_string(j);
    Eigen::MatrixXd slab = draws.parameter_matrix(j);
    try {
      pd.rhat = split_rhat(slab);
      pd.ess = ess_bulk(slab);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ConstantDraws) throw;
      pd.defined = false;
    }
    if (pd.defined) {
      report.max_rhat = std::max(report.max_rhat, pd.rhat);
      report.min_ess = std::min(report.min_ess, pd.ess);
    }
    report.parameters.push_back(std::move(pd));
  }
  if (!std::isfinite(report.min_ess)) report.min_ess = 0.0;
  report.efficiency =
      wall_seconds > 0.0 ? report.min_ess / wall_seconds : 0.0;
  return report;
}

PpdSummary posterior_predictive(const Posterior& posterior,
                                const DrawMatrix& draws, int n_rep,
                                std::uint64_t seed) {
  if (draws.draws.rows() == 0)
    fail(ErrorKind::ConfigError, "no draws for posterior predictive");
  if (n_rep < 1) fail(ErrorKind::ConfigError, "n_rep must be >= 1");
  Rng rng(seed);
  const int n = posterior.n_obs();
  PpdSummary summary;
  summary.replicates.resize(n_rep, n);
  const int total = static_cast<int>(draws.draws.rows());
  for (int r = 0; r < n_rep; ++r) {
    const int idx = static_cast<int>(rng.below(total));
    Eigen::VectorXd x = draws.draws.row(idx).transpose();
    summary.replicates.row(r) = posterior.simulate_replicate(x, rng).transpose();
  }
  const Eigen::VectorXd& y = posterior.response_fit_scale();
  summary.mean_data = y.mean();
  summary.sd_data = std::sqrt((y.array() - summary.mean_data).square().sum() /
                              (y.size() - 1));
  summary.mean_ppd = summary.replicates.mean();
  const double sd_num =
      (summary.replicates.array() - summary.mean_ppd).square().sum();
  summary.sd_ppd = std::sqrt(sd_num / (summary.replicates.size() - 1));
  return summary;
}

}  // namespace spfit
