#include "spfit/loo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spfit/common.hpp"

namespace spfit {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double gpd_quantile(double p, double khat, double sigma) {
  if (std::abs(khat) < 1e-12) return -sigma * std::log1p(-p);
  return sigma * (std::pow(1.0 - p, -khat) - 1.0) / khat;
}

}  // namespace

GpdFit gpd_fit(const Eigen::VectorXd& tail) {
  const int n = static_cast<int>(tail.size());
  if (n < 5)
    fail(ErrorKind::TooFewTailSamples,
         "generalized Pareto fit needs at least 5 tail samples");
  std::vector<double> x(tail.data(), tail.data() + n);
  std::sort(x.begin(), x.end());
  if (!(x.front() > 0.0))
    fail(ErrorKind::TooFewTailSamples, "tail exceedances must be positive");

  const int m = 30 + static_cast<int>(std::floor(std::sqrt(n)));
  const double x_star = x[static_cast<int>(std::floor(n / 4.0 + 0.5)) - 1 >= 0
                              ? static_cast<int>(std::floor(n / 4.0 + 0.5)) - 1
                              : 0];
  const double x_max = x[n - 1];

  Eigen::VectorXd theta(m), logl(m);
  for (int j = 0; j < m; ++j) {
    theta[j] = 1.0 / x_max + (1.0 - std::sqrt(m / (j + 0.5))) / (3.0 * x_star);
    double k = 0.0;
    for (double xi : x) k += std::log1p(-theta[j] * xi);
    k /= n;
    logl[j] = n * (std::log(-theta[j] / k) - k - 1.0);
  }
  // posterior-mean theta with self-normalized profile weights
  double theta_hat = 0.0;
  for (int j = 0; j < m; ++j) {
    double denom = 0.0;
    for (int l = 0; l < m; ++l) denom += std::exp(logl[l] - logl[j]);
    theta_hat += theta[j] / denom;
  }
  double k = 0.0;
  for (double xi : x) k += std::log1p(-theta_hat * xi);
  k /= n;

  GpdFit fit;
  fit.sigma = -k / theta_hat;
  // weakly informative shape adjustment toward 0.5
  fit.khat = (n * k + 5.0) / (n + 10.0);
  return fit;
}

double LooReport::khat_max() const {
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < pareto_k.size(); ++i) {
    if (khat_estimable[i]) {
      mx = std::max(mx, pareto_k[i]);
      any = true;
    }
  }
  return any ? mx : std::numeric_limits<double>::quiet_NaN();
}

LooReport psis_loo(const Eigen::MatrixXd& loglik, bool smooth) {
  const int s = static_cast<int>(loglik.rows());
  const int n = static_cast<int>(loglik.cols());
  if (s < 2 || n < 1)
    fail(ErrorKind::NonFiniteLoglik, "log-likelihood matrix is degenerate");
  if (!loglik.allFinite())
    fail(ErrorKind::NonFiniteLoglik, "non-finite log-likelihood values");

  LooReport report;
  report.n_obs = n;
  report.n_draws = s;
  report.elpd_i.resize(n);
  report.pareto_k.setConstant(n, std::numeric_limits<double>::quiet_NaN());
  report.khat_estimable.assign(n, false);
  report.khat_threshold = std::min(1.0 - 1.0 / std::log10(static_cast<double>(s)), 0.7);

  const int tail_len = static_cast<int>(
      std::ceil(std::min(0.2 * s, 3.0 * std::sqrt(static_cast<double>(s)))));

  double p_loo = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd ll = loglik.col(i);
    const double lpd_i = log_sum_exp(ll) - std::log(static_cast<double>(s));
    Eigen::VectorXd lw = -ll;  // raw importance log ratios
    const double shift = lw.maxCoeff();
    lw.array() -= shift;

    if (lw.maxCoeff() - lw.minCoeff() < 1e-13) {
      // zero-variance weights: naive estimate, k-hat not estimable
      report.elpd_i[i] = lpd_i;
      p_loo += lpd_i - report.elpd_i[i];
      continue;
    }

    if (smooth && tail_len >= 5 && tail_len < s) {
      std::vector<int> order(s);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return lw[a] < lw[b]; });
      const double cut = std::exp(lw[order[s - tail_len - 1]]);
      Eigen::VectorXd exceed(tail_len);
      bool positive = true;
      for (int j = 0; j < tail_len; ++j) {
        exceed[j] = std::exp(lw[order[s - tail_len + j]]) - cut;
        if (!(exceed[j] > 0.0)) positive = false;
      }
      if (positive) {
        GpdFit fit = gpd_fit(exceed);
        if (std::isfinite(fit.khat) && fit.sigma > 0.0) {
          for (int j = 0; j < tail_len; ++j) {
            const double q = (j + 0.5) / tail_len;
            double w = cut + gpd_quantile(q, fit.khat, fit.sigma);
            // truncate at the largest raw ratio
            lw[order[s - tail_len + j]] = std::min(std::log(w), 0.0);
          }
          report.pareto_k[i] = fit.khat;
          report.khat_estimable[i] = true;
        }
      }
    }

    const double log_norm = log_sum_exp(lw);
    Eigen::VectorXd lw_ll = lw + ll;
    report.elpd_i[i] = log_sum_exp(lw_ll) - log_norm;
    p_loo += lpd_i - report.elpd_i[i];
  }
  report.elpd_loo = report.elpd_i.sum();
  report.p_loo = p_loo;
  return report;
}

std::vector<LooComparisonRow> loo_compare(const std::vector<LooReport>& reports,
                                          const std::vector<std::string>& labels) {
  if (reports.empty()) fail(ErrorKind::ConfigError, "nothing to compare");
  if (labels.size() != reports.size())
    fail(ErrorKind::ConfigError, "labels do not match reports");
  const int n = reports[0].n_obs;
  for (const auto& r : reports)
    if (r.n_obs != n)
      fail(ErrorKind::MismatchedObservations,
           "reports cover different observation sets");

  std::vector<int> order(reports.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return reports[a].elpd_loo > reports[b].elpd_loo;
  });

  const LooReport& best = reports[order[0]];
  std::vector<LooComparisonRow> rows;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const LooReport& r = reports[order[rank]];
    LooComparisonRow row;
    row.label = labels[order[rank]];
    row.elpd_loo = r.elpd_loo;
    row.p_loo = r.p_loo;
    row.khat_max = r.khat_max();
    if (rank == 0) {
      row.elpd_diff = 0.0;
      row.se_diff = 0.0;
    } else {
      Eigen::VectorXd diff = r.elpd_i - best.elpd_i;
      row.elpd_diff = diff.sum();
      const double mean = diff.mean();
      const double var =
          n > 1 ? (diff.array() - mean).square().sum() / (n - 1) : 0.0;
      row.se_diff = std::sqrt(n * var);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace spfit
