#include "spfit/nuts.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "spfit/common.hpp"
#include "spfit/csvio.hpp"

namespace spfit {

namespace {

constexpr double kDivergenceThreshold = 1000.0;

double kinetic(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_mass) {
  return 0.5 * p.dot(inv_mass.cwiseProduct(p));
}

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct TreeEnd {
  Eigen::VectorXd q, p, grad;
  double logp = 0.0;
};

struct Tree {
  TreeEnd minus, plus;
  Eigen::VectorXd q_sample;
  double lp_sample = 0.0;
  double h_sample = 0.0;
  double log_sum_w = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  int n_leaves = 0;
  bool divergent = false;
  bool turned = false;
};

bool uturn(const TreeEnd& minus, const TreeEnd& plus,
           const Eigen::VectorXd& inv_mass) {
  Eigen::VectorXd dq = plus.q - minus.q;
  return dq.dot(inv_mass.cwiseProduct(minus.p)) < 0.0 ||
         dq.dot(inv_mass.cwiseProduct(plus.p)) < 0.0;
}

struct TreeBuilder {
  const LogDensity& target;
  double step;
  const Eigen::VectorXd& inv_mass;
  double h0;
  Rng& rng;

  Tree leaf(TreeEnd end, int direction) {
    // one leapfrog step from `end` in `direction`
    PhaseState s{end.q, end.p};
    Eigen::VectorXd grad = end.grad;
    double logp = leapfrog(target, s, grad, direction * step, inv_mass);
    Tree t;
    TreeEnd e{std::move(s.q), std::move(s.p), std::move(grad), logp};
    double h = std::isfinite(logp) ? -logp + kinetic(e.p, inv_mass)
                                   : std::numeric_limits<double>::infinity();
    if (!e.grad.allFinite()) h = std::numeric_limits<double>::infinity();
    t.n_leaves = 1;
    t.sum_accept = std::isfinite(h) ? std::min(1.0, std::exp(h0 - h)) : 0.0;
    t.divergent = !(h - h0 <= kDivergenceThreshold);
    t.log_sum_w = t.divergent ? -std::numeric_limits<double>::infinity() : h0 - h;
    t.q_sample = e.q;
    t.lp_sample = logp;
    t.h_sample = h;
    t.minus = e;
    t.plus = std::move(e);
    return t;
  }

  Tree build(int depth, const TreeEnd& from, int direction) {
    if (depth == 0) return leaf(from, direction);
    Tree first = build(depth - 1, from, direction);
    if (first.divergent || first.turned) return first;
    const TreeEnd& grow_end = direction > 0 ? first.plus : first.minus;
    Tree second = build(depth - 1, grow_end, direction);

    Tree t;
    t.divergent = second.divergent;
    t.turned = second.turned;
    t.n_leaves = first.n_leaves + second.n_leaves;
    t.sum_accept = first.sum_accept + second.sum_accept;
    t.log_sum_w = log_sum_exp(first.log_sum_w, second.log_sum_w);
    // unbiased multinomial choice between subtrees
    double p_second = std::exp(second.log_sum_w - t.log_sum_w);
    if (std::isfinite(second.log_sum_w) && rng.uniform() < p_second) {
      t.q_sample = second.q_sample;
      t.lp_sample = second.lp_sample;
      t.h_sample = second.h_sample;
    } else {
      t.q_sample = first.q_sample;
      t.lp_sample = first.lp_sample;
      t.h_sample = first.h_sample;
    }
    if (direction > 0) {
      t.minus = first.minus;
      t.plus = second.plus;
    } else {
      t.minus = second.minus;
      t.plus = first.plus;
    }
    if (!t.divergent && !t.turned) t.turned = uturn(t.minus, t.plus, inv_mass);
    return t;
  }
};

}  // namespace

double leapfrog(const LogDensity& target, PhaseState& state, Eigen::VectorXd& grad,
                double step, const Eigen::VectorXd& inv_mass) {
  state.p += 0.5 * step * grad;
  state.q += step * inv_mass.cwiseProduct(state.p);
  double logp = target.logp_grad(state.q, grad);
  state.p += 0.5 * step * grad;
  return logp;
}

TransitionResult nuts_transition(const LogDensity& target, const Eigen::VectorXd& q0,
                                 double step, const Eigen::VectorXd& inv_mass,
                                 int max_treedepth, Rng& rng) {
  const int n = target.dim();
  TreeEnd start;
  start.q = q0;
  start.p.resize(n);
  for (int i = 0; i < n; ++i) start.p[i] = rng.normal() / std::sqrt(inv_mass[i]);
  start.grad.resize(n);
  start.logp = target.logp_grad(start.q, start.grad);
  if (!std::isfinite(start.logp) || !start.grad.allFinite())
    fail(ErrorKind::NonFiniteGradient, "non-finite target at transition start");
  const double h0 = -start.logp + kinetic(start.p, inv_mass);

  Tree tree;
  tree.minus = start;
  tree.plus = start;
  tree.q_sample = start.q;
  tree.lp_sample = start.logp;
  tree.h_sample = h0;
  tree.log_sum_w = 0.0;  // weights relative to exp(-h0)
  tree.sum_accept = 0.0;
  tree.n_leaves = 0;

  TreeBuilder builder{target, step, inv_mass, h0, rng};
  const int doublings = std::max(1, max_treedepth);
  int depth = 0;
  bool divergent = false;
  for (int d = 0; d < doublings; ++d) {
    int direction = rng.uniform() < 0.5 ? -1 : 1;
    const TreeEnd& from = direction > 0 ? tree.plus : tree.minus;
    Tree sub = builder.build(d, from, direction);
    tree.sum_accept += sub.sum_accept;
    tree.n_leaves += sub.n_leaves;
    depth = d + 1;
    if (sub.divergent) {
      divergent = true;
      break;
    }
    if (sub.turned) break;
    // biased progressive sampling toward the new subtree
    if (std::log(rng.uniform()) < sub.log_sum_w - tree.log_sum_w) {
      tree.q_sample = sub.q_sample;
      tree.lp_sample = sub.lp_sample;
      tree.h_sample = sub.h_sample;
    }
    tree.log_sum_w = log_sum_exp(tree.log_sum_w, sub.log_sum_w);
    if (direction > 0)
      tree.plus = sub.plus;
    else
      tree.minus = sub.minus;
    if (uturn(tree.minus, tree.plus, inv_mass)) break;
  }

  TransitionResult result;
  result.q = tree.q_sample;
  result.telemetry.lp = tree.lp_sample;
  result.telemetry.energy = tree.h_sample;
  result.telemetry.accept_stat =
      tree.n_leaves > 0 ? tree.sum_accept / tree.n_leaves : 0.0;
  result.telemetry.treedepth = depth;
  result.telemetry.divergent = divergent;
  return result;
}

namespace {

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int count = 0;
  static constexpr double gamma = 0.05;
  static constexpr double t0 = 10.0;
  static constexpr double kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    count = 0;
  }
  double update(double accept, double target_accept) {
    ++count;
    const double m = count;
    h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (target_accept - accept) / (m + t0);
    log_eps = mu - std::sqrt(m) / gamma * h_bar;
    const double w = std::pow(m, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    if (std::exp(log_eps) < 1e-10)
      fail(ErrorKind::AdaptationFailed, "step size underflow");
    return std::exp(log_eps);
  }
  double final_eps() const { return std::exp(log_eps_bar); }
};

double initial_step_size(const LogDensity& target, const Eigen::VectorXd& q0,
                         const Eigen::VectorXd& inv_mass, Rng& rng) {
  const int n = target.dim();
  double eps = 1.0;
  Eigen::VectorXd p0(n);
  for (int i = 0; i < n; ++i) p0[i] = rng.normal() / std::sqrt(inv_mass[i]);
  Eigen::VectorXd grad0(n);
  double logp0 = target.logp_grad(q0, grad0);
  double h0 = -logp0 + kinetic(p0, inv_mass);

  auto h_after = [&](double step) {
    PhaseState s{q0, p0};
    Eigen::VectorXd grad = grad0;
    double lp = leapfrog(target, s, grad, step, inv_mass);
    if (!std::isfinite(lp)) return std::numeric_limits<double>::infinity();
    return -lp + kinetic(s.p, inv_mass);
  };

  double delta_h = h0 - h_after(eps);
  const bool increase = delta_h > std::log(0.5);
  for (int iter = 0; iter < 100; ++iter) {
    if (increase) {
      eps *= 2.0;
      if (h0 - h_after(eps) <= std::log(0.5)) {
        eps *= 0.5;
        break;
      }
    } else {
      eps *= 0.5;
      if (h0 - h_after(eps) > std::log(0.5)) break;
    }
    if (eps < 1e-12 || eps > 1e7) break;
  }
  return std::max(eps, 1e-12);
}

struct Welford {
  int n = 0;
  Eigen::VectorXd mean, m2;
  void init(int dim) {
    n = 0;
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
  }
  void add(const Eigen::VectorXd& x) {
    ++n;
    Eigen::VectorXd d = x - mean;
    mean += d / n;
    m2 += d.cwiseProduct(x - mean);
  }
  // regularized variance estimate as used for metric adaptation
  Eigen::VectorXd regularized_variance() const {
    Eigen::VectorXd var = m2 / std::max(1, n - 1);
    const double w = static_cast<double>(n) / (n + 5.0);
    return (w * var.array() + 1e-3 * (1.0 - w)).matrix();
  }
};

struct ChainOutput {
  Eigen::MatrixXd draws;
  std::vector<DrawTelemetry> telemetry;
  double wall_seconds = 0.0;
};

ChainOutput run_one_chain(const LogDensity& target, const SamplerConfig& config,
                          Eigen::VectorXd init, Rng rng) {
  const int n = target.dim();
  const int n_kept = config.total_iter - config.warmup;
  const auto start_time = std::chrono::steady_clock::now();

  // ---- warmup: dual averaging + expanding mass windows, last 50 step-only
  Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(n);
  double eps = initial_step_size(target, init, inv_mass, rng);
  DualAveraging da;
  da.restart(eps);

  const int mass_end = std::max(0, config.warmup - 50);
  int window_size = 25;
  int window_start = 0;
  int window_stop = mass_end >= 25 ? std::min(25, mass_end) : 0;
  Welford acc;
  acc.init(n);

  Eigen::VectorXd q = std::move(init);
  for (int it = 0; it < config.warmup; ++it) {
    TransitionResult tr =
        nuts_transition(target, q, eps, inv_mass, config.max_treedepth, rng);
    q = tr.q;
    eps = da.update(tr.telemetry.accept_stat, config.adapt_delta);

    if (window_stop > 0 && it < mass_end) {
      acc.add(q);
      if (it + 1 == window_stop) {
        inv_mass = acc.regularized_variance();
        acc.init(n);
        window_size *= 2;
        window_start = window_stop;
        window_stop = window_start + window_size;
        if (window_stop + 2 * window_size > mass_end) window_stop = mass_end;
        window_stop = std::min(window_stop, mass_end);
        // a fresh metric invalidates the step size; re-anchor dual averaging
        eps = initial_step_size(target, q, inv_mass, rng);
        da.restart(eps);
      }
    }
  }
  eps = da.final_eps();

  // ---- sampling
  ChainOutput out;
  out.draws.resize(n_kept, n);
  out.telemetry.resize(n_kept);
  for (int it = 0; it < n_kept; ++it) {
    TransitionResult tr =
        nuts_transition(target, q, eps, inv_mass, config.max_treedepth, rng);
    q = tr.q;
    out.draws.row(it) = q.transpose();
    out.telemetry[it] = tr.telemetry;
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
          .count();
  return out;
}

Eigen::VectorXd draw_init(const LogDensity& target, const SamplerConfig& config,
                          Rng& rng) {
  const int n = target.dim();
  Eigen::VectorXd grad(n);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i)
      q[i] = rng.uniform(-config.init_radius, config.init_radius);
    double lp = target.logp_grad(q, grad);
    if (std::isfinite(lp) && grad.allFinite()) return q;
  }
  fail(ErrorKind::NonFiniteInit,
       "no finite initial point found in 100 attempts");
}

}  // namespace

ChainState adapt_chain(const LogDensity& target, const SamplerConfig& config,
                       const Eigen::VectorXd& init, Rng& rng) {
  if (config.warmup < 20)
    fail(ErrorKind::AdaptationFailed, "warmup must be at least 20 iterations");
  SamplerConfig warm = config;
  warm.total_iter = config.warmup + 1;
  // reuse the chain driver for a single warmup pass
  const int n = target.dim();
  Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(n);
  double eps = initial_step_size(target, init, inv_mass, rng);
  DualAveraging da;
  da.restart(eps);
  const int mass_end = std::max(0, config.warmup - 50);
  int window_size = 25;
  int window_stop = mass_end >= 25 ? std::min(25, mass_end) : 0;
  Welford acc;
  acc.init(n);
  Eigen::VectorXd q = init;
  for (int it = 0; it < config.warmup; ++it) {
    TransitionResult tr =
        nuts_transition(target, q, eps, inv_mass, config.max_treedepth, rng);
    q = tr.q;
    eps = da.update(tr.telemetry.accept_stat, config.adapt_delta);
    if (window_stop > 0 && it < mass_end) {
      acc.add(q);
      if (it + 1 == window_stop) {
        inv_mass = acc.regularized_variance();
        acc.init(n);
        window_size *= 2;
        int window_start = window_stop;
        window_stop = window_start + window_size;
        if (window_stop + 2 * window_size > mass_end) window_stop = mass_end;
        window_stop = std::min(window_stop, mass_end);
        eps = initial_step_size(target, q, inv_mass, rng);
        da.restart(eps);
      }
    }
  }
  ChainState state;
  state.position = q;
  state.step_size = da.final_eps();
  state.inv_mass_diag = inv_mass;
  return state;
}

DrawMatrix run_chains(const LogDensity& target, const SamplerConfig& config,
                      const std::optional<std::vector<Eigen::VectorXd>>& inits) {
  if (target.dim() < 1)
    fail(ErrorKind::DimensionMismatch, "target dimension must be >= 1");
  if (config.chains < 1) fail(ErrorKind::ConfigError, "chains must be >= 1");
  if (config.warmup < 20)
    fail(ErrorKind::AdaptationFailed, "warmup must be at least 20 iterations");
  if (config.warmup >= config.total_iter)
    fail(ErrorKind::ConfigError, "total_iter must exceed warmup");
  if (!(config.adapt_delta > 0.0 && config.adapt_delta < 1.0))
    fail(ErrorKind::ConfigError, "adapt_delta must lie in (0,1)");
  if (inits && static_cast<int>(inits->size()) != config.chains)
    fail(ErrorKind::ConfigError, "need one init per chain");

  const int n = target.dim();
  std::vector<ChainOutput> outputs(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);

  auto worker = [&](int chain) {
    try {
      Rng rng = Rng::chain_stream(config.seed, static_cast<std::uint64_t>(chain));
      Eigen::VectorXd init;
      if (inits) {
        init = (*inits)[chain];
        if (init.size() != n)
          fail(ErrorKind::DimensionMismatch, "init has wrong dimension");
        Eigen::VectorXd grad(n);
        if (!std::isfinite(target.logp_grad(init, grad)))
          fail(ErrorKind::NonFiniteInit, "supplied init has non-finite density");
      } else {
        init = draw_init(target, config, rng);
      }
      outputs[chain] = run_one_chain(target, config, std::move(init), rng);
    } catch (...) {
      errors[chain] = std::current_exception();
    }
  };

  if (config.parallel_chains && config.chains > 1) {
    std::vector<std::thread> threads;
    threads.reserve(config.chains);
    for (int c = 0; c < config.chains; ++c) threads.emplace_back(worker, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < config.chains; ++c) worker(c);
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  DrawMatrix dm;
  dm.n_chains = config.chains;
  dm.n_kept = config.total_iter - config.warmup;
  dm.draws.resize(config.chains * dm.n_kept, n);
  dm.telemetry.resize(config.chains * dm.n_kept);
  dm.wall_seconds.resize(config.chains);
  dm.total_wall_seconds = 0.0;
  for (int c = 0; c < config.chains; ++c) {
    dm.draws.middleRows(c * dm.n_kept, dm.n_kept) = outputs[c].draws;
    std::copy(outputs[c].telemetry.begin(), outputs[c].telemetry.end(),
              dm.telemetry.begin() + c * dm.n_kept);
    dm.wall_seconds[c] = outputs[c].wall_seconds;
    dm.total_wall_seconds += outputs[c].wall_seconds;
  }
  for (int j = 0; j < n; ++j) dm.names.push_back("theta[" + std::to_string(j) + "]");
  return dm;
}

Eigen::MatrixXd DrawMatrix::parameter_matrix(int j) const {
  Eigen::MatrixXd out(n_chains, n_kept);
  for (int c = 0; c < n_chains; ++c)
    for (int i = 0; i < n_kept; ++i) out(c, i) = value(c, i, j);
  return out;
}

Eigen::VectorXd DrawMatrix::parameter_mean() const {
  return draws.colwise().mean().transpose();
}

int DrawMatrix::divergence_count() const {
  int k = 0;
  for (const auto& t : telemetry) k += t.divergent ? 1 : 0;
  return k;
}

void write_draws_csv(std::ostream& os, const DrawMatrix& dm) {
  os << "chain,iter,lp__,divergent__,treedepth__,energy__,accept_stat__";
  for (const auto& nm : dm.names) os << ',' << csv_quote(nm);
  os << '\n';
  os.precision(17);
  for (int c = 0; c < dm.n_chains; ++c)
    for (int i = 0; i < dm.n_kept; ++i) {
      const auto& t = dm.telemetry[dm.row(c, i)];
      os << c << ',' << i << ',' << t.lp << ',' << (t.divergent ? 1 : 0) << ','
         << t.treedepth << ',' << t.energy << ',' << t.accept_stat;
      for (int j = 0; j < dm.dim(); ++j) os << ',' << dm.value(c, i, j);
      os << '\n';
    }
}

DrawMatrix read_draws_csv(std::istream& is) {
  CsvTable table = read_csv(is);
  const int n_rows = table.n_rows();
  if (table.columns.size() < 8 || n_rows == 0)
    fail(ErrorKind::ConfigError, "draws csv missing columns");
  DrawMatrix dm;
  const int dim = static_cast<int>(table.columns.size()) - 7;
  for (int j = 0; j < dim; ++j) dm.names.push_back(table.columns[7 + j]);
  int max_chain = 0;
  for (int r = 0; r < n_rows; ++r)
    max_chain = std::max(max_chain, static_cast<int>(table.cell(r, 0)));
  dm.n_chains = max_chain + 1;
  dm.n_kept = n_rows / dm.n_chains;
  if (dm.n_kept * dm.n_chains != n_rows)
    fail(ErrorKind::ConfigError, "draws csv has ragged chains");
  dm.draws.resize(n_rows, dim);
  dm.telemetry.resize(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    const int chain = static_cast<int>(table.cell(r, 0));
    const int iter = static_cast<int>(table.cell(r, 1));
    const int row = chain * dm.n_kept + iter;
    DrawTelemetry t;
    t.lp = table.cell(r, 2);
    t.divergent = table.cell(r, 3) != 0.0;
    t.treedepth = static_cast<int>(table.cell(r, 4));
    t.energy = table.cell(r, 5);
    t.accept_stat = table.cell(r, 6);
    dm.telemetry[row] = t;
    for (int j = 0; j < dim; ++j) dm.draws(row, j) = table.cell(r, 7 + j);
  }
  dm.wall_seconds.assign(dm.n_chains, 0.0);
  return dm;
}

void save_draws_csv(const std::string& path, const DrawMatrix& dm) {
  std::ostringstream os;
  write_draws_csv(os, dm);
  write_file_atomic(path, os.str());
}

DrawMatrix load_draws_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::InputNotFound, "cannot open " + path);
  return read_draws_csv(is);
}

}  // namespace spfit
