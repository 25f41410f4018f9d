#ifndef SPFIT_NUTS_HPP
#define SPFIT_NUTS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spfit/posterior.hpp"
#include "spfit/rng.hpp"

namespace spfit {

// Minimal target interface the sampler consumes.
struct LogDensity {
  virtual ~LogDensity() = default;
  virtual int dim() const = 0;
  virtual double logp_grad(const Eigen::VectorXd& x,
                           Eigen::VectorXd& grad) const = 0;
};

class PosteriorTarget : public LogDensity {
 public:
  explicit PosteriorTarget(const Posterior& post) : post_(&post) {}
  int dim() const override { return post_->dim(); }
  double logp_grad(const Eigen::VectorXd& x,
                   Eigen::VectorXd& grad) const override {
    return post_->logp_grad(x, grad);
  }

 private:
  const Posterior* post_;
};

struct SamplerConfig {
  int chains = 4;
  int warmup = 700;
  int total_iter = 1500;  // per chain, includes warmup
  double adapt_delta = 0.95;
  int max_treedepth = 13;
  std::uint64_t seed = 1;
  double init_radius = 2.0;
  bool parallel_chains = true;
};

struct DrawTelemetry {
  double lp = 0.0;
  double energy = 0.0;
  double accept_stat = 0.0;
  int treedepth = 0;
  bool divergent = false;
};

struct DrawMatrix {
  std::vector<std::string> names;
  int n_chains = 0;
  int n_kept = 0;  // post-warmup draws per chain
  Eigen::MatrixXd draws;  // (n_chains * n_kept) x dim, chain-major
  std::vector<DrawTelemetry> telemetry;
  std::vector<double> wall_seconds;  // per chain
  double total_wall_seconds = 0.0;

  int dim() const { return static_cast<int>(draws.cols()); }
  int row(int chain, int iter) const { return chain * n_kept + iter; }
  double value(int chain, int iter, int j) const {
    return draws(row(chain, iter), j);
  }
  // chains x n_kept slab for one parameter
  Eigen::MatrixXd parameter_matrix(int j) const;
  Eigen::VectorXd parameter_mean() const;  // across all kept draws, per parameter
  int divergence_count() const;
};

struct PhaseState {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

// One velocity-Verlet step; returns logp at the new position and leaves the
// gradient there in `grad` (which must hold the gradient at the entry state).
double leapfrog(const LogDensity& target, PhaseState& state, Eigen::VectorXd& grad,
                double step, const Eigen::VectorXd& inv_mass);

struct TransitionResult {
  Eigen::VectorXd q;
  DrawTelemetry telemetry;
};

TransitionResult nuts_transition(const LogDensity& target, const Eigen::VectorXd& q0,
                                 double step, const Eigen::VectorXd& inv_mass,
                                 int max_treedepth, Rng& rng);

struct ChainState {
  Eigen::VectorXd position;
  double step_size = 1.0;
  Eigen::VectorXd inv_mass_diag;
};

// Warmup driver: dual-averaging step size + windowed diagonal mass.
ChainState adapt_chain(const LogDensity& target, const SamplerConfig& config,
                       const Eigen::VectorXd& init, Rng& rng);

DrawMatrix run_chains(const LogDensity& target, const SamplerConfig& config,
                      const std::optional<std::vector<Eigen::VectorXd>>& inits =
                          std::nullopt);

// CSV with columns chain,iter,lp__,divergent__,treedepth__,energy__,
// accept_stat__ followed by one column per parameter.
void write_draws_csv(std::ostream& os, const DrawMatrix& draws);
DrawMatrix read_draws_csv(std::istream& is);
void save_draws_csv(const std::string& path, const DrawMatrix& draws);
DrawMatrix load_draws_csv(const std::string& path);

}  // namespace spfit

#endif
