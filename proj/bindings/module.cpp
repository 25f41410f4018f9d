#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spfit/common.hpp"
#include "spfit/diagnostics.hpp"
#include "spfit/harness.hpp"
#include "spfit/loo.hpp"

namespace py = pybind11;
using namespace spfit;

namespace {

// Exception translation keeps the error kind visible from python.
void translate_error(const Error& e) {
  PyErr_SetString(is_input_error(e.kind()) ? PyExc_ValueError
                                           : PyExc_RuntimeError,
                  e.what());
}

Dataset dataset_from_arrays(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            const std::vector<std::string>& x_names,
                            const Eigen::MatrixXd& coords) {
  Dataset data;
  data.y = y;
  data.x = x;
  data.x_names = x_names;
  data.coords = coords;
  return data;
}

struct PyModel {
  BuiltModel built;

  static PyModel build(const std::string& model, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& x,
                       const std::vector<std::string>& x_names,
                       const Eigen::MatrixXd& coords,
                       const std::map<std::string, std::string>& options) {
    KvConfig kv;
    for (const auto& [k, v] : options) kv.set(k, v);
    PyModel out;
    out.built = build_model(FitConfig::from_kv(kv, model),
                            dataset_from_arrays(y, x, x_names, coords));
    return out;
  }

  int dim() const { return built.posterior.dim(); }
  std::vector<std::string> names() const { return built.posterior.names(); }

  double logp(const Eigen::VectorXd& x) const { return built.posterior.logp(x); }

  std::pair<double, Eigen::VectorXd> logp_grad(const Eigen::VectorXd& x) const {
    Eigen::VectorXd grad;
    double value = built.posterior.logp_grad(x, grad);
    return {value, grad};
  }

  Eigen::VectorXd pointwise_loglik(const Eigen::VectorXd& x) const {
    return built.posterior.pointwise_loglik(x);
  }

  py::dict sample(int chains, int warmup, int total_iter, double adapt_delta,
                  int max_treedepth, std::uint64_t seed) const {
    SamplerConfig cfg;
    cfg.chains = chains;
    cfg.warmup = warmup;
    cfg.total_iter = total_iter;
    cfg.adapt_delta = adapt_delta;
    cfg.max_treedepth = max_treedepth;
    cfg.seed = seed;
    FitResult fit = fit_model(built, cfg);

    py::dict out;
    out["draws"] = fit.draws.draws;
    out["names"] = fit.draws.names;
    out["n_chains"] = fit.draws.n_chains;
    out["n_kept"] = fit.draws.n_kept;
    out["wall_seconds"] = fit.draws.wall_seconds;
    out["divergences"] = fit.divergences;
    out["max_rhat"] = fit.convergence.max_rhat;
    out["min_ess"] = fit.convergence.min_ess;
    out["efficiency"] = fit.convergence.efficiency;
    Eigen::VectorXd lp(fit.draws.telemetry.size());
    for (std::size_t i = 0; i < fit.draws.telemetry.size(); ++i)
      lp[static_cast<int>(i)] = fit.draws.telemetry[i].lp;
    out["lp"] = lp;
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_spfit, m) {
  m.doc() = "Bayesian spatial models: SPDE-GMRF and low-rank TPS effects";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      translate_error(e);
    }
  });

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("vertices",
                             [](const Mesh& mesh) { return mesh.vertices; })
      .def_property_readonly("triangles",
                             [](const Mesh& mesh) {
                               Eigen::MatrixXi t(mesh.triangles.size(), 3);
                               for (std::size_t i = 0; i < mesh.triangles.size(); ++i)
                                 for (int j = 0; j < 3; ++j)
                                   t(static_cast<int>(i), j) = mesh.triangles[i][j];
                               return t;
                             })
      .def_property_readonly("boundary_flags",
                             [](const Mesh& mesh) { return mesh.boundary_flags; })
      .def_property_readonly("n_data", [](const Mesh& mesh) { return mesh.n_data; });

  py::class_<FemMatrices>(m, "FemMatrices")
      .def_property_readonly("c_lumped",
                             [](const FemMatrices& f) { return f.c_lumped; })
      .def_property_readonly("g1",
                             [](const FemMatrices& f) { return Eigen::MatrixXd(f.g1); })
      .def_property_readonly("g2",
                             [](const FemMatrices& f) { return Eigen::MatrixXd(f.g2); });

  m.def("triangulate", &triangulate, py::arg("points"), py::arg("extension"),
        py::arg("ring_points_per_side") = 8);
  m.def("assemble_fem", &assemble_fem);
  m.def("projector_matrix", [](const Mesh& mesh, const PointSet2D& targets) {
    return Eigen::MatrixXd(projector(mesh, targets).a);
  });
  m.def("assemble_q",
        [](const FemMatrices& fem, double log_tau, double log_kappa) {
          PrecisionMatrix prec = assemble_q(fem, {log_tau, log_kappa});
          return py::make_tuple(Eigen::MatrixXd(prec.q), prec.chol_logdet);
        });
  m.def("matern_cov",
        [](double r, double sigma2, double kappa, double nu) {
          return matern_cov(r, {sigma2, kappa, nu});
        },
        py::arg("r"), py::arg("sigma2") = 1.0, py::arg("kappa") = 1.0,
        py::arg("nu") = 1.0);

  py::class_<TpsBasis>(m, "TpsBasis")
      .def_property_readonly("u_k", [](const TpsBasis& b) { return b.u_k; })
      .def_property_readonly("d_k", [](const TpsBasis& b) { return b.d_k; })
      .def_property_readonly("rank", [](const TpsBasis& b) { return b.k; })
      .def("design_columns", [](const TpsBasis& b) { return design_columns(b); })
      .def("predict",
           [](const TpsBasis& b, const Eigen::VectorXd& c, const PointSet2D& at) {
             return predict_at(b, c, at);
           });

  m.def("tps_kernel", &tps_kernel);
  m.def("tps_basis", &make_tps_basis, py::arg("points"), py::arg("k"));
  m.def("tps_knot_basis", &make_knot_tps_basis, py::arg("data_points"),
        py::arg("knots"), py::arg("k"));
  m.def("build_full", [](const PointSet2D& pts) {
    auto [e, p] = build_full(pts);
    return py::make_tuple(e, p);
  });
  m.def("truncate_spectral", [](const Eigen::MatrixXd& e, int k) {
    auto [u, d] = truncate_spectral(e, k);
    return py::make_tuple(u, d);
  });

  m.def("gaussian_logpdf", &gaussian_logpdf);
  m.def("gamma_logpdf", &gamma_logpdf);
  m.def("skew_normal_logpdf", &skew_normal_logpdf);

  m.def("split_rhat", &split_rhat, py::arg("draws"),
        "rank-normalized split-Rhat on a chains x N array");
  m.def("ess_bulk", &ess_bulk);

  m.def("psis_loo", [](const Eigen::MatrixXd& loglik, bool smooth) {
    LooReport r = psis_loo(loglik, smooth);
    py::dict out;
    out["elpd_i"] = r.elpd_i;
    out["pareto_k"] = r.pareto_k;
    out["elpd_loo"] = r.elpd_loo;
    out["p_loo"] = r.p_loo;
    out["khat_threshold"] = r.khat_threshold;
    return out;
  }, py::arg("loglik"), py::arg("smooth") = true);

  m.def("simulate", [](int n, double beta0, double beta1, double sigma,
                       const std::string& field_kind, double field_range,
                       std::uint64_t seed, int n_holdout) {
    SimulationConfig cfg;
    cfg.n_locations = n;
    cfg.beta0 = beta0;
    cfg.beta1 = beta1;
    cfg.sigma = sigma;
    cfg.field_kind = field_kind;
    cfg.field_range = field_range;
    cfg.seed = seed;
    cfg.n_holdout = n_holdout;
    SimulatedData sim = simulate(cfg);
    py::dict out;
    out["y"] = sim.data.y;
    out["x"] = sim.data.x;
    out["x_names"] = sim.data.x_names;
    out["coords"] = sim.data.coords;
    out["field"] = sim.truth.field;
    return out;
  }, py::arg("n"), py::arg("beta0") = 1.0, py::arg("beta1") = 2.0,
     py::arg("sigma") = 0.1, py::arg("field_kind") = "matern_grf",
     py::arg("field_range") = 0.3, py::arg("seed") = 20240801,
     py::arg("n_holdout") = 0);

  py::class_<PyModel>(m, "Model")
      .def_static("build", &PyModel::build, py::arg("model"), py::arg("y"),
                  py::arg("x"), py::arg("x_names"), py::arg("coords"),
                  py::arg("options") = std::map<std::string, std::string>{})
      .def_property_readonly("dim", &PyModel::dim)
      .def_property_readonly("names", &PyModel::names)
      .def("logp", &PyModel::logp)
      .def("logp_grad", &PyModel::logp_grad)
      .def("pointwise_loglik", &PyModel::pointwise_loglik)
      .def("sample", &PyModel::sample, py::arg("chains") = 4,
           py::arg("warmup") = 700, py::arg("total_iter") = 1500,
           py::arg("adapt_delta") = 0.95, py::arg("max_treedepth") = 13,
           py::arg("seed") = 1);
}
