#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "asyncdd/comm.hpp"
#include "asyncdd/experiment.hpp"

namespace py = pybind11;
using namespace asyncdd;

namespace {

template <class T>
py::array_t<T> to_array(std::span<const T> v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const Vector& v) { return to_array<double>(std::span<const double>(v)); }

py::array_t<std::uint64_t> index_array(std::span<const std::size_t> v) {
  py::array_t<std::uint64_t> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::span<const double> as_span(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), static_cast<std::size_t>(a.size())};
}

py::dict solve_config(const std::string& config_json) {
  const auto config = experiment::config_from_json(config_json);
  experiment::validate(config);
  auto in = experiment::build_instance(config);
  std::optional<decomp::CoarseSpace> coarse;
  if (config.method == solvers::Method::ras2) {
    coarse = decomp::build_coarse(in.problem, in.maps, config.coarse_ratio);
  }
  const auto setup = solvers::make_setup(in.problem, in.maps, config.method, std::move(coarse));
  const auto options = experiment::solver_options(config);
  solvers::SolveResult res;
  {
    py::gil_scoped_release release;
    res = solvers::solve(setup, config.mode, options);
  }
  const auto err = fem::nodal_error(res.u, in.problem);
  py::dict d;
  d["u"] = to_array(res.u);
  d["converged"] = res.converged;
  d["timed_out"] = res.timed_out;
  d["iterations"] = res.iterations;
  d["wall_time_s"] = res.wall_time;
  d["update_counts"] = res.update_counts;
  d["initial_norm"] = res.initial_residual_norm;
  d["final_norm"] = res.final_residual_norm;
  d["true_norm"] = res.true_residual_norm;
  d["max_err"] = err.max_err;
  d["l2_err"] = err.l2_err;
  d["async_degree"] = metrics::async_degree(res.update_counts);
  py::list hist;
  for (const auto& h : res.history) hist.append(py::make_tuple(h.step, h.time_s, h.residual_norm));
  d["history"] = hist;
  return d;
}

}  // namespace

PYBIND11_MODULE(_asyncdd, m) {
  m.doc() = "Asynchronous one- and two-level Schwarz solvers for the 2D Poisson problem";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  py::class_<fem::DiscreteProblem>(m, "Problem")
      .def_readonly("n", &fem::DiscreteProblem::n)
      .def_property_readonly("size", &fem::DiscreteProblem::size)
      .def_property_readonly("h", &fem::DiscreteProblem::h)
      .def_property_readonly("f", [](const fem::DiscreteProblem& p) { return to_array(p.f); })
      .def_property_readonly("nnz", [](const fem::DiscreteProblem& p) { return p.a.nnz(); })
      .def(
          "csr",
          [](const fem::DiscreteProblem& p) {
            return py::make_tuple(index_array(p.a.row_offsets()), index_array(p.a.col_indices()),
                                  to_array<double>(p.a.values()));
          },
          "(indptr, indices, data) of the stiffness matrix")
      .def(
          "matvec",
          [](const fem::DiscreteProblem& p, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
            if (static_cast<std::size_t>(x.size()) != p.size()) throw ContractError("length mismatch");
            return to_array(spmv(p.a, as_span(x)));
          })
      .def("exact_solution", [](const fem::DiscreteProblem& p) { return to_array(fem::exact_solution(p)); })
      .def(
          "direct_solve",
          [](const fem::DiscreteProblem& p) { return to_array(SparseLu::factor(p.a).solve(p.f)); })
      .def(
          "nodal_error",
          [](const fem::DiscreteProblem& p, const py::array_t<double, py::array::c_style | py::array::forcecast>& u) {
            if (static_cast<std::size_t>(u.size()) != p.size()) throw ContractError("length mismatch");
            const auto e = fem::nodal_error(as_span(u), p);
            return py::make_tuple(e.max_err, e.l2_err);
          },
          "(max_err, l2_err) against sin(pi x) sin(pi y)")
      .def_property_readonly("checksum", [](const fem::DiscreteProblem& p) { return fem::checksum(p); });

  m.def("poisson_problem", &fem::poisson_problem, py::arg("n"));

  m.def(
      "partition",
      [](const std::string& config_json) {
        const auto config = experiment::config_from_json(config_json);
        experiment::validate(config);
        const auto in = experiment::build_instance(config);
        py::list out;
        for (const auto& map : in.maps) {
          py::dict d;
          d["base"] = index_array(map.base);
          d["overlap"] = index_array(map.overlap);
          std::vector<std::size_t> owned;
          for (std::size_t l = 0; l < map.size(); ++l) {
            if (map.owned[l]) owned.push_back(map.overlap[l]);
          }
          d["owned"] = index_array(owned);
          py::list neighbors;
          for (const auto& link : map.neighbors) neighbors.append(link.neighbor);
          d["neighbors"] = neighbors;
          out.append(d);
        }
        return out;
      },
      py::arg("config_json"), "Overlapping subdomains of a configuration");

  m.def("solve", &solve_config, py::arg("config_json"),
        "One solve; returns the global iterate alongside the run statistics");

  m.def(
      "run",
      [](const std::string& config_json) {
        const auto config = experiment::config_from_json(config_json);
        py::gil_scoped_release release;
        return experiment::to_json(experiment::run(config));
      },
      py::arg("config_json"), "Full measured run; returns the record as JSON text");

  m.def("default_config", [] { return experiment::to_json(experiment::ExperimentConfig{}); });

  m.def(
      "verify",
      [](const std::string& suite) {
        std::ostringstream out;
        bool ok = false;
        {
          py::gil_scoped_release release;
          ok = experiment::verify(suite, out);
        }
        return py::make_tuple(ok, out.str());
      },
      py::arg("suite") = "all");

  m.def(
      "rho_tilde", [](double r0, double rk, std::size_t k) { return metrics::rho_tilde(r0, rk, k); },
      py::arg("r0"), py::arg("rfinal"), py::arg("iterations"));
  m.def(
      "rho_hat", [](double r0, double rk, double t, double tau) { return metrics::rho_hat(r0, rk, t, tau); },
      py::arg("r0"), py::arg("rfinal"), py::arg("wall_time"), py::arg("tau_sync"));
  m.def(
      "async_degree",
      [](const std::vector<std::uint64_t>& counts) { return metrics::async_degree(counts); },
      py::arg("update_counts"));

  m.def(
      "stress_generations",
      [](std::uint64_t ops, std::size_t width) {
        py::gil_scoped_release release;
        const auto r = comm::stress_generations(ops, width);
        return std::make_pair(r.operations, r.torn_reads);
      },
      py::arg("operations"), py::arg("width") = 64, "(operations, torn reads)");
}
