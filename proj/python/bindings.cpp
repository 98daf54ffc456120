#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/cli.hpp"
#include "chaos_tails/coefficient_series.hpp"
#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/json_io.hpp"
#include "chaos_tails/monte_carlo_lab.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace py = pybind11;
using namespace chaos_tails;
using json_io::json;

namespace {

// Python objects cross the boundary as JSON text.
json to_json(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object from_json(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Exponent exponent_of(const py::handle& h) {
  if (py::isinstance<py::str>(h)) return Exponent::parse(h.cast<std::string>());
  return Exponent(h.cast<double>());
}

QVector qvector_of(const py::object& o) {
  if (py::isinstance<py::str>(o)) return QVector::parse(o.cast<std::string>());
  QVector qv;
  for (const auto& h : o) qv.q.push_back(exponent_of(h));
  require(!qv.q.empty(), "q must be nonempty");
  return qv;
}

py::dict result_dict(const ExponentResult& r) {
  py::dict d;
  d["value"] = r.infinite ? py::cast(std::numeric_limits<double>::infinity()) : py::cast(r.value);
  d["infinite"] = r.infinite;
  d["branch"] = r.branch;
  d["log_power"] = r.log_power ? py::cast(*r.log_power) : py::none();
  return d;
}

FamilySpec family_of(const std::string& name, int d, std::size_t n,
                     const std::optional<std::vector<double>>& q, double gain) {
  FamilySpec s;
  s.kind = parse_family(name);
  s.d = d;
  s.n = n;
  if (q) s.q = q->size() == 1 ? std::vector<double>(d, (*q)[0]) : *q;
  s.gain = gain;
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_chaos_tails, m) {
  m.doc() = "Tail and moment bounds for multilinear forms in dependent variables";

  static py::exception<Error> error(m, "ChaosTailsError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = error;
      py::object inst = err(std::string(error_code_name(e.code())) + ": " + e.what());
      inst.attr("code") = std::string(error_code_name(e.code()));
      inst.attr("exit_code") = exit_code_for(e.code());
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  // exponents
  m.def("exponent_M", [](const py::object& q) { return result_dict(exponent_M(qvector_of(q))); },
        py::arg("q"));
  m.def("exponent_Nd",
        [](const py::object& q, bool literal) {
          return result_dict(exponent_Nd(qvector_of(q),
                                         literal ? NdVariant::Shifted : NdVariant::Corrected));
        },
        py::arg("q"), py::arg("literal") = false);
  m.def("exponent_G", [](const py::object& q) { return result_dict(exponent_G(qvector_of(q))); },
        py::arg("q"));
  m.def("exponent_gamma_dq",
        [](int d, const py::object& q) { return result_dict(exponent_gamma_dq(d, exponent_of(q))); },
        py::arg("d"), py::arg("q"));
  m.def("vector_L", [](const py::object& q, double r) { return result_dict(vector_L(exponent_of(q), r)); },
        py::arg("q"), py::arg("r"));
  m.def("vector_N_qr",
        [](const py::object& q, double r) { return result_dict(vector_N_qr(exponent_of(q), r)); },
        py::arg("q"), py::arg("r"));
  m.def("log_refined_recursion",
        [](int d, const py::object& q, double r) {
          return result_dict(log_refined_recursion(d, exponent_of(q), r));
        },
        py::arg("d"), py::arg("q"), py::arg("r"));
  m.def("moment_constant_gamma", &moment_constant_gamma, py::arg("d"));
  m.def("ustat_scale_t", &ustat_scale_t, py::arg("d"), py::arg("k"), py::arg("r"));

  // tails
  py::class_<TailFunction>(m, "TailFunction")
      .def_static("parametric",
                  py::overload_cast<double, double, double, double>(&TailFunction::parametric),
                  py::arg("Y"), py::arg("K"), py::arg("q"), py::arg("rho") = 0.0)
      .def_static("grid", &TailFunction::grid, py::arg("x"), py::arg("t"))
      .def_static("indicator", &TailFunction::indicator, py::arg("K"))
      .def_static("from_dict", [](const py::object& o) { return json_io::tail_from_json(to_json(o)); })
      .def("__call__", [](const TailFunction& T, double x) { return T(x); })
      .def("values",
           [](const TailFunction& T, const std::vector<double>& x) {
             std::vector<double> out;
             for (double v : x) out.push_back(T(v));
             return out;
           })
      .def("to_dict", [](const TailFunction& T) { return from_json(json_io::tail_to_json(T)); })
      .def_property_readonly("is_parametric", &TailFunction::is_parametric);
  m.def("truncation_operator_W", &truncation_operator_W, py::arg("T"));
  m.def("product_compose", &product_compose, py::arg("T"), py::arg("G"));

  // coefficient fields
  py::class_<CoefficientField>(m, "CoefficientField")
      .def_static("uniform", &CoefficientField::uniform, py::arg("d"), py::arg("n"))
      .def_static("power_law",
                  [](int d, double alpha, double C, std::optional<std::size_t> n) {
                    return CoefficientField::power_law(d, alpha, C, n);
                  },
                  py::arg("d"), py::arg("alpha"), py::arg("C") = 1.0, py::arg("n") = py::none())
      .def_static("from_dict",
                  [](const py::object& o) { return json_io::field_from_json(to_json(o)); })
      .def("to_dict", [](const CoefficientField& F) { return from_json(json_io::field_to_json(F)); })
      .def_property_readonly("d", &CoefficientField::d)
      .def_property_readonly("n", &CoefficientField::n)
      .def("sum_abs", &CoefficientField::sum_abs)
      .def("sum_sq", &CoefficientField::sum_sq)
      .def("__repr__", &CoefficientField::describe);
  m.def("theorem13_tail",
        [](const CoefficientField& F, const py::object& q) { return theorem13_tail(F, qvector_of(q)); },
        py::arg("field"), py::arg("q"));
  m.def("theorem14_tail",
        [](const CoefficientField& F, const py::object& q) { return theorem14_tail(F, qvector_of(q)); },
        py::arg("field"), py::arg("q"));
  m.def("theorem15_moment",
        [](const CoefficientField& F, double p) { return theorem15_moment(F, F.d(), p); },
        py::arg("field"), py::arg("p"));
  m.def("theorem16_moment",
        [](const CoefficientField& F, double p) { return theorem16_moment(F, F.d(), p); },
        py::arg("field"), py::arg("p"));

  // bounds and campaigns through the JSON documents of the command line
  m.def("bound",
        [](int theorem, const std::string& mode, const py::object& assumptions,
           std::optional<std::vector<double>> p) {
          std::string csv;
          if (p)
            for (double v : *p) csv += (csv.empty() ? "" : ",") + json_io::format_number(v);
          return from_json(json_io::bound_to_json(build_bound(theorem, mode, to_json(assumptions), csv)));
        },
        py::arg("theorem"), py::arg("mode"), py::arg("assumptions"), py::arg("p") = py::none());
  m.def("verify",
        [](const py::object& config, std::optional<double> scale_bound) {
          return from_json(run_campaign(to_json(config), scale_bound).document);
        },
        py::arg("config"), py::arg("scale_bound") = py::none());

  // simulation
  m.def("simulate",
        [](const CoefficientField& F, const std::string& family, std::size_t replications,
           std::uint64_t seed, std::optional<std::vector<double>> q, double gain) {
          require(F.n().has_value(), "simulation needs a field with finite n");
          const auto spec = family_of(family, F.d(), *F.n(), q, gain);
          py::gil_scoped_release release;
          return evaluate_Qd(F, generate_batch(spec, replications, seed, default_workers()));
        },
        py::arg("field"), py::arg("family") = "rademacher", py::arg("replications") = 10000,
        py::arg("seed") = 20240101, py::arg("q") = py::none(), py::arg("gain") = 0.5);
  m.def("empirical_tail",
        [](const std::vector<double>& values, const std::vector<double>& x, double confidence) {
          return from_json(json_io::tail_estimate_to_json(empirical_tail(values, x, confidence)));
        },
        py::arg("values"), py::arg("x"), py::arg("confidence") = 0.99);
  m.def("empirical_moments",
        [](const std::vector<double>& values, const std::vector<double>& p, std::size_t resamples) {
          return from_json(json_io::moment_estimate_to_json(empirical_moments(values, p, resamples)));
        },
        py::arg("values"), py::arg("p"), py::arg("resamples") = 1000);
  m.def("exact_oracle_tail",
        [](const CoefficientField& F, const std::vector<double>& x) { return exact_oracle_tail(F, x); },
        py::arg("field"), py::arg("x"));
  m.def("lower_envelope_probe",
        [](int d, const py::object& q, const std::vector<std::size_t>& n_list,
           const std::vector<double>& x_grid, std::size_t replications, std::uint64_t seed) {
          const auto r = lower_envelope_probe(d, exponent_of(q), n_list, x_grid, replications, seed,
                                              default_workers());
          py::list runs;
          for (const auto& run : r.runs) {
            py::dict e;
            e["n"] = run.n;
            e["slope"] = run.slope;
            e["raw_slope"] = run.raw_slope;
            e["fit_points"] = run.fit_points;
            e["tail"] = from_json(json_io::tail_estimate_to_json(run.tail));
            runs.append(e);
          }
          py::dict out;
          out["predicted"] = r.predicted;
          out["runs"] = runs;
          return out;
        },
        py::arg("d"), py::arg("q"), py::arg("n_list"), py::arg("x_grid"),
        py::arg("replications") = 1000000, py::arg("seed") = 7);
}
