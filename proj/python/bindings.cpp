#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "qillum/cli.hpp"
#include "qillum/error.hpp"
#include "qillum/fock.hpp"
#include "qillum/receivers.hpp"
#include "qillum/scenario.hpp"

namespace py = pybind11;
using namespace qillum;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::dict& d) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(d).cast<std::string>());
}

RunConfig config_from(const py::dict& overrides) {
    return overrides.empty() ? RunConfig{} : config_from_json(from_python(overrides));
}

ScenarioParams make_params(double n_s, double n_b, double kappa, std::int64_t m) {
    ScenarioParams p{n_s, n_b, kappa, m};
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Quantum illumination receivers, exponents and Fock-space Chernoff bounds";

    static py::exception<Error> qillum_error(m, "QillumError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = qillum_error;
            py::object inst = exc(e.what());
            inst.attr("category") = std::string(e.category());
            inst.attr("code") = static_cast<int>(e.code());
            PyErr_SetObject(exc.ptr(), inst.ptr());
        }
    });

    py::class_<ScenarioParams>(m, "ScenarioParams")
        .def(py::init(&make_params), py::arg("n_s") = 0.01, py::arg("n_b") = 20.0,
             py::arg("kappa") = 0.01, py::arg("m") = 1)
        .def_readwrite("n_s", &ScenarioParams::n_s)
        .def_readwrite("n_b", &ScenarioParams::n_b)
        .def_readwrite("kappa", &ScenarioParams::kappa)
        .def_readwrite("m", &ScenarioParams::m)
        .def("__repr__", [](const ScenarioParams& p) {
            std::ostringstream os;
            os << "ScenarioParams(n_s=" << p.n_s << ", n_b=" << p.n_b << ", kappa=" << p.kappa
               << ", m=" << p.m << ")";
            return os.str();
        });

    m.def("exponents", [](const py::dict& config, bool numeric) {
        const RunConfig cfg = config_from(config);
        cfg.validate();
        return to_python(exponents_json(cfg, numeric));
    }, py::arg("config") = py::dict(), py::arg("numeric") = false,
       "Per-mode error exponents; `config` takes the same keys as a JSON run file.");

    m.def("curves", [](const py::dict& config) {
        const RunConfig cfg = config_from(config);
        cfg.validate();
        const OracleExponents o = oracle_exponents(cfg, cfg.selected("pe_qcb_tmsv"),
                                                   cfg.selected("pe_qcb_coherent"), cfg.cache);
        const CurveTable t = compute_curves(cfg, o);
        py::dict out;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            std::vector<double> col;
            col.reserve(t.rows.size());
            for (const auto& row : t.rows) col.push_back(row[c]);
            out[py::str(t.columns[c])] = col;
        }
        return out;
    }, py::arg("config") = py::dict(), "Error probability curves keyed by column name.");

    m.def("qcb_tmsv", [](const ScenarioParams& p, double tail_tol, double rel_change, int max_levels) {
        TruncationSpec spec;
        spec.tail_tol = tail_tol;
        return to_python(certificate_json(qcb_tmsv(p, spec, rel_change, max_levels)));
    }, py::arg("params"), py::arg("tail_tol") = kTailTol, py::arg("rel_change") = 0.01,
       py::arg("max_levels") = 8);

    m.def("qcb_coherent", [](const ScenarioParams& p, double tail_tol, double rel_change, int max_levels) {
        TruncationSpec spec;
        spec.tail_tol = tail_tol;
        return to_python(certificate_json(qcb_coherent(p, spec, rel_change, max_levels)));
    }, py::arg("params"), py::arg("tail_tol") = kTailTol, py::arg("rel_change") = 0.01,
       py::arg("max_levels") = 8);

    m.def("opa_error_prob", [](const ScenarioParams& p, std::int64_t m_pairs, std::optional<double> gain) {
        const OpaConfig cfg = gain ? OpaConfig{*gain} : default_opa_config(p);
        const PerformanceReport exact = opa_error_prob_exact(p, cfg, m_pairs);
        py::dict d;
        d["pe_exact"] = exact.pe_exact;
        d["pe_gaussian"] = opa_error_prob_gaussian(p, cfg, m_pairs).pe_gaussian;
        d["threshold"] = exact.threshold;
        return d;
    }, py::arg("params"), py::arg("m"), py::arg("gain") = py::none());

    m.def("pc_error_prob", [](const ScenarioParams& p, std::int64_t m_pairs) {
        return pc_error_prob_gaussian(p, m_pairs).pe_gaussian;
    }, py::arg("params"), py::arg("m"));

    m.def("homodyne_error_prob", [](const ScenarioParams& p, std::int64_t m_pairs) {
        return homodyne_error_prob(p, m_pairs).pe_gaussian;
    }, py::arg("params"), py::arg("m"));

    m.def("simulate_opa", [](const ScenarioParams& p, std::int64_t m_pairs, std::uint64_t seed,
                             std::int64_t trials) {
        const SimulationResult r =
            simulate_counts(p, ReceiverKind::opa, default_opa_config(p), m_pairs, seed, trials);
        py::dict d;
        d["errors"] = r.errors;
        d["error_rate"] = r.error_rate;
        d["standard_error"] = r.standard_error;
        d["threshold"] = r.threshold;
        return d;
    }, py::arg("params"), py::arg("m"), py::arg("seed") = 1, py::arg("trials") = 10000);

    m.def("validate", [](bool full, bool inject_sigma0_regression) {
        ValidationOptions opts;
        opts.full = full;
        opts.inject_sigma0_regression = inject_sigma0_regression;
        return to_python(validation_json(run_validation(opts)));
    }, py::arg("full") = false, py::arg("inject_sigma0_regression") = false);

    m.def("main", [](std::vector<std::string> args) {
        args.insert(args.begin(), "qillum");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Runs the command-line tool; returns (exit code, stdout, stderr).");

    m.attr("EXIT_OK") = kExitOk;
    m.attr("EXIT_VALIDATION_FAILED") = kExitValidationFailed;
    m.attr("EXIT_ERROR") = kExitError;
}
