#pragma once

// Front end shared by the qillum executable, the acceptance run and the
// Python bindings: run configuration, curve sweeps, exponent tables, oracle
// runs with a sidecar cache, and the validation suite.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qillum/fock.hpp"
#include "qillum/receivers.hpp"

namespace qillum {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailed = 1;
inline constexpr int kExitError = 2;

/// Curve columns in output order.
inline const std::vector<std::string> kCurveColumns = {
    "pe_qcb_tmsv", "pe_qcb_coherent", "pe_opa_exact", "pe_opa_gauss", "pe_pc_gauss", "pe_hom"};

struct OracleSettings {
    double tail_tol = kTailTol;
    double rel_change = 0.01;
    int max_levels = 8;
};

struct RunConfig {
    double n_s = 0.01;
    double n_b = 20.0;
    double kappa = 0.01;
    double m_min = 1e3;
    double m_max = 1e7;
    int points = 60;
    std::vector<std::string> receivers = kCurveColumns;
    std::optional<double> gain;  ///< explicit OPA gain; default eps^2 = N_S / sqrt(N_B)
    OracleSettings oracle;
    std::string out;     ///< empty = stdout
    std::string format = "csv";
    std::string svg;     ///< optional plot path
    std::string cache;   ///< QCB sidecar; empty = next to `out`
    std::uint64_t seed = 1;

    ScenarioParams params() const;
    OpaConfig opa() const;
    bool selected(const std::string& column) const;
    void validate() const;
};

/// Reads a JSON object with the RunConfig field names (kebab or snake case);
/// unknown keys are a config error.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
nlohmann::json to_json(const RunConfig& cfg);

/// Log-spaced grid rounded to integers, duplicates removed.
std::vector<std::int64_t> m_grid(const RunConfig& cfg);

struct OracleExponents {
    std::optional<QcbCertificate> tmsv;
    std::optional<QcbCertificate> coherent;
    bool from_cache = false;
};

/// Runs the selected QCB oracles once. When `cache` is non-empty, results are
/// looked up in / written to that JSON file keyed by params and settings.
OracleExponents oracle_exponents(const RunConfig& cfg, bool want_tmsv, bool want_coherent,
                                 const std::filesystem::path& cache = {});

struct CurveTable {
    std::vector<std::string> columns;  ///< "M" first
    std::vector<std::vector<double>> rows;
};

CurveTable compute_curves(const RunConfig& cfg, const OracleExponents& oracle);

/// 17 significant digits, '\n' line endings.
std::string format_double(double x);
void write_csv(const CurveTable& table, std::ostream& os);
nlohmann::json curves_json(const CurveTable& table, const RunConfig& cfg);
void write_svg(const CurveTable& table, std::ostream& os);

nlohmann::json exponents_json(const RunConfig& cfg, bool numeric,
                              const std::filesystem::path& cache = {});
nlohmann::json certificate_json(const QcbCertificate& cert);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationOptions {
    bool full = false;
    /// Replaces the corrected H0 phase-conjugate variance with the plain
    /// N_X(N_X+1) + N_Y(N_Y+1) form; the consistency checks must then fail.
    bool inject_sigma0_regression = false;
    RunConfig config;
};

std::vector<CheckResult> run_validation(const ValidationOptions& opts);
nlohmann::json validation_json(const std::vector<CheckResult>& checks);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qillum
