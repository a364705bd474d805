#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbdyn/spectral.hpp"

namespace sbdyn {

enum class Engine { Trwa, Quapi1, Quapi2, Kernel };

const char* engine_name(Engine e);
Engine parse_engine(const std::string& name);

// One physical point plus the numerics to run it. Energies are in units of
// Omega; dt, horizon and compare_horizon are in units of 1/Delta, kernel
// times in units of 1/Omega.
struct Scenario {
    std::string name;
    std::vector<Engine> engines;

    double delta = 1.0;
    std::optional<double> g0;     // in units of Delta
    std::optional<double> alpha;  // Lorentzian strength; exclusive with g0
    double gamma = 0.0;
    double omega_c = 20.0;
    double beta = kInfiniteBeta;

    double horizon = 50.0;
    double trwa_step = 0.05;
    double dt = 0.0;
    std::vector<int> dk_max;
    int fock_cut = 200;
    int m_keep = 2;
    std::size_t max_tensor_entries = std::size_t{1} << 26;

    double tolerance = 0.1;       // cross-engine sup-norm bound
    double scan_tolerance = 0.02;  // successive-gap bound for convergence scans
    double compare_horizon = 0.0;  // 0 means the whole overlap

    double kernel_t_max = 20.0;
    double kernel_step = 0.02;

    bool has(Engine e) const;
    double g0_absolute() const;  // g0 in units of Omega
    double alpha_value() const;
    // Throws ConfigError naming the first missing or inconsistent parameter.
    void validate() const;
    // Stable JSON echo, used for CSV headers.
    std::string to_json() const;
};

// Key table of the config format: key, type, unit, description.
struct ConfigKey {
    const char* key;
    const char* type;
    const char* unit;
    const char* description;
};
const std::vector<ConfigKey>& config_keys();

// Sectioned key = value text. Each [section] is a scenario; a comma list in
// gamma expands into one scenario per value. Unknown keys are errors.
std::vector<Scenario> parse_config(const std::string& text, const std::string& origin = "<string>");
std::vector<Scenario> load_config(const std::filesystem::path& path);

std::vector<Scenario> preset(int figure);

struct RunRecord {
    std::string scenario;
    std::string scenario_json;
    std::string label;  // engine, with the memory length for QUAPI
    Engine engine = Engine::Trwa;
    int dk_max = 0;
    std::vector<double> times;  // units of 1/Delta
    std::vector<double> population;
    std::map<std::string, double> diagnostics;
    double wall_seconds = 0.0;
};

struct Comparison {
    std::string scenario;
    std::string reference;
    std::string candidate;
    double sup = 0.0;
    double rms = 0.0;
    double window = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Differences at the samples of the coarser record, the finer one
// interpolated linearly, restricted to [0, window] when
// window > 0. Throws DomainError when the grids do not overlap.
Comparison compare(const RunRecord& a, const RunRecord& b, double tolerance, double window = 0.0);

struct KernelTable {
    std::string scenario;
    std::vector<double> times;  // units of 1/Omega
    std::vector<double> real;
    std::vector<double> imag;
    double memory_time = 0.0;  // |alpha| stays below 5% of |alpha(0)| after this
};
KernelTable tabulate_kernel(const Scenario& s);
double memory_time(const KernelTable& k, double fraction = 0.05);

struct RunResult {
    std::vector<RunRecord> records;
    std::vector<KernelTable> kernels;
    std::vector<Comparison> comparisons;
    std::vector<std::string> failures;  // scenario-level errors, already contextualised
    bool all_passed() const;
};

// Records for every engine, then TRWA against the longest-memory QUAPI
// record of each engine. Scenario errors are rethrown with the scenario name.
std::vector<RunRecord> run(const Scenario& s);
RunResult run_all(const std::vector<Scenario>& scenarios, unsigned threads = 1);

enum class ScanAxis { DkMax, Dt, MKeep };
ScanAxis parse_axis(const std::string& name);
const char* axis_name(ScanAxis a);

struct ScanPoint {
    double value = 0.0;
    bool refused = false;  // resource guard
    std::string note;
};

struct ScanReport {
    std::string scenario;
    ScanAxis axis = ScanAxis::DkMax;
    std::vector<ScanPoint> points;
    std::vector<double> gaps;  // sup gap between consecutive completed points
    double tolerance = 0.0;
    bool has_verdict = false;
    bool converged = false;
    double converged_value = 0.0;
    std::vector<RunRecord> records;
};

// Converged value: the first point from which every later consecutive gap
// stays within tolerance. Axis values come from the scenario (dk_max list) or
// from the explicit list.
ScanReport scan_convergence(const Scenario& s, ScanAxis axis, const std::vector<double>& values = {});

// CSV: "# scenario ..." and "# units ..." comments, then t and one column per
// record on the union of the grids. Missing samples are left empty.
std::filesystem::path write_csv(const std::vector<RunRecord>& records, const std::filesystem::path& file);
std::filesystem::path write_svg(const std::vector<RunRecord>& records, const std::filesystem::path& file);
std::filesystem::path write_kernel_csv(const KernelTable& k, const std::filesystem::path& file);
std::filesystem::path write_scan_csv(const ScanReport& r, const std::filesystem::path& file);

struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // NaN for empty cells
};
CsvTable read_csv(const std::filesystem::path& file);

// Writes <scenario>.csv and <scenario>.svg per scenario plus summary.json.
std::vector<std::filesystem::path> emit(const RunResult& result, const std::filesystem::path& dir);

}  // namespace sbdyn
