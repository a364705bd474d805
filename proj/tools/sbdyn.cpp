// Command-line front end. Talks to the library only through the C interface.
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sbdyn/sbdyn.h"

namespace {

// Exit codes: 0 all comparisons pass, 1 a comparison or scan verdict failed,
// 2 a scenario or the invocation itself failed.
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

struct Overrides {
    double tolerance = 0.0;
    double scan_tolerance = 0.0;
    double horizon = 0.0;
    std::uint64_t max_tensor_entries = 0;
};

int report_error(const char* what, sbd_status s) {
    std::fprintf(stderr, "sbdyn: %s: %s: %s\n", what, sbd_status_name(s), sbd_last_error());
    return kExitError;
}

class Scenarios {
  public:
    ~Scenarios() { sbd_scenarios_free(set_); }
    sbd_scenarios** out() { return &set_; }
    sbd_scenarios* get() const { return set_; }

  private:
    sbd_scenarios* set_ = nullptr;
};

sbd_status apply(sbd_scenarios* set, const Overrides& o) {
    sbd_status s = SBD_OK;
    if (o.tolerance > 0.0 && (s = sbd_scenarios_set_tolerance(set, o.tolerance)) != SBD_OK) return s;
    if (o.scan_tolerance > 0.0 && (s = sbd_scenarios_set_scan_tolerance(set, o.scan_tolerance)) != SBD_OK) return s;
    if (o.horizon > 0.0 && (s = sbd_scenarios_set_horizon(set, o.horizon)) != SBD_OK) return s;
    if (o.max_tensor_entries > 0 && (s = sbd_scenarios_set_max_tensor_entries(set, o.max_tensor_entries)) != SBD_OK)
        return s;
    return s;
}

void print_run(const sbd_run* run) {
    for (size_t i = 0; i < sbd_run_record_count(run); ++i) {
        sbd_record_info info{};
        sbd_run_record(run, i, &info);
        std::printf("record  %-28s %-12s %6zu samples  %8.2fs\n", info.scenario, info.label, info.length,
                    info.wall_seconds);
    }
    for (size_t i = 0; i < sbd_run_kernel_count(run); ++i) {
        sbd_kernel_info k{};
        sbd_run_kernel(run, i, &k);
        std::printf("kernel  %-28s memory time %g\n", k.scenario, k.memory_time);
    }
    for (size_t i = 0; i < sbd_run_comparison_count(run); ++i) {
        sbd_comparison c{};
        sbd_run_comparison(run, i, &c);
        std::printf("compare %-28s %s vs %s  sup %.4g  rms %.4g  tol %g  %s\n", c.scenario, c.reference,
                    c.candidate, c.sup, c.rms, c.tolerance, c.pass ? "PASS" : "FAIL");
    }
    for (size_t i = 0; i < sbd_run_failure_count(run); ++i) {
        std::fprintf(stderr, "failed  %s\n", sbd_run_failure(run, i));
    }
}

int execute(sbd_scenarios* set, bool kernels_only, unsigned threads, const std::string& out) {
    sbd_run* run = nullptr;
    const sbd_status s = kernels_only ? sbd_run_kernels(set, threads, &run) : sbd_run_scenarios(set, threads, &run);
    if (s != SBD_OK) return report_error("run", s);
    print_run(run);
    int code = sbd_run_all_passed(run) ? 0 : kExitFail;
    if (sbd_run_failure_count(run) > 0) code = kExitError;
    if (!out.empty()) {
        const sbd_status e = sbd_run_emit(run, out.c_str());
        if (e != SBD_OK) code = report_error("emit", e);
        else std::printf("wrote %s\n", out.c_str());
    }
    sbd_run_free(run);
    return code;
}

int scan(sbd_scenarios* set, const std::string& scenario, const std::string& axis, const std::vector<double>& values,
         const std::string& out) {
    const size_t n = sbd_scenarios_count(set);
    size_t index = n;
    for (size_t i = 0; i < n; ++i) {
        if (scenario.empty() || scenario == sbd_scenarios_name(set, i)) {
            index = i;
            break;
        }
    }
    if (index == n) {
        std::fprintf(stderr, "sbdyn: no scenario named '%s'\n", scenario.c_str());
        return kExitError;
    }
    sbd_scan* sc = nullptr;
    sbd_status s = sbd_scan_run(set, index, axis.c_str(), values.empty() ? nullptr : values.data(), values.size(), &sc);
    if (s != SBD_OK) return report_error("scan", s);
    sbd_scan_info info{};
    sbd_scan_info_get(sc, &info);
    std::printf("scan %s along %s, tolerance %g\n", info.scenario, info.axis, info.tolerance);
    for (size_t i = 0; i < info.points; ++i) {
        double value = 0.0, gap = 0.0;
        int refused = 0;
        sbd_scan_point(sc, i, &value, &refused, &gap);
        if (refused) std::printf("  %-8g refused (tensor cap)\n", value);
        else if (std::isnan(gap)) std::printf("  %-8g\n", value);
        else std::printf("  %-8g gap to next %.4g\n", value, gap);
    }
    int code = kExitFail;
    if (!info.has_verdict) std::printf("no verdict: fewer than two completed points\n");
    else if (info.converged) {
        std::printf("converged at %g\n", info.converged_value);
        code = 0;
    } else std::printf("not converged\n");
    if (!out.empty()) {
        s = sbd_scan_emit(sc, out.c_str());
        if (s != SBD_OK) code = report_error("emit", s);
        else std::printf("wrote %s\n", out.c_str());
    }
    sbd_scan_free(sc);
    return code;
}

void print_keys() {
    for (size_t i = 0; i < sbd_config_key_count(); ++i) {
        sbd_config_key k{};
        sbd_config_key_get(i, &k);
        std::printf("%-20s %-14s %-10s %s\n", k.key, k.type, k.unit, k.description);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin-boson dynamics: TRWA and QUAPI engines with a comparison harness"};
    app.set_version_flag("--version", std::string(sbd_version()));
    app.require_subcommand(1);

    Overrides over;
    unsigned threads = 1;
    std::string out;
    auto common = [&](CLI::App* cmd, bool numerics) {
        cmd->add_option("-o,--out", out, "Directory for CSV, SVG and summary output");
        cmd->add_option("-j,--threads", threads, "Scenarios run in parallel")->check(CLI::PositiveNumber);
        if (!numerics) return;
        cmd->add_option("--tolerance", over.tolerance, "Cross-engine sup-norm bound")->check(CLI::PositiveNumber);
        cmd->add_option("--horizon", over.horizon, "Propagation horizon in 1/Delta")->check(CLI::PositiveNumber);
        cmd->add_option("--max-tensor-entries", over.max_tensor_entries, "Cap on the QUAPI augmented tensor")
            ->check(CLI::PositiveNumber);
    };

    std::string config;
    auto* run_cmd = app.add_subcommand("run", "Run every scenario of a config file");
    run_cmd->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
    common(run_cmd, true);

    int figure = 0;
    auto* fig_cmd = app.add_subcommand("figure", "Run the preset scenarios of a figure");
    fig_cmd->add_option("number", figure, "Figure number")->required()->check(CLI::Range(1, 5));
    common(fig_cmd, true);

    std::string axis = "dk_max", scenario;
    std::vector<double> values;
    auto* scan_cmd = app.add_subcommand("scan", "Convergence scan of one scenario");
    scan_cmd->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
    scan_cmd->add_option("--axis", axis, "dk_max, dt or m_keep")
        ->check(CLI::IsMember({"dk_max", "dt", "m_keep"}));
    scan_cmd->add_option("--values", values, "Axis values; dk_max defaults to the scenario list")->delimiter(',');
    scan_cmd->add_option("--scenario", scenario, "Scenario name (default: the first)");
    scan_cmd->add_option("--scan-tolerance", over.scan_tolerance, "Successive-gap bound")
        ->check(CLI::PositiveNumber);
    common(scan_cmd, true);

    auto* kernel_cmd = app.add_subcommand("kernel", "Tabulate the bath response kernel");
    kernel_cmd->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
    common(kernel_cmd, false);

    app.add_subcommand("keys", "List the config keys");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitError;
    }

    if (app.got_subcommand("keys")) {
        print_keys();
        return 0;
    }

    Scenarios set;
    const sbd_status s =
        fig_cmd->parsed() ? sbd_scenarios_preset(figure, set.out()) : sbd_scenarios_load(config.c_str(), set.out());
    if (s != SBD_OK) return report_error("config", s);
    if (const sbd_status o = apply(set.get(), over); o != SBD_OK) return report_error("override", o);

    if (scan_cmd->parsed()) return scan(set.get(), scenario, axis, values, out);
    return execute(set.get(), kernel_cmd->parsed(), threads, out);
}
