#include "sbdyn/sbdyn.h"

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sbdyn/error.hpp"
#include "sbdyn/harness.hpp"
#include "sbdyn/models.hpp"
#include "sbdyn/quapi.hpp"
#include "sbdyn/trwa.hpp"

struct sbd_scenarios {
    std::vector<sbdyn::Scenario> items;
    std::vector<std::string> json;

    void refresh() {
        json.clear();
        for (const auto& s : items) json.push_back(s.to_json());
    }
};

struct sbd_run {
    sbdyn::RunResult result;
};

struct sbd_scan {
    sbdyn::ScanReport report;
};

namespace {

thread_local std::string last_error;

sbd_status fail(sbd_status s, const std::string& message) {
    last_error = message;
    return s;
}

// Maps the library exception hierarchy onto status codes. Must be called from
// inside a catch block.
sbd_status translate() {
    try {
        throw;
    } catch (const sbdyn::TruncationError& e) {
        return fail(SBD_ERR_TRUNCATION, e.what());
    } catch (const sbdyn::ModelError& e) {
        return fail(SBD_ERR_MODEL, e.what());
    } catch (const sbdyn::DomainError& e) {
        return fail(SBD_ERR_DOMAIN, e.what());
    } catch (const sbdyn::NumericError& e) {
        return fail(SBD_ERR_NUMERIC, e.what());
    } catch (const sbdyn::ConfigError& e) {
        return fail(SBD_ERR_CONFIG, e.what());
    } catch (const sbdyn::ResourceError& e) {
        return fail(SBD_ERR_RESOURCE, e.what());
    } catch (const sbdyn::IoError& e) {
        return fail(SBD_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(SBD_ERR_RESOURCE, "out of memory");
    } catch (const std::exception& e) {
        return fail(SBD_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SBD_ERR_INTERNAL, "unknown exception");
    }
}

template <class F>
sbd_status guarded(F&& f) {
    try {
        f();
        return SBD_OK;
    } catch (...) {
        return translate();
    }
}

sbd_status null_argument(const char* what) { return fail(SBD_ERR_ARGUMENT, std::string(what) + " is NULL"); }

sbd_status bad_index(const char* what, std::size_t index, std::size_t size) {
    return fail(SBD_ERR_ARGUMENT, std::string(what) + " index " + std::to_string(index) + " out of range (" +
                                      std::to_string(size) + ")");
}

sbd_status make_set(std::vector<sbdyn::Scenario> items, sbd_scenarios** out) {
    auto set = std::make_unique<sbd_scenarios>();
    set->items = std::move(items);
    set->refresh();
    *out = set.release();
    return SBD_OK;
}

template <class Apply>
sbd_status override_all(sbd_scenarios* set, Apply apply) {
    if (!set) return null_argument("scenario set");
    return guarded([&] {
        auto copy = set->items;
        for (auto& s : copy) {
            apply(s);
            s.validate();
        }
        set->items = std::move(copy);
        set->refresh();
    });
}

}  // namespace

extern "C" {

const char* sbd_version(void) { return "1.0.0"; }

const char* sbd_status_name(sbd_status status) {
    switch (status) {
        case SBD_OK: return "ok";
        case SBD_ERR_ARGUMENT: return "invalid argument";
        case SBD_ERR_DOMAIN: return "domain error";
        case SBD_ERR_NUMERIC: return "numeric error";
        case SBD_ERR_CONFIG: return "configuration error";
        case SBD_ERR_MODEL: return "model error";
        case SBD_ERR_TRUNCATION: return "truncation error";
        case SBD_ERR_RESOURCE: return "resource limit";
        case SBD_ERR_IO: return "i/o error";
        case SBD_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* sbd_last_error(void) { return last_error.c_str(); }

size_t sbd_config_key_count(void) { return sbdyn::config_keys().size(); }

sbd_status sbd_config_key_get(size_t index, sbd_config_key* out) {
    if (!out) return null_argument("out");
    const auto& keys = sbdyn::config_keys();
    if (index >= keys.size()) return bad_index("config key", index, keys.size());
    out->key = keys[index].key;
    out->type = keys[index].type;
    out->unit = keys[index].unit;
    out->description = keys[index].description;
    return SBD_OK;
}

sbd_status sbd_scenarios_load(const char* path, sbd_scenarios** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] { make_set(sbdyn::load_config(path), out); });
}

sbd_status sbd_scenarios_parse(const char* text, sbd_scenarios** out) {
    if (!text) return null_argument("text");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] { make_set(sbdyn::parse_config(text), out); });
}

sbd_status sbd_scenarios_preset(int figure, sbd_scenarios** out) {
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] { make_set(sbdyn::preset(figure), out); });
}

void sbd_scenarios_free(sbd_scenarios* set) { delete set; }

size_t sbd_scenarios_count(const sbd_scenarios* set) { return set ? set->items.size() : 0; }

const char* sbd_scenarios_name(const sbd_scenarios* set, size_t index) {
    if (!set || index >= set->items.size()) return nullptr;
    return set->items[index].name.c_str();
}

const char* sbd_scenarios_json(const sbd_scenarios* set, size_t index) {
    if (!set || index >= set->json.size()) return nullptr;
    return set->json[index].c_str();
}

sbd_status sbd_scenarios_set_tolerance(sbd_scenarios* set, double tolerance) {
    return override_all(set, [&](sbdyn::Scenario& s) { s.tolerance = tolerance; });
}

sbd_status sbd_scenarios_set_scan_tolerance(sbd_scenarios* set, double tolerance) {
    return override_all(set, [&](sbdyn::Scenario& s) { s.scan_tolerance = tolerance; });
}

sbd_status sbd_scenarios_set_max_tensor_entries(sbd_scenarios* set, uint64_t entries) {
    return override_all(set, [&](sbdyn::Scenario& s) { s.max_tensor_entries = static_cast<std::size_t>(entries); });
}

sbd_status sbd_scenarios_set_horizon(sbd_scenarios* set, double horizon) {
    return override_all(set, [&](sbdyn::Scenario& s) { s.horizon = horizon; });
}

sbd_status sbd_run_scenarios(const sbd_scenarios* set, unsigned threads, sbd_run** out) {
    if (!set) return null_argument("scenario set");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        auto run = std::make_unique<sbd_run>();
        run->result = sbdyn::run_all(set->items, threads);
        *out = run.release();
    });
}

sbd_status sbd_run_kernels(const sbd_scenarios* set, unsigned threads, sbd_run** out) {
    if (!set) return null_argument("scenario set");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        std::vector<sbdyn::Scenario> only;
        for (auto s : set->items) {
            s.engines = {sbdyn::Engine::Kernel};
            s.dt = 0.0;
            s.dk_max.clear();
            only.push_back(std::move(s));
        }
        auto run = std::make_unique<sbd_run>();
        run->result = sbdyn::run_all(only, threads);
        *out = run.release();
    });
}

void sbd_run_free(sbd_run* run) { delete run; }

size_t sbd_run_record_count(const sbd_run* run) { return run ? run->result.records.size() : 0; }

sbd_status sbd_run_record(const sbd_run* run, size_t index, sbd_record_info* info) {
    if (!run) return null_argument("run");
    if (!info) return null_argument("info");
    const auto& recs = run->result.records;
    if (index >= recs.size()) return bad_index("record", index, recs.size());
    const auto& r = recs[index];
    info->scenario = r.scenario.c_str();
    info->label = r.label.c_str();
    info->length = r.times.size();
    info->wall_seconds = r.wall_seconds;
    return SBD_OK;
}

sbd_status sbd_run_series(const sbd_run* run, size_t index, double* times, double* population, size_t capacity) {
    if (!run) return null_argument("run");
    const auto& recs = run->result.records;
    if (index >= recs.size()) return bad_index("record", index, recs.size());
    const auto& r = recs[index];
    if (capacity < r.times.size()) {
        return fail(SBD_ERR_ARGUMENT, "capacity " + std::to_string(capacity) + " below series length " +
                                          std::to_string(r.times.size()));
    }
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        if (times) times[i] = r.times[i];
        if (population) population[i] = r.population[i];
    }
    return SBD_OK;
}

sbd_status sbd_run_diagnostic(const sbd_run* run, size_t index, const char* key, double* value) {
    if (!run) return null_argument("run");
    if (!key) return null_argument("key");
    if (!value) return null_argument("value");
    const auto& recs = run->result.records;
    if (index >= recs.size()) return bad_index("record", index, recs.size());
    const auto it = recs[index].diagnostics.find(key);
    if (it == recs[index].diagnostics.end()) {
        return fail(SBD_ERR_ARGUMENT, "record '" + recs[index].label + "' has no diagnostic '" + key + "'");
    }
    *value = it->second;
    return SBD_OK;
}

size_t sbd_run_comparison_count(const sbd_run* run) { return run ? run->result.comparisons.size() : 0; }

sbd_status sbd_run_comparison(const sbd_run* run, size_t index, sbd_comparison* out) {
    if (!run) return null_argument("run");
    if (!out) return null_argument("out");
    const auto& cs = run->result.comparisons;
    if (index >= cs.size()) return bad_index("comparison", index, cs.size());
    const auto& c = cs[index];
    out->scenario = c.scenario.c_str();
    out->reference = c.reference.c_str();
    out->candidate = c.candidate.c_str();
    out->sup = c.sup;
    out->rms = c.rms;
    out->window = c.window;
    out->tolerance = c.tolerance;
    out->pass = c.pass ? 1 : 0;
    return SBD_OK;
}

size_t sbd_run_kernel_count(const sbd_run* run) { return run ? run->result.kernels.size() : 0; }

sbd_status sbd_run_kernel(const sbd_run* run, size_t index, sbd_kernel_info* info) {
    if (!run) return null_argument("run");
    if (!info) return null_argument("info");
    const auto& ks = run->result.kernels;
    if (index >= ks.size()) return bad_index("kernel", index, ks.size());
    info->scenario = ks[index].scenario.c_str();
    info->length = ks[index].times.size();
    info->memory_time = ks[index].memory_time;
    return SBD_OK;
}

size_t sbd_run_failure_count(const sbd_run* run) { return run ? run->result.failures.size() : 0; }

const char* sbd_run_failure(const sbd_run* run, size_t index) {
    if (!run || index >= run->result.failures.size()) return nullptr;
    return run->result.failures[index].c_str();
}

int sbd_run_all_passed(const sbd_run* run) { return run && run->result.all_passed() ? 1 : 0; }

sbd_status sbd_run_emit(const sbd_run* run, const char* directory) {
    if (!run) return null_argument("run");
    if (!directory) return null_argument("directory");
    return guarded([&] { sbdyn::emit(run->result, directory); });
}

sbd_status sbd_scan_run(const sbd_scenarios* set, size_t index, const char* axis, const double* values,
                        size_t n_values, sbd_scan** out) {
    if (!set) return null_argument("scenario set");
    if (!axis) return null_argument("axis");
    if (!out) return null_argument("out");
    if (n_values > 0 && !values) return null_argument("values");
    *out = nullptr;
    if (index >= set->items.size()) return bad_index("scenario", index, set->items.size());
    return guarded([&] {
        std::vector<double> v(values, values + n_values);
        auto scan = std::make_unique<sbd_scan>();
        scan->report = sbdyn::scan_convergence(set->items[index], sbdyn::parse_axis(axis), v);
        *out = scan.release();
    });
}

void sbd_scan_free(sbd_scan* scan) { delete scan; }

sbd_status sbd_scan_info_get(const sbd_scan* scan, sbd_scan_info* info) {
    if (!scan) return null_argument("scan");
    if (!info) return null_argument("info");
    const auto& r = scan->report;
    info->scenario = r.scenario.c_str();
    info->axis = sbdyn::axis_name(r.axis);
    info->points = r.points.size();
    info->tolerance = r.tolerance;
    info->has_verdict = r.has_verdict ? 1 : 0;
    info->converged = r.converged ? 1 : 0;
    info->converged_value = r.converged_value;
    return SBD_OK;
}

sbd_status sbd_scan_point(const sbd_scan* scan, size_t index, double* value, int* refused, double* gap_to_next) {
    if (!scan) return null_argument("scan");
    const auto& r = scan->report;
    if (index >= r.points.size()) return bad_index("scan point", index, r.points.size());
    const auto& p = r.points[index];
    if (value) *value = p.value;
    if (refused) *refused = p.refused ? 1 : 0;
    if (gap_to_next) {
        *gap_to_next = std::numeric_limits<double>::quiet_NaN();
        if (!p.refused) {
            std::size_t k = 0;
            for (std::size_t i = 0; i < index; ++i) {
                if (!r.points[i].refused) ++k;
            }
            if (k < r.gaps.size()) *gap_to_next = r.gaps[k];
        }
    }
    return SBD_OK;
}

sbd_status sbd_scan_emit(const sbd_scan* scan, const char* directory) {
    if (!scan) return null_argument("scan");
    if (!directory) return null_argument("directory");
    return guarded([&] {
        const std::filesystem::path dir(directory);
        const auto& r = scan->report;
        const std::string stem = r.scenario + "_scan_" + sbdyn::axis_name(r.axis);
        sbdyn::write_scan_csv(r, dir / (stem + ".csv"));
        if (!r.records.empty()) {
            auto recs = r.records;
            // Distinguish points that share an engine label (dt and m_keep axes).
            for (std::size_t i = 0; i < recs.size(); ++i) recs[i].label += "_p" + std::to_string(i);
            sbdyn::write_csv(recs, dir / (stem + "_series.csv"));
            sbdyn::write_svg(recs, dir / (stem + "_series.svg"));
        }
    });
}

sbd_status sbd_map_g0_to_alpha(double g0, double gamma, double omega0, double* alpha) {
    if (!alpha) return null_argument("alpha");
    return guarded([&] { *alpha = sbdyn::map_g0_to_alpha(g0, gamma, omega0); });
}

sbd_status sbd_response_kernel(double alpha, double gamma, double beta, double t, double* re, double* im) {
    if (!re || !im) return null_argument("output");
    return guarded([&] {
        const auto a = sbdyn::response_kernel(sbdyn::SpectralDensity::lorentzian(alpha, 1.0, gamma), beta, t);
        *re = a.real();
        *im = a.imag();
    });
}

sbd_status sbd_trwa_population(double delta, double alpha, double gamma, const double* times, size_t n,
                               double* population) {
    if (n > 0 && (!times || !population)) return null_argument("times/population");
    return guarded([&] {
        const auto sol = sbdyn::TrwaSolution::solve(sbdyn::SpectralDensity::lorentzian(alpha, 1.0, gamma), delta);
        const auto p = sol.population(std::span<const double>(times, n));
        for (std::size_t i = 0; i < n; ++i) population[i] = p[i];
    });
}

sbd_status sbd_quapi_qubit_population(double delta, double alpha, double gamma, double dt, int dk_max, int n_steps,
                                      double* population) {
    if (!population) return null_argument("population");
    return guarded([&] {
        const auto model = sbdyn::build_qubit_model(delta);
        const auto density = sbdyn::quapi_density_from_physical(sbdyn::SpectralDensity::lorentzian(alpha, 1.0, gamma));
        const auto table = sbdyn::make_influence_table(density, sbdyn::kInfiniteBeta, dt, dk_max, model);
        const auto res = sbdyn::propagate(model, table, n_steps);
        for (std::size_t i = 0; i < res.population.size(); ++i) population[i] = res.population[i];
    });
}

}  // extern "C"
