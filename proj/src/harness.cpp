#include "sbdyn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "sbdyn/error.hpp"
#include "sbdyn/models.hpp"
#include "sbdyn/quapi.hpp"
#include "sbdyn/trwa.hpp"

namespace sbdyn {
namespace {

constexpr double kPi = 3.14159265358979323846;

using Clock = std::chrono::steady_clock;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string format_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_number(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ConfigError(where + ": '" + t + "' is not a number");
    }
    if (used != t.size()) throw ConfigError(where + ": '" + t + "' is not a number");
    return v;
}

int parse_int(const std::string& text, const std::string& where) {
    const double v = parse_number(text, where);
    if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 1e9) {
        throw ConfigError(where + ": '" + trim(text) + "' is not an integer");
    }
    return static_cast<int>(v);
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (auto& c : out) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out.empty() ? "scenario" : out;
}

// Restores the original exception type with the scenario name in front.
[[noreturn]] void rethrow_with(const std::string& context) {
    try {
        throw;
    } catch (const TruncationError& e) {
        throw TruncationError(context + e.what(), e.retained_norm());
    } catch (const NumericError& e) {
        throw NumericError(context + e.what(), e.estimate());
    } catch (const DomainError& e) {
        throw DomainError(context + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(context + e.what());
    } catch (const ModelError& e) {
        throw ModelError(context + e.what());
    } catch (const ResourceError& e) {
        throw ResourceError(context + e.what());
    } catch (const IoError& e) {
        throw IoError(context + e.what());
    } catch (const std::exception& e) {
        throw Error(context + e.what());
    }
}

bool is_quapi(Engine e) { return e == Engine::Quapi1 || e == Engine::Quapi2; }

SpectralDensity physical_density(const Scenario& s) {
    return SpectralDensity::lorentzian(s.alpha_value(), 1.0, s.gamma);
}

RunRecord trwa_record(const Scenario& s) {
    const auto start = Clock::now();
    RunRecord r;
    r.engine = Engine::Trwa;
    r.label = "trwa";
    const auto n = static_cast<std::size_t>(std::llround(s.horizon / s.trwa_step));
    r.times.resize(n + 1);
    std::vector<double> phys(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        r.times[k] = static_cast<double>(k) * s.trwa_step;
        phys[k] = r.times[k] / s.delta;
    }
    const auto sol = TrwaSolution::solve(physical_density(s), s.delta);
    r.population = sol.population(phys);
    r.diagnostics["eta"] = sol.eta();
    r.diagnostics["eta_residual"] = sol.eta_residual();
    r.diagnostics["sum_rule"] = sol.sum_rule();
    r.diagnostics["quadrature_error"] = sol.error_estimate(phys);
    r.diagnostics["poles"] = static_cast<double>(sol.poles().size());
    r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

struct QuapiSetup {
    SystemModel model;
    SpectralDensity density;
    double retained_norm = 1.0;
};

QuapiSetup quapi_setup(const Scenario& s, Engine e) {
    if (e == Engine::Quapi1) {
        return {build_qubit_model(s.delta), quapi_density_from_physical(physical_density(s)), 1.0};
    }
    auto ho = build_qubit_ho_model(s.delta, 1.0, s.g0_absolute(), s.fock_cut, s.m_keep);
    return {std::move(ho.model), quapi_density_from_physical(SpectralDensity::ohmic(s.gamma, s.omega_c)),
            ho.report.retained_norm};
}

RunRecord quapi_record(const Scenario& s, Engine e, const QuapiSetup& setup, int dk) {
    const auto start = Clock::now();
    RunRecord r;
    r.engine = e;
    r.dk_max = dk;
    r.label = std::string(engine_name(e)) + "_dk" + std::to_string(dk);
    const double dt_phys = s.dt / s.delta;
    const int n_steps = static_cast<int>(std::llround(s.horizon / s.dt));
    const auto table = make_influence_table(setup.density, s.beta, dt_phys, dk, setup.model);
    PropagationOptions opt;
    opt.max_tensor_entries = s.max_tensor_entries;
    const auto res = propagate(setup.model, table, n_steps, opt);
    r.times.resize(res.times.size());
    for (std::size_t k = 0; k < res.times.size(); ++k) r.times[k] = static_cast<double>(k) * s.dt;
    r.population = res.population;
    r.diagnostics["trace_error"] = res.max_trace_error;
    r.diagnostics["hermiticity_error"] = res.max_hermiticity_error;
    r.diagnostics["min_eigenvalue"] = res.min_eigenvalue;
    r.diagnostics["max_imaginary"] = res.max_imaginary;
    r.diagnostics["pre_asymptotic"] = res.pre_asymptotic ? 1.0 : 0.0;
    r.diagnostics["tensor_entries"] = static_cast<double>(tensor_entries(setup.model.dimension(), dk));
    r.diagnostics["retained_norm"] = setup.retained_norm;
    r.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

double interpolate(const std::vector<double>& t, const std::vector<double>& y, double x) {
    auto it = std::lower_bound(t.begin(), t.end(), x);
    if (it == t.begin()) return y.front();
    if (it == t.end()) return y.back();
    const auto i = static_cast<std::size_t>(it - t.begin());
    const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
    return (1.0 - w) * y[i - 1] + w * y[i];
}

double typical_step(const std::vector<double>& t) {
    if (t.size() < 2) return std::numeric_limits<double>::infinity();
    return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

void ensure_parent(const std::filesystem::path& file) {
    std::error_code ec;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) throw IoError("cannot create " + file.parent_path().string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& file) {
    ensure_parent(file);
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& file) {
    out.flush();
    if (!out) throw IoError("write failed for " + file.string());
}

const std::set<std::string>& keys_for(Engine e) {
    static const std::set<std::string> trwa = {"trwa_step"};
    static const std::set<std::string> quapi = {"dt", "dk_max", "max_tensor_entries", "scan_tolerance"};
    static const std::set<std::string> quapi2 = {"dt", "dk_max", "max_tensor_entries", "scan_tolerance",
                                                 "fock_cut", "m_keep", "omega_c"};
    static const std::set<std::string> kernel = {"kernel_t_max", "kernel_step"};
    switch (e) {
        case Engine::Trwa: return trwa;
        case Engine::Quapi1: return quapi;
        case Engine::Quapi2: return quapi2;
        case Engine::Kernel: return kernel;
    }
    return trwa;
}

}  // namespace

const char* engine_name(Engine e) {
    switch (e) {
        case Engine::Trwa: return "trwa";
        case Engine::Quapi1: return "quapi1";
        case Engine::Quapi2: return "quapi2";
        case Engine::Kernel: return "kernel";
    }
    return "?";
}

Engine parse_engine(const std::string& name) {
    const std::string n = trim(name);
    if (n == "trwa") return Engine::Trwa;
    if (n == "quapi1") return Engine::Quapi1;
    if (n == "quapi2") return Engine::Quapi2;
    if (n == "kernel") return Engine::Kernel;
    throw ConfigError("unknown engine '" + n + "' (trwa, quapi1, quapi2, kernel, all)");
}

bool Scenario::has(Engine e) const { return std::find(engines.begin(), engines.end(), e) != engines.end(); }

double Scenario::g0_absolute() const {
    if (g0) return *g0 * delta;
    if (alpha) return map_alpha_to_g0(*alpha, gamma, 1.0);
    throw ConfigError("scenario '" + name + "': neither g0 nor alpha given");
}

double Scenario::alpha_value() const {
    if (alpha) return *alpha;
    if (g0) return map_g0_to_alpha(*g0 * delta, gamma, 1.0);
    throw ConfigError("scenario '" + name + "': neither g0 nor alpha given");
}

void Scenario::validate() const {
    const std::string where = "scenario '" + name + "': ";
    const auto need = [&](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(where + what);
    };
    need(!name.empty(), "empty name");
    need(!engines.empty(), "no engines selected");
    need(delta > 0.0 && std::isfinite(delta), "delta must be > 0");
    need(g0.has_value() != alpha.has_value(), "give exactly one of g0 and alpha");
    need(!g0 || *g0 >= 0.0, "g0 must be >= 0");
    need(!alpha || *alpha >= 0.0, "alpha must be >= 0");
    need(gamma > 0.0 && std::isfinite(gamma), "gamma must be > 0");
    need(beta > 0.0, "beta must be > 0 (inf for zero temperature)");
    need(!has(Engine::Trwa) || std::isinf(beta), "trwa is defined at zero temperature only (beta = inf)");
    const bool dynamics = has(Engine::Trwa) || has(Engine::Quapi1) || has(Engine::Quapi2);
    need(!dynamics || (horizon > 0.0 && std::isfinite(horizon)), "horizon must be > 0");
    need(!has(Engine::Trwa) || trwa_step > 0.0, "trwa_step must be > 0");
    const bool quapi = has(Engine::Quapi1) || has(Engine::Quapi2);
    if (quapi) {
        need(dt > 0.0, "quapi engines need dt > 0");
        need(!dk_max.empty(), "quapi engines need a dk_max list");
        for (int d : dk_max) need(d >= 1, "dk_max entries must be >= 1");
        need(std::is_sorted(dk_max.begin(), dk_max.end()), "dk_max list must be ascending");
        need(max_tensor_entries > 0, "max_tensor_entries must be > 0");
        need(horizon / dt >= 1.0, "horizon shorter than one time step");
    } else {
        need(dt == 0.0 && dk_max.empty(), "dt and dk_max are only meaningful for quapi engines");
    }
    if (has(Engine::Quapi2)) {
        need(fock_cut >= 1 && m_keep >= 2, "fock_cut must be >= 1 and m_keep >= 2");
        need(omega_c > 0.0, "omega_c must be > 0");
    }
    if (has(Engine::Kernel)) need(kernel_t_max > 0.0 && kernel_step > 0.0, "kernel_t_max and kernel_step must be > 0");
    need(tolerance > 0.0 && scan_tolerance > 0.0, "tolerances must be > 0");
    need(compare_horizon >= 0.0, "compare_horizon must be >= 0");
}

std::string Scenario::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    std::vector<std::string> e;
    for (auto x : engines) e.emplace_back(engine_name(x));
    j["engines"] = e;
    j["units"] = "energy Omega; dt, horizon in 1/Delta; kernel time in 1/Omega";
    j["delta"] = delta;
    if (g0) j["g0"] = *g0;
    if (alpha) j["alpha"] = *alpha;
    j["gamma"] = gamma;
    if (has(Engine::Quapi2)) j["omega_c"] = omega_c;
    if (std::isinf(beta)) {
        j["beta"] = "inf";
    } else {
        j["beta"] = beta;
    }
    j["horizon"] = horizon;
    if (has(Engine::Trwa)) j["trwa_step"] = trwa_step;
    if (has(Engine::Quapi1) || has(Engine::Quapi2)) {
        j["dt"] = dt;
        j["dk_max"] = dk_max;
        j["max_tensor_entries"] = max_tensor_entries;
    }
    if (has(Engine::Quapi2)) {
        j["fock_cut"] = fock_cut;
        j["m_keep"] = m_keep;
    }
    if (has(Engine::Kernel)) {
        j["kernel_t_max"] = kernel_t_max;
        j["kernel_step"] = kernel_step;
    }
    j["tolerance"] = tolerance;
    j["compare_horizon"] = compare_horizon;
    return j.dump();
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"engines", "list", "-", "comma list of trwa, quapi1, quapi2, kernel, or all"},
        {"delta", "real", "Omega", "qubit tunnelling splitting"},
        {"g0", "real", "Delta", "qubit-oscillator coupling; exclusive with alpha"},
        {"alpha", "real", "Omega^2", "Lorentzian coupling strength; exclusive with g0"},
        {"gamma", "real list", "-", "oscillator-bath coupling; a list expands into one scenario each"},
        {"omega_c", "real", "Omega", "Ohmic cutoff (quapi2), default 20"},
        {"beta", "real", "1/Omega", "inverse temperature, inf for zero temperature (default)"},
        {"horizon", "real", "1/Delta", "final time of the P(t) series, default 50"},
        {"trwa_step", "real", "1/Delta", "output spacing of the trwa series, default 0.05"},
        {"dt", "real", "1/Delta", "path-integral time step (quapi engines)"},
        {"dk_max", "int list", "steps", "memory lengths, ascending (quapi engines)"},
        {"fock_cut", "int", "-", "oscillator Fock cutoff, total dimension 2*fock_cut (quapi2), default 200"},
        {"m_keep", "int", "-", "kept qubit-oscillator eigenstates M (quapi2), default 2"},
        {"max_tensor_entries", "int", "-", "augmented tensor guard, default 67108864"},
        {"tolerance", "real", "-", "cross-engine sup-norm bound, default 0.1"},
        {"scan_tolerance", "real", "-", "successive-gap bound for scans, default 0.02"},
        {"compare_horizon", "real", "1/Delta", "comparison window, 0 for the full overlap"},
        {"kernel_t_max", "real", "1/Omega", "kernel tabulation end (kernel), default 20"},
        {"kernel_step", "real", "1/Omega", "kernel tabulation spacing (kernel), default 0.02"},
    };
    return keys;
}

std::vector<Scenario> parse_config(const std::string& text, const std::string& origin) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
    }
    std::set<std::string> known;
    for (const auto& k : config_keys()) known.insert(k.key);

    std::vector<Scenario> out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(origin + ": key '" + section + "' outside a [section]");
        const std::string where = origin + " [" + section + "]";
        Scenario base;
        base.name = section;
        std::vector<double> gammas;
        std::set<std::string> seen;
        for (const auto& [key, node] : body) {
            if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
            seen.insert(key);
            const std::string v = node.data();
            const std::string at = where + " " + key;
            if (key == "engines") {
                for (const auto& e : split_list(v)) {
                    if (e == "all") {
                        base.engines = {Engine::Trwa, Engine::Quapi1, Engine::Quapi2};
                    } else {
                        const Engine en = parse_engine(e);
                        if (!base.has(en)) base.engines.push_back(en);
                    }
                }
            } else if (key == "delta") {
                base.delta = parse_number(v, at);
            } else if (key == "g0") {
                base.g0 = parse_number(v, at);
            } else if (key == "alpha") {
                base.alpha = parse_number(v, at);
            } else if (key == "gamma") {
                for (const auto& g : split_list(v)) gammas.push_back(parse_number(g, at));
                if (gammas.empty()) throw ConfigError(at + ": empty list");
            } else if (key == "omega_c") {
                base.omega_c = parse_number(v, at);
            } else if (key == "beta") {
                base.beta = parse_number(v, at);
            } else if (key == "horizon") {
                base.horizon = parse_number(v, at);
            } else if (key == "trwa_step") {
                base.trwa_step = parse_number(v, at);
            } else if (key == "dt") {
                base.dt = parse_number(v, at);
            } else if (key == "dk_max") {
                for (const auto& d : split_list(v)) base.dk_max.push_back(parse_int(d, at));
            } else if (key == "fock_cut") {
                base.fock_cut = parse_int(v, at);
            } else if (key == "m_keep") {
                base.m_keep = parse_int(v, at);
            } else if (key == "max_tensor_entries") {
                const double n = parse_number(v, at);
                if (!(n >= 1.0) || n != std::floor(n) || n > 1e18) throw ConfigError(at + ": not a positive integer");
                base.max_tensor_entries = static_cast<std::size_t>(n);
            } else if (key == "tolerance") {
                base.tolerance = parse_number(v, at);
            } else if (key == "scan_tolerance") {
                base.scan_tolerance = parse_number(v, at);
            } else if (key == "compare_horizon") {
                base.compare_horizon = parse_number(v, at);
            } else if (key == "kernel_t_max") {
                base.kernel_t_max = parse_number(v, at);
            } else if (key == "kernel_step") {
                base.kernel_step = parse_number(v, at);
            }
        }
        if (!seen.count("engines")) throw ConfigError(where + ": missing key 'engines'");
        if (!seen.count("delta")) throw ConfigError(where + ": missing key 'delta'");
        if (gammas.empty()) throw ConfigError(where + ": missing key 'gamma'");
        // Keys owned by an engine are rejected when that engine is not selected.
        for (const auto& key : seen) {
            bool owned = false;
            bool used = false;
            for (Engine e : {Engine::Trwa, Engine::Quapi1, Engine::Quapi2, Engine::Kernel}) {
                if (keys_for(e).count(key)) {
                    owned = true;
                    if (base.has(e)) used = true;
                }
            }
            if (owned && !used) throw ConfigError(where + ": key '" + key + "' is not used by the selected engines");
        }
        for (double g : gammas) {
            Scenario s = base;
            s.gamma = g;
            if (gammas.size() > 1) s.name = section + "_gamma" + format_g(g);
            try {
                s.validate();
            } catch (const ConfigError& e) {
                throw ConfigError(origin + ": " + e.what());
            }
            out.push_back(std::move(s));
        }
    }
    if (out.empty()) throw ConfigError(origin + ": no scenarios");
    return out;
}

std::vector<Scenario> load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::vector<Scenario> preset(int figure) {
    std::vector<Scenario> out;
    const auto add = [&](Scenario s, const std::vector<double>& gammas) {
        for (double g : gammas) {
            Scenario c = s;
            c.gamma = g;
            c.name = s.name + "_gamma" + format_g(g);
            c.validate();
            out.push_back(std::move(c));
        }
    };
    // Gamma grids below the crossover pi Gamma Delta = g0 are not listed in
    // the figures; this one brackets it at g0 = 0.1 Delta.
    const std::vector<double> weak = {0.005, 0.01, 0.02, 0.03};
    const std::vector<double> strong = {0.2, 0.3, 0.4, 0.5};
    Scenario s;
    s.g0 = 0.1;
    switch (figure) {
        case 1:
            s.name = "fig1";
            s.engines = {Engine::Kernel};
            s.delta = 1.0;
            s.kernel_t_max = 100.0;
            s.kernel_step = 0.02;
            add(s, {0.02, 0.1, 0.3, 0.5});
            break;
        case 2:
            s.name = "fig2";
            s.engines = {Engine::Trwa, Engine::Quapi2};
            s.delta = 0.1;
            s.dt = 0.15;
            s.dk_max = {1, 2, 3};
            s.m_keep = 2;
            add(s, weak);
            break;
        case 3:
            s.name = "fig3";
            s.engines = {Engine::Trwa, Engine::Quapi1};
            s.delta = 0.1;
            s.dt = 0.6;
            s.dk_max = {1, 3, 5, 7};
            add(s, strong);
            break;
        case 4:
            s.name = "fig4";
            s.engines = {Engine::Trwa, Engine::Quapi2};
            s.delta = 1.0;
            s.dt = 0.3;
            s.dk_max = {1, 2, 3, 4};
            s.m_keep = 6;
            s.horizon = 200.0;
            s.compare_horizon = 20.0 * kPi;
            add(s, weak);
            break;
        case 5:
            s.name = "fig5";
            s.engines = {Engine::Trwa, Engine::Quapi1};
            s.delta = 1.0;
            s.dt = 0.6;
            s.dk_max = {1, 3, 5, 7};
            add(s, strong);
            break;
        default:
            throw ConfigError("no preset for figure " + std::to_string(figure) + " (1..5)");
    }
    return out;
}

std::vector<RunRecord> run(const Scenario& s) {
    try {
        s.validate();
        std::vector<RunRecord> records;
        if (s.has(Engine::Trwa)) records.push_back(trwa_record(s));
        for (Engine e : {Engine::Quapi1, Engine::Quapi2}) {
            if (!s.has(e)) continue;
            const auto setup = quapi_setup(s, e);
            for (int dk : s.dk_max) records.push_back(quapi_record(s, e, setup, dk));
        }
        const std::string json = s.to_json();
        for (auto& r : records) {
            r.scenario = s.name;
            r.scenario_json = json;
        }
        return records;
    } catch (...) {
        rethrow_with("scenario '" + s.name + "': ");
    }
}

Comparison compare(const RunRecord& a, const RunRecord& b, double tolerance, double window) {
    if (a.times.empty() || b.times.empty() || a.times.size() != a.population.size() ||
        b.times.size() != b.population.size()) {
        throw DomainError("compare needs non-empty records with matching series lengths");
    }
    const bool a_finer = typical_step(a.times) <= typical_step(b.times);
    const RunRecord& fine = a_finer ? a : b;
    const RunRecord& coarse = a_finer ? b : a;
    double lo = std::max(a.times.front(), b.times.front());
    double hi = std::min(a.times.back(), b.times.back());
    if (window > 0.0) hi = std::min(hi, window);
    if (!(hi >= lo)) throw DomainError("compare: records '" + a.label + "' and '" + b.label + "' do not overlap");
    const double slack = 1e-9 * std::max(1.0, std::abs(hi));
    Comparison c;
    c.scenario = a.scenario;
    c.reference = a.label;
    c.candidate = b.label;
    c.window = hi;
    c.tolerance = tolerance;
    double sum = 0.0;
    std::size_t count = 0;
    // Sample where the coarse record has data; interpolating a coarse series
    // onto a fine grid would charge the comparison with its own chord error.
    for (std::size_t i = 0; i < coarse.times.size(); ++i) {
        const double t = coarse.times[i];
        if (t < lo - slack || t > hi + slack) continue;
        const double d = std::abs(coarse.population[i] - interpolate(fine.times, fine.population, t));
        c.sup = std::max(c.sup, d);
        sum += d * d;
        ++count;
    }
    if (count == 0) throw DomainError("compare: no common samples");
    c.rms = std::sqrt(sum / static_cast<double>(count));
    c.pass = c.sup <= tolerance;
    return c;
}

bool RunResult::all_passed() const {
    if (!failures.empty()) return false;
    return std::all_of(comparisons.begin(), comparisons.end(), [](const Comparison& c) { return c.pass; });
}

KernelTable tabulate_kernel(const Scenario& s) {
    try {
        s.validate();
        KernelTable k;
        k.scenario = s.name;
        const auto density = physical_density(s);
        const auto n = static_cast<std::size_t>(std::llround(s.kernel_t_max / s.kernel_step));
        for (std::size_t i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) * s.kernel_step;
            const cplx a = response_kernel(density, s.beta, t);
            k.times.push_back(t);
            k.real.push_back(a.real());
            k.imag.push_back(a.imag());
        }
        k.memory_time = memory_time(k);
        return k;
    } catch (...) {
        rethrow_with("scenario '" + s.name + "': ");
    }
}

double memory_time(const KernelTable& k, double fraction) {
    if (k.times.empty()) throw DomainError("memory_time of an empty table");
    const double threshold = fraction * std::hypot(k.real[0], k.imag[0]);
    std::size_t last = 0;
    for (std::size_t i = 0; i < k.times.size(); ++i) {
        if (std::hypot(k.real[i], k.imag[i]) >= threshold) last = i;
    }
    if (last + 1 >= k.times.size()) return std::numeric_limits<double>::infinity();
    return k.times[last + 1];
}

RunResult run_all(const std::vector<Scenario>& scenarios, unsigned threads) {
    struct Slot {
        std::vector<RunRecord> records;
        std::vector<Comparison> comparisons;
        std::optional<KernelTable> kernel;
        std::string failure;
    };
    std::vector<Slot> slots(scenarios.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            const Scenario& s = scenarios[i];
            Slot& slot = slots[i];
            try {
                if (s.has(Engine::Kernel)) slot.kernel = tabulate_kernel(s);
                slot.records = run(s);
                const RunRecord* trwa = nullptr;
                const RunRecord* best[2] = {nullptr, nullptr};
                for (const auto& r : slot.records) {
                    if (r.engine == Engine::Trwa) trwa = &r;
                    if (r.engine == Engine::Quapi1) best[0] = &r;
                    if (r.engine == Engine::Quapi2) best[1] = &r;
                }
                if (trwa) {
                    for (const auto* q : best) {
                        if (q) slot.comparisons.push_back(compare(*trwa, *q, s.tolerance, s.compare_horizon));
                    }
                } else if (best[0] && best[1]) {
                    slot.comparisons.push_back(compare(*best[0], *best[1], s.tolerance, s.compare_horizon));
                }
            } catch (const std::exception& e) {
                slot.failure = e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(scenarios.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    RunResult out;
    for (auto& slot : slots) {
        for (auto& r : slot.records) out.records.push_back(std::move(r));
        for (auto& c : slot.comparisons) out.comparisons.push_back(std::move(c));
        if (slot.kernel) out.kernels.push_back(std::move(*slot.kernel));
        if (!slot.failure.empty()) out.failures.push_back(std::move(slot.failure));
    }
    return out;
}

ScanAxis parse_axis(const std::string& name) {
    const std::string n = trim(name);
    if (n == "dk_max") return ScanAxis::DkMax;
    if (n == "dt") return ScanAxis::Dt;
    if (n == "m_keep") return ScanAxis::MKeep;
    throw ConfigError("unknown scan axis '" + n + "' (dk_max, dt, m_keep)");
}

const char* axis_name(ScanAxis a) {
    switch (a) {
        case ScanAxis::DkMax: return "dk_max";
        case ScanAxis::Dt: return "dt";
        case ScanAxis::MKeep: return "m_keep";
    }
    return "?";
}

ScanReport scan_convergence(const Scenario& s, ScanAxis axis, const std::vector<double>& values) {
    s.validate();
    Engine engine = Engine::Trwa;
    for (Engine e : s.engines) {
        if (is_quapi(e)) {
            engine = e;
            break;
        }
    }
    if (!is_quapi(engine)) throw ConfigError("scenario '" + s.name + "': scans need a quapi engine");
    if (axis == ScanAxis::MKeep && engine != Engine::Quapi2) {
        throw ConfigError("scenario '" + s.name + "': m_keep scans need quapi2");
    }
    std::vector<double> axis_values = values;
    if (axis_values.empty()) {
        if (axis != ScanAxis::DkMax) throw ConfigError(std::string("scan over ") + axis_name(axis) + " needs explicit values");
        for (int d : s.dk_max) axis_values.push_back(d);
    }
    const bool up = std::is_sorted(axis_values.begin(), axis_values.end(), std::less_equal<>());
    const bool down = std::is_sorted(axis_values.begin(), axis_values.end(), std::greater_equal<>());
    if (!up && !down) throw ConfigError("scan axis values must be ordered");
    if (std::adjacent_find(axis_values.begin(), axis_values.end()) != axis_values.end()) {
        throw ConfigError("scan axis values must be distinct");
    }

    ScanReport rep;
    rep.scenario = s.name;
    rep.axis = axis;
    rep.tolerance = s.scan_tolerance;
    std::vector<std::size_t> done;
    for (double v : axis_values) {
        Scenario c = s;
        c.engines = {engine};
        switch (axis) {
            case ScanAxis::DkMax: c.dk_max = {static_cast<int>(v)}; break;
            case ScanAxis::Dt:
                c.dt = v;
                c.dk_max = {s.dk_max.back()};
                break;
            case ScanAxis::MKeep:
                c.m_keep = static_cast<int>(v);
                c.dk_max = {s.dk_max.back()};
                break;
        }
        ScanPoint p;
        p.value = v;
        try {
            auto recs = run(c);
            rep.records.push_back(std::move(recs.front()));
            done.push_back(rep.points.size());
        } catch (const ResourceError& e) {
            p.refused = true;
            p.note = e.what();
        }
        rep.points.push_back(std::move(p));
    }
    for (std::size_t i = 0; i + 1 < rep.records.size(); ++i) {
        rep.gaps.push_back(compare(rep.records[i], rep.records[i + 1], s.scan_tolerance, s.compare_horizon).sup);
    }
    if (rep.records.size() >= 2) {
        rep.has_verdict = true;
        if (const auto i = sustained_convergence(rep.gaps, s.scan_tolerance)) {
            rep.converged = true;
            rep.converged_value = rep.points[done[*i]].value;
        }
    }
    return rep;
}

std::filesystem::path write_csv(const std::vector<RunRecord>& records, const std::filesystem::path& file) {
    if (records.empty()) throw IoError("no records to write to " + file.string());
    std::vector<double> grid;
    for (const auto& r : records) grid.insert(grid.end(), r.times.begin(), r.times.end());
    std::sort(grid.begin(), grid.end());
    std::vector<double> merged;
    for (double t : grid) {
        if (merged.empty() || t - merged.back() > 1e-9 * std::max(1.0, std::abs(t))) merged.push_back(t);
    }
    auto out = open_out(file);
    std::vector<std::string> echoed;
    for (const auto& r : records) {
        if (std::find(echoed.begin(), echoed.end(), r.scenario_json) != echoed.end()) continue;
        echoed.push_back(r.scenario_json);
        out << "# scenario " << r.scenario_json << '\n';
    }
    out << "# units: t in 1/Delta, P dimensionless\n";
    out << "t";
    for (const auto& r : records) out << ",P_" << r.label;
    out << '\n';
    std::vector<std::size_t> cursor(records.size(), 0);
    for (double t : merged) {
        out << format_full(t);
        for (std::size_t j = 0; j < records.size(); ++j) {
            const auto& r = records[j];
            auto& c = cursor[j];
            out << ',';
            if (c < r.times.size() && std::abs(r.times[c] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
                out << format_full(r.population[c]);
                ++c;
            }
        }
        out << '\n';
    }
    finish(out, file);
    return file;
}

std::filesystem::path write_svg(const std::vector<RunRecord>& records, const std::filesystem::path& file) {
    if (records.empty()) throw IoError("no records to plot to " + file.string());
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    const double w = 760, h = 420, ml = 60, mr = 170, mt = 20, mb = 45;
    double t_max = 0.0, y_min = -1.0, y_max = 1.0;
    for (const auto& r : records) {
        t_max = std::max(t_max, r.times.back());
        for (double p : r.population) {
            y_min = std::min(y_min, p);
            y_max = std::max(y_max, p);
        }
    }
    if (t_max <= 0.0) t_max = 1.0;
    const auto x_of = [&](double t) { return ml + (w - ml - mr) * t / t_max; };
    const auto y_of = [&](double p) { return mt + (h - mt - mb) * (y_max - p) / (y_max - y_min); };
    auto out = open_out(file);
    char buf[160];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                  ml, mt, w - ml - mr, h - mt - mb);
    out << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"#bbb\"/>\n", ml, y_of(0.0),
                  w - mr, y_of(0.0));
    out << buf;
    for (int i = 0; i <= 4; ++i) {
        const double t = t_max * i / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%g\" font-size=\"11\" text-anchor=\"middle\">%g</text>\n",
                      x_of(t), h - mb + 15, t);
        out << buf;
    }
    for (double p : {y_min, 0.0, y_max}) {
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.2g</text>\n",
                      ml - 5, y_of(p) + 4, p);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\">t (1/Delta)</text>\n",
                  ml + (w - ml - mr) / 2, h - 8);
    out << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"14\" y=\"%g\" font-size=\"12\" transform=\"rotate(-90 14 %g)\">P(t)</text>\n",
                  mt + (h - mt - mb) / 2, mt + (h - mt - mb) / 2);
    out << buf;
    for (std::size_t j = 0; j < records.size(); ++j) {
        const auto& r = records[j];
        const char* color = palette[j % (sizeof palette / sizeof *palette)];
        out << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << color << "\" points=\"";
        for (std::size_t i = 0; i < r.times.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x_of(r.times[i]), y_of(r.population[i]));
            out << buf;
        }
        out << "\"/>\n";
        const double ly = mt + 16.0 * static_cast<double>(j + 1);
        std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                      w - mr + 10, ly - 4, w - mr + 30, ly - 4, color);
        out << buf;
        out << "<text x=\"" << (w - mr + 35) << "\" y=\"" << ly << "\" font-size=\"11\">" << r.label << "</text>\n";
    }
    out << "</svg>\n";
    finish(out, file);
    return file;
}

std::filesystem::path write_kernel_csv(const KernelTable& k, const std::filesystem::path& file) {
    if (k.times.empty()) throw IoError("empty kernel table for " + file.string());
    auto out = open_out(file);
    out << "# scenario " << k.scenario << '\n';
    out << "# units: t in 1/Omega, alpha in Omega^2; memory time " << format_full(k.memory_time) << '\n';
    out << "t,re_alpha,im_alpha\n";
    for (std::size_t i = 0; i < k.times.size(); ++i) {
        out << format_full(k.times[i]) << ',' << format_full(k.real[i]) << ',' << format_full(k.imag[i]) << '\n';
    }
    finish(out, file);
    return file;
}

std::filesystem::path write_scan_csv(const ScanReport& r, const std::filesystem::path& file) {
    if (r.points.empty()) throw IoError("empty scan for " + file.string());
    auto out = open_out(file);
    out << "# scenario " << r.scenario << '\n';
    out << "# axis " << axis_name(r.axis) << ", tolerance " << format_full(r.tolerance) << ", verdict ";
    if (!r.has_verdict) {
        out << "none";
    } else if (r.converged) {
        out << "converged at " << format_g(r.converged_value);
    } else {
        out << "not converged";
    }
    out << '\n';
    out << "value,status,gap_to_next\n";
    std::size_t k = 0;
    for (const auto& p : r.points) {
        out << format_g(p.value) << ',' << (p.refused ? "refused" : "ok") << ',';
        if (!p.refused) {
            if (k < r.gaps.size()) out << format_full(r.gaps[k]);
            ++k;
        }
        out << '\n';
    }
    finish(out, file);
    return file;
}

CsvTable read_csv(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot read " + file.string());
    CsvTable t;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.comments.push_back(trim(line.substr(1)));
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find(',', start);
            cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size()) {
            throw IoError(file.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.columns.size()) + " cells");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            if (trim(c).empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end != c.c_str() + c.size()) throw IoError(file.string() + ":" + std::to_string(lineno) + ": bad number");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (!header) throw IoError(file.string() + ": no header row");
    return t;
}

std::vector<std::filesystem::path> emit(const RunResult& result, const std::filesystem::path& dir) {
    if (result.records.empty() && result.kernels.empty()) throw IoError("nothing to emit");
    std::vector<std::filesystem::path> files;
    std::vector<std::string> order;
    for (const auto& r : result.records) {
        if (std::find(order.begin(), order.end(), r.scenario) == order.end()) order.push_back(r.scenario);
    }
    for (const auto& name : order) {
        std::vector<RunRecord> group;
        for (const auto& r : result.records) {
            if (r.scenario == name) group.push_back(r);
        }
        files.push_back(write_csv(group, dir / (sanitize(name) + ".csv")));
        files.push_back(write_svg(group, dir / (sanitize(name) + ".svg")));
    }
    for (const auto& k : result.kernels) files.push_back(write_kernel_csv(k, dir / (sanitize(k.scenario) + "_kernel.csv")));

    nlohmann::ordered_json j;
    j["all_passed"] = result.all_passed();
    auto& recs = j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : result.records) {
        nlohmann::ordered_json o;
        o["scenario"] = r.scenario;
        o["label"] = r.label;
        o["points"] = r.times.size();
        o["diagnostics"] = r.diagnostics;
        o["wall_seconds"] = r.wall_seconds;
        recs.push_back(std::move(o));
    }
    auto& cmps = j["comparisons"] = nlohmann::ordered_json::array();
    for (const auto& c : result.comparisons) {
        cmps.push_back({{"scenario", c.scenario}, {"reference", c.reference}, {"candidate", c.candidate},
                        {"sup", c.sup}, {"rms", c.rms}, {"window", c.window}, {"tolerance", c.tolerance},
                        {"pass", c.pass}});
    }
    auto& kern = j["kernels"] = nlohmann::ordered_json::array();
    for (const auto& k : result.kernels) {
        kern.push_back({{"scenario", k.scenario},
                        {"memory_time", std::isfinite(k.memory_time) ? nlohmann::ordered_json(k.memory_time)
                                                                     : nlohmann::ordered_json("inf")}});
    }
    j["failures"] = result.failures;
    const auto summary = dir / "summary.json";
    auto out = open_out(summary);
    out << j.dump(2) << '\n';
    finish(out, summary);
    files.push_back(summary);
    return files;
}

}  // namespace sbdyn
