#pragma once
// Run configuration, Monte-Carlo ensembles over independent counter-based
// streams, refinement studies and the summary written next to the ledgers.

#include "nsf/diagnostics.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace nsf {

struct RunConfig {
    GasModel gas;
    DiffusionFamily noise;
    SimParams sim;
    InitialLaw law;
    int paths = 1;
    std::uint64_t seed = 0;
    int record_stride = 1;
    int threads = 1;
    std::string out_dir = "out";
    double Theta = 1.0;
    std::vector<double> converge_h;
    int converge_paths = 1;
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// key -> canonical value string; also the input of config_hash.
inline std::map<std::string, std::string> config_entries(const RunConfig& c) {
    using detail::fmt17;
    std::map<std::string, std::string> e;
    e["a"] = fmt17(c.gas.a);
    e["p_inf"] = fmt17(c.gas.p_inf);
    e["delta"] = fmt17(c.gas.delta);
    e["beta"] = fmt17(c.gas.beta);
    e["mu0"] = fmt17(c.gas.mu0);
    e["eta0"] = fmt17(c.gas.eta0);
    e["kappa0"] = fmt17(c.gas.kappa0);
    e["s_gauge"] = fmt17(c.gas.s_gauge);
    e["m"] = std::to_string(c.sim.m);
    e["N"] = std::to_string(c.sim.N);
    e["L"] = fmt17(c.sim.L);
    e["R"] = fmt17(c.sim.R);
    e["eps"] = fmt17(c.sim.eps);
    e["h"] = fmt17(c.sim.h);
    e["T"] = fmt17(c.sim.T);
    e["heat_amplitude"] = fmt17(c.sim.heat_amplitude);
    e["noise"] = c.sim.noise ? "1" : "0";
    e["f0"] = fmt17(c.noise.f0);
    e["sigma_u"] = fmt17(c.noise.sigma_u);
    e["K"] = std::to_string(c.noise.K);
    e["xi"] = fmt17(c.noise.xi);
    e["hxi_margin"] = fmt17(c.noise.hxi_margin);
    e["rho_bar"] = fmt17(c.law.rho_bar);
    e["rho_low"] = fmt17(c.law.rho_low);
    e["rho_up"] = fmt17(c.law.rho_up);
    e["rho_sd"] = fmt17(c.law.rho_sd);
    e["theta_bar"] = fmt17(c.law.theta_bar);
    e["theta_sd"] = fmt17(c.law.theta_sd);
    e["init_modes"] = std::to_string(c.law.modes);
    e["u0_sd"] = fmt17(c.law.u0_sd);
    e["paths"] = std::to_string(c.paths);
    e["seed"] = std::to_string(c.seed);
    e["record_stride"] = std::to_string(c.record_stride);
    e["threads"] = std::to_string(c.threads);
    e["out_dir"] = c.out_dir;
    e["Theta"] = fmt17(c.Theta);
    std::string hl;
    for (std::size_t i = 0; i < c.converge_h.size(); ++i) hl += (i ? "," : "") + fmt17(c.converge_h[i]);
    e["converge_h"] = hl;
    e["converge_paths"] = std::to_string(c.converge_paths);
    return e;
}

/// FNV-1a 64 over the canonical key=value lines, excluding thread count and output directory.
inline std::string config_hash(const RunConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : config_entries(c)) {
        if (k == "threads" || k == "out_dir") continue;
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Checks every precondition the modules rely on before any path starts.
inline void validate_config(const RunConfig& c) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(c.gas.a > 0.0, "a must be > 0");
    need(c.gas.p_inf > 0.0, "p_inf must be > 0");
    need(c.gas.delta >= 0.0, "delta must be >= 0");
    need(c.gas.delta == 0.0 || c.gas.beta > 6.0, "beta must be > 6 when delta > 0");
    need(c.gas.mu0 > 0.0, "mu0 must be > 0");
    need(c.gas.eta0 >= 0.0, "eta0 must be >= 0");
    need(c.gas.kappa0 > 0.0, "kappa0 must be > 0");
    need(c.sim.m >= 1, "m must be >= 1");
    need(c.sim.N >= 2 && c.sim.m < c.sim.N, "N must exceed m");
    need(c.sim.L > 0.0, "L must be > 0");
    need(c.sim.R > 0.0, "R must be > 0");
    need(c.sim.eps > 0.0, "eps must be > 0");
    need(c.sim.h > 0.0, "h must be > 0");
    need(c.sim.T > 0.0, "T must be > 0");
    need(c.sim.heat_amplitude >= 0.0 && std::isfinite(c.sim.heat_amplitude), "heat_amplitude must be finite and >= 0");
    need(c.noise.K >= 0, "K must be >= 0");
    need(c.noise.f0 >= 0.0, "f0 must be >= 0");
    need(c.noise.sigma_u >= 0.0, "sigma_u must be >= 0");
    if (c.sim.noise && c.noise.f0 > 0.0 && c.noise.K > 0) {
        const double dx = c.sim.L / c.sim.N;
        need(c.noise.xi > 0.0, "xi must be > 0");
        need(dx <= 0.5 * c.noise.xi, "grid spacing L/N = " + detail::fmt17(dx) + " exceeds xi/2; raise N or xi");
        need(c.noise.hxi_margin >= 0.0, "hxi_margin must be >= 0");
        need(2.0 * (c.noise.hxi_margin + 2.0 * c.noise.xi) < c.sim.L,
             "hxi_margin + 2 xi leaves no interior where the noise acts; shrink xi or hxi_margin");
    }
    validate_initial_law(c.law);
    // explicit momentum drift: viscous eigenvalue of the highest mode must stay inside the stability interval
    const double theta_hi = c.law.theta_bar * std::exp(2.0 * c.law.theta_sd * c.law.modes);
    const double rho_lo = c.law.rho_bar * std::exp(-2.0 * c.law.rho_sd * c.law.modes);
    const double lam = std::pow(c.sim.m * 3.141592653589793 / c.sim.L, 2);
    const double stiff = c.sim.h * (stress_modulus(c.gas, theta_hi) + c.sim.eps * rho_lo) * lam / rho_lo;
    need(stiff < 1.0, "h * viscous rate of mode m = " + detail::fmt17(stiff) +
                          " is too large for the explicit momentum step; lower h or m");
    need(c.paths >= 1, "paths must be >= 1");
    need(c.record_stride >= 1, "record_stride must be >= 1");
    need(c.threads >= 1, "threads must be >= 1");
    need(c.Theta >= 0.0, "Theta must be >= 0");
    need(c.converge_paths >= 1, "converge_paths must be >= 1");
    for (std::size_t i = 1; i < c.converge_h.size(); ++i)
        need(c.converge_h[i] < c.converge_h[i - 1], "converge_h must be strictly decreasing");
}

/// Reads a flat key=value file. Every key is required and unknown keys are rejected.
inline RunConfig load_config(const std::string& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    RunConfig c;
    const auto known = config_entries(c);
    std::set<std::string> seen;
    for (const auto& [k, v] : tree) {
        if (!v.empty()) throw ConfigError("config: sections are not supported (" + k + ")");
        if (!known.count(k)) throw ConfigError("config: unknown key '" + k + "'");
        seen.insert(k);
    }
    for (const auto& [k, v] : known)
        if (!seen.count(k)) throw ConfigError("config: missing key '" + k + "'");

    auto num = [&](const char* k) {
        const std::string s = tree.get<std::string>(k);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(std::string("config: key '") + k + "' is not a number: " + s);
        }
    };
    auto integer = [&](const char* k) {
        const double v = num(k);
        if (v != std::floor(v)) throw ConfigError(std::string("config: key '") + k + "' must be an integer");
        return static_cast<long long>(v);
    };
    c.gas.a = num("a");
    c.gas.p_inf = num("p_inf");
    c.gas.delta = num("delta");
    c.gas.beta = num("beta");
    c.gas.mu0 = num("mu0");
    c.gas.eta0 = num("eta0");
    c.gas.kappa0 = num("kappa0");
    c.gas.s_gauge = num("s_gauge");
    c.sim.m = int(integer("m"));
    c.sim.N = int(integer("N"));
    c.sim.L = num("L");
    c.sim.R = num("R");
    c.sim.eps = num("eps");
    c.sim.h = num("h");
    c.sim.T = num("T");
    c.sim.heat_amplitude = num("heat_amplitude");
    c.sim.noise = integer("noise") != 0;
    c.noise.f0 = num("f0");
    c.noise.sigma_u = num("sigma_u");
    c.noise.K = int(integer("K"));
    c.noise.xi = num("xi");
    c.noise.hxi_margin = num("hxi_margin");
    c.noise.eps = c.sim.eps;
    c.noise.L = c.sim.L;
    c.law.rho_bar = num("rho_bar");
    c.law.rho_low = num("rho_low");
    c.law.rho_up = num("rho_up");
    c.law.rho_sd = num("rho_sd");
    c.law.theta_bar = num("theta_bar");
    c.law.theta_sd = num("theta_sd");
    c.law.modes = int(integer("init_modes"));
    c.law.u0_sd = num("u0_sd");
    c.paths = int(integer("paths"));
    c.seed = static_cast<std::uint64_t>(std::stoull(tree.get<std::string>("seed")));
    c.record_stride = int(integer("record_stride"));
    c.threads = int(integer("threads"));
    c.out_dir = tree.get<std::string>("out_dir");
    c.Theta = num("Theta");
    c.converge_h.clear();
    std::stringstream ss(tree.get<std::string>("converge_h"));
    for (std::string tok; std::getline(ss, tok, ',');) {
        if (tok.empty()) continue;
        try {
            c.converge_h.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("config: converge_h entry is not a number: " + tok);
        }
    }
    c.converge_paths = int(integer("converge_paths"));
    validate_config(c);
    return c;
}

inline Scheme make_scheme(const RunConfig& c) { return Scheme(c.gas, c.noise, c.sim); }

/// Thread budget: explicit value if positive, else NSF_THREADS, else 1.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NSF_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers pulling indices from an atomic counter.
template <class F>
void parallel_for(int n, int threads, F&& body) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) body(i);
        });
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Ensemble

struct TimeStats {
    double t = 0.0;
    double mean_E = 0.0, se_E = 0.0, mean_mass = 0.0;
    double drift_measured = 0.0, drift_predicted = 0.0, z = 0.0;
    double mean_stoch = 0.0, se_stoch = 0.0; ///< martingale test on the cumulative stochastic integral
};

struct EnsembleSummary {
    std::string config_hash;
    int n_paths = 0;
    int n_failed = 0;
    std::vector<TimeStats> stats;
    std::map<std::string, bool> invariant_suite;
    std::vector<std::string> failures;
};

struct EnsembleResult {
    EnsembleSummary summary;
    std::vector<PathResult> paths;
};

/// Statistics over completed paths, from the ledgers alone.
inline EnsembleSummary summarize(const std::string& hash, std::span<const DiagnosticsLedger> ledgers,
                                 std::span<const char> failed) {
    EnsembleSummary s;
    s.config_hash = hash;
    s.n_paths = int(ledgers.size());
    std::vector<const DiagnosticsLedger*> ok;
    for (std::size_t p = 0; p < ledgers.size(); ++p) {
        if (failed[p]) ++s.n_failed;
        else ok.push_back(&ledgers[p]);
    }
    std::size_t rows = 0;
    for (const auto* l : ok) rows = std::max(rows, l->rows().size());
    bool mass_ok = true, pos_ok = true, sigma_ok = true, finite_ok = true;
    for (const auto* l : ok) {
        const double m0 = l->rows().front().mass;
        for (const auto& r : l->rows()) {
            mass_ok = mass_ok && std::abs(r.mass - m0) <= 1e-12 * m0;
            pos_ok = pos_ok && r.min_rho > 0.0 && r.min_theta > 0.0;
            sigma_ok = sigma_ok && r.sigma_int >= -1e-10;
            finite_ok = finite_ok && std::isfinite(r.E_delta) && std::isfinite(r.u_h1);
        }
    }
    for (std::size_t k = 0; k < rows; ++k) {
        TimeStats ts;
        std::vector<double> E, mass, stoch;
        for (const auto* l : ok) {
            if (k >= l->rows().size()) continue;
            const auto& r = l->rows()[k];
            ts.t = r.t;
            E.push_back(r.E_delta);
            mass.push_back(r.mass);
            stoch.push_back(r.stoch_inc);
        }
        std::tie(ts.mean_E, ts.se_E) = mean_and_se(E);
        ts.mean_mass = mean_and_se(mass).first;
        std::tie(ts.mean_stoch, ts.se_stoch) = mean_and_se(stoch);
        const auto d = stationarity_drift(ok, k);
        ts.drift_measured = d.measured;
        ts.drift_predicted = d.predicted;
        ts.z = d.z;
        s.stats.push_back(ts);
    }
    s.invariant_suite["mass_conservation"] = mass_ok;
    s.invariant_suite["positivity"] = pos_ok;
    s.invariant_suite["entropy_production_nonnegative"] = sigma_ok;
    s.invariant_suite["finite_energy"] = finite_ok;
    s.invariant_suite["no_failed_paths"] = s.n_failed == 0;
    if (!s.stats.empty() && ok.size() >= 2) {
        const auto& last = s.stats.back();
        s.invariant_suite["martingale_mean_within_3se"] =
            last.se_stoch == 0.0 ? last.mean_stoch == 0.0 : std::abs(last.mean_stoch) <= 3.0 * last.se_stoch;
        s.invariant_suite["energy_drift_within_3se"] = std::abs(last.z) <= 3.0;
    }
    return s;
}

inline EnsembleResult run_ensemble(const RunConfig& c, int threads, const RunOptions& base = {}) {
    validate_config(c);
    const Scheme scheme = make_scheme(c);
    EnsembleResult out;
    out.paths.resize(c.paths);
    RunOptions opt = base;
    opt.record_stride = c.record_stride;
    opt.Theta = c.Theta;
    parallel_for(c.paths, threads, [&](int p) {
        try {
            out.paths[p] = run(scheme, sample_initial(c.law, scheme, c.seed, std::uint32_t(p)), opt);
        } catch (const std::exception& e) {
            out.paths[p].failed = true;
            out.paths[p].error = e.what();
        }
    });
    std::vector<DiagnosticsLedger> ledgers;
    std::vector<char> failed;
    for (const auto& p : out.paths) {
        ledgers.push_back(p.ledger);
        failed.push_back(p.failed || p.ledger.empty() ? 1 : 0);
    }
    out.summary = summarize(config_hash(c), ledgers, failed);
    for (std::size_t p = 0; p < out.paths.size(); ++p)
        if (out.paths[p].failed) out.summary.failures.push_back("path " + std::to_string(p) + ": " + out.paths[p].error);
    return out;
}

inline nlohmann::json summary_json(const EnsembleSummary& s) {
    nlohmann::json j;
    j["config_hash"] = s.config_hash;
    j["n_paths"] = s.n_paths;
    j["n_failed"] = s.n_failed;
    j["stats"] = nlohmann::json::array();
    for (const auto& t : s.stats)
        j["stats"].push_back({{"t", t.t},
                              {"mean_E", t.mean_E},
                              {"se_E", t.se_E},
                              {"mean_mass", t.mean_mass},
                              {"drift_measured", t.drift_measured},
                              {"drift_predicted", t.drift_predicted},
                              {"z", t.z},
                              {"mean_stoch", t.mean_stoch},
                              {"se_stoch", t.se_stoch}});
    j["invariant_suite"] = nlohmann::json::object();
    for (const auto& [k, v] : s.invariant_suite) j["invariant_suite"][k] = v ? "pass" : "fail";
    if (!s.failures.empty()) j["failures"] = s.failures;
    return j;
}

inline std::string ledger_filename(int path) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ledger_%05d.csv", path);
    return buf;
}

inline void write_outputs(const std::filesystem::path& dir, const EnsembleResult& r) {
    std::filesystem::create_directories(dir);
    for (std::size_t p = 0; p < r.paths.size(); ++p) {
        std::ofstream os(dir / ledger_filename(int(p)));
        if (!os) throw std::runtime_error("cannot write ledger in " + dir.string());
        r.paths[p].ledger.write_csv(os);
    }
    std::ofstream js(dir / "summary.json");
    js << summary_json(r.summary).dump(2) << '\n';
}

/// Parses a ledger CSV written by DiagnosticsLedger::write_csv.
inline DiagnosticsLedger read_ledger_csv(std::istream& is) {
    DiagnosticsLedger l;
    std::string line;
    if (!std::getline(is, line) || line != ledger_header) throw std::runtime_error("ledger: unexpected header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        double v[12];
        std::string tok;
        for (double& x : v) {
            if (!std::getline(ss, tok, ',')) throw std::runtime_error("ledger: short row");
            x = std::strtod(tok.c_str(), nullptr);
        }
        l.append({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11]});
    }
    return l;
}

// ---------------------------------------------------------------------------
// Refinement studies

struct LevelResult {
    double h = 0.0;
    int N = 0;
    double rms_energy = 0.0;      ///< RMS over paths of the final cumulative energy residual
    double rms_entropy = 0.0;
    double rms_dissipation = 0.0;
    double rms_weak_continuity = 0.0;
    double rms_weak_momentum = 0.0;
    double rms_weak_energy = 0.0;
    double min_entropy_slack = 0.0;
    int failed = 0;
    std::vector<DiagnosticsLedger> ledgers;
};

struct OrderReport {
    std::vector<LevelResult> levels;
    OrderFit energy, entropy, dissipation, weak_continuity, weak_momentum, weak_energy;
};

struct StudyOptions {
    int paths = 1;
    int threads = 1;
    bool scale_grid = false; ///< refine dx together with h (N proportional to 1/h)
    bool weak_forms = false;
    bool entropy_diagnostics = true;
    bool keep_ledgers = false;
};

/// Runs the configuration at each step size with shared Brownian increments: the
/// finest level draws the Gaussian pool and coarser levels sum it.
inline OrderReport convergence_study(const RunConfig& base, std::span<const double> h_list, const StudyOptions& so) {
    if (h_list.size() < 3) throw ArgumentError("convergence_study: need at least 3 refinement levels");
    for (std::size_t i = 1; i < h_list.size(); ++i)
        if (!(h_list[i] < h_list[i - 1])) throw ArgumentError("convergence_study: step list must decrease");
    const double h_fine = h_list.back();
    OrderReport rep;
    for (double h : h_list) {
        const double ratio = h / h_fine;
        const long sub = std::lround(ratio);
        if (std::abs(ratio - double(sub)) > 1e-9 * ratio)
            throw ArgumentError("convergence_study: each step must be an integer multiple of the finest");
        RunConfig c = base;
        c.sim.h = h;
        if (so.scale_grid) c.sim.N = int(std::lround(base.sim.N * h_list.front() / h));
        validate_config(c);
        const Scheme scheme = make_scheme(c);
        LevelResult lv;
        lv.h = h;
        lv.N = c.sim.N;
        std::vector<PathResult> res(so.paths);
        std::vector<WeakResiduals> weak(so.weak_forms ? so.paths : 0);
        parallel_for(so.paths, so.threads, [&](int p) {
            RunOptions opt;
            opt.Theta = c.Theta;
            opt.keep_trajectory = so.weak_forms;
            opt.entropy_diagnostics = so.entropy_diagnostics;
            try {
                res[p] = run(scheme, sample_initial(c.law, scheme, c.seed, std::uint32_t(p), int(sub)), opt);
                if (so.weak_forms && !res[p].failed) {
                    weak[p] = weak_residuals(scheme, res[p].trajectory, TestBattery{c.sim.T});
                    res[p].trajectory = {};
                }
            } catch (const std::exception& e) {
                res[p].failed = true;
                res[p].error = e.what();
            }
        });
        double se = 0, ss = 0, sd = 0, wc = 0, wm = 0, we = 0;
        int ok = 0;
        lv.min_entropy_slack = std::numeric_limits<double>::infinity();
        for (int p = 0; p < so.paths; ++p) {
            if (res[p].failed) {
                ++lv.failed;
                continue;
            }
            ++ok;
            const auto& last = res[p].ledger.rows().back();
            se += last.e_bal_res * last.e_bal_res;
            ss += last.s_bal_res * last.s_bal_res;
            sd += last.diss_slack * last.diss_slack;
            if (so.weak_forms) {
                wc += std::pow(weak[p].max_continuity(), 2);
                wm += std::pow(weak[p].max_momentum(), 2);
                we += std::pow(weak[p].max_energy(), 2);
                lv.min_entropy_slack = std::min(lv.min_entropy_slack, weak[p].min_entropy_slack());
            }
            if (so.keep_ledgers) lv.ledgers.push_back(res[p].ledger);
        }
        if (!so.weak_forms) lv.min_entropy_slack = 0.0;
        const double n = std::max(ok, 1);
        lv.rms_energy = std::sqrt(se / n);
        lv.rms_entropy = std::sqrt(ss / n);
        lv.rms_dissipation = std::sqrt(sd / n);
        lv.rms_weak_continuity = std::sqrt(wc / n);
        lv.rms_weak_momentum = std::sqrt(wm / n);
        lv.rms_weak_energy = std::sqrt(we / n);
        rep.levels.push_back(std::move(lv));
    }
    std::vector<double> hs, e, s, d, wc, wm, we;
    for (const auto& lv : rep.levels) {
        hs.push_back(lv.h);
        e.push_back(lv.rms_energy);
        s.push_back(lv.rms_entropy);
        d.push_back(lv.rms_dissipation);
        wc.push_back(lv.rms_weak_continuity);
        wm.push_back(lv.rms_weak_momentum);
        we.push_back(lv.rms_weak_energy);
    }
    rep.energy = fit_order(hs, e);
    rep.entropy = fit_order(hs, s);
    rep.dissipation = fit_order(hs, d);
    if (so.weak_forms) {
        rep.weak_continuity = fit_order(hs, wc);
        rep.weak_momentum = fit_order(hs, wm);
        rep.weak_energy = fit_order(hs, we);
    }
    return rep;
}

struct HeatModeStudy {
    std::vector<double> dx, rate, rel_error;
    OrderFit fit;
    double exact_rate = 0.0;
};

/// Decay of the first Neumann cosine mode under the continuity solver, with h = h_factor dx^2
/// so that time and space errors shrink together.
inline HeatModeStudy heat_mode_study(std::span<const int> cells, double L, double eps, double t_end, double h_factor) {
    if (cells.size() < 3) throw ArgumentError("heat_mode_study: need at least 3 grids");
    HeatModeStudy st;
    st.exact_rate = eps * std::pow(3.141592653589793 / L, 2);
    for (int N : cells) {
        const double dx = L / N;
        const double h = t_end / std::ceil(t_end / (h_factor * dx * dx));
        const double r = neumann_mode_decay_rate(N, L, eps, h, t_end);
        st.dx.push_back(dx);
        st.rate.push_back(r);
        st.rel_error.push_back(std::abs(r - st.exact_rate) / st.exact_rate);
    }
    st.fit = fit_order(st.dx, st.rel_error);
    return st;
}

inline nlohmann::json order_report_json(const OrderReport& r) {
    nlohmann::json j;
    auto fit = [](const OrderFit& f) { return nlohmann::json{{"order", f.order}, {"r2", f.r2}}; };
    j["energy"] = fit(r.energy);
    j["entropy"] = fit(r.entropy);
    j["dissipation"] = fit(r.dissipation);
    j["weak_continuity"] = fit(r.weak_continuity);
    j["weak_momentum"] = fit(r.weak_momentum);
    j["weak_energy"] = fit(r.weak_energy);
    j["levels"] = nlohmann::json::array();
    for (const auto& lv : r.levels)
        j["levels"].push_back({{"h", lv.h},
                               {"N", lv.N},
                               {"rms_energy", lv.rms_energy},
                               {"rms_entropy", lv.rms_entropy},
                               {"rms_dissipation", lv.rms_dissipation},
                               {"rms_weak_continuity", lv.rms_weak_continuity},
                               {"rms_weak_momentum", lv.rms_weak_momentum},
                               {"rms_weak_energy", lv.rms_weak_energy},
                               {"min_entropy_slack", lv.min_entropy_slack},
                               {"failed", lv.failed}});
    return j;
}

} // namespace nsf
