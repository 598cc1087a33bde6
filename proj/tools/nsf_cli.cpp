// nsf: run | ensemble | converge | validate
//
//   nsf run      --config FILE [--seed U64] [--out DIR]
//   nsf ensemble --config FILE [--seed U64] [--paths N] [--threads N] [--out DIR]
//   nsf converge --config FILE [--seed U64] [--paths N] [--threads N] [--out DIR]
//   nsf validate --config FILE
//
// --threads falls back to NSF_THREADS, then to the config value.

#include "nsf/nsf.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<int> threads;
    std::optional<std::string> out;
};

nsf::RunConfig load(const Overrides& o) {
    nsf::RunConfig c = nsf::load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.paths) c.paths = *o.paths;
    if (o.out) c.out_dir = *o.out;
    if (o.threads) c.threads = *o.threads;
    else if (std::getenv("NSF_THREADS")) c.threads = nsf::resolve_threads(0);
    nsf::validate_config(c);
    return c;
}

int report_ensemble(const nsf::RunConfig& c, const nsf::EnsembleResult& r) {
    nsf::write_outputs(c.out_dir, r);
    std::cout << "config_hash " << r.summary.config_hash << "\n";
    std::cout << "paths " << r.summary.n_paths << " failed " << r.summary.n_failed << "\n";
    for (const auto& [k, v] : r.summary.invariant_suite) std::cout << (v ? "pass " : "FAIL ") << k << "\n";
    for (const auto& f : r.summary.failures) std::cerr << f << "\n";
    std::cout << "wrote " << c.out_dir << "\n";
    return r.summary.n_failed == 0 ? 0 : 2;
}

int cmd_run(const Overrides& o) {
    nsf::RunConfig c = load(o);
    c.paths = 1;
    return report_ensemble(c, nsf::run_ensemble(c, 1));
}

int cmd_ensemble(const Overrides& o) {
    const nsf::RunConfig c = load(o);
    return report_ensemble(c, nsf::run_ensemble(c, c.threads));
}

int cmd_converge(const Overrides& o) {
    nsf::RunConfig c = load(o);
    nsf::StudyOptions so;
    so.paths = o.paths ? *o.paths : c.converge_paths;
    so.threads = c.threads;
    const auto rep = nsf::convergence_study(c, c.converge_h, so);
    nlohmann::json j;
    j["config_hash"] = nsf::config_hash(c);
    j["time_refinement"] = nsf::order_report_json(rep);

    nsf::StudyOptions joint = so;
    joint.scale_grid = true;
    joint.weak_forms = true;
    const auto jrep = nsf::convergence_study(c, c.converge_h, joint);
    j["joint_refinement"] = nsf::order_report_json(jrep);

    const int cells[] = {int(std::lround(c.sim.L * 64)), int(std::lround(c.sim.L * 128)), int(std::lround(c.sim.L * 256))};
    const auto heat = nsf::heat_mode_study(cells, c.sim.L, c.sim.eps, 0.1 * c.sim.T, 0.25);
    j["heat_mode"] = {{"dx", heat.dx}, {"rate", heat.rate}, {"exact_rate", heat.exact_rate},
                      {"rel_error", heat.rel_error}, {"order", heat.fit.order}, {"r2", heat.fit.r2}};

    std::filesystem::create_directories(c.out_dir);
    std::ofstream(std::filesystem::path(c.out_dir) / "convergence.json") << j.dump(2) << "\n";
    std::cout << "energy order " << rep.energy.order << " (R^2 " << rep.energy.r2 << ")\n";
    std::cout << "entropy order (h and dx together) " << jrep.entropy.order << "\n";
    std::cout << "dissipation order (h and dx together) " << jrep.dissipation.order << "\n";
    std::cout << "weak continuity/momentum/energy orders (h and dx together) " << jrep.weak_continuity.order << " "
              << jrep.weak_momentum.order << " " << jrep.weak_energy.order << "\n";
    std::cout << "heat mode spatial order " << heat.fit.order << "\n";
    std::cout << "wrote " << c.out_dir << "/convergence.json\n";
    return 0;
}

int cmd_validate(const Overrides& o) {
    const nsf::RunConfig c = load(o);
    std::vector<double> z, th;
    for (int i = 0; i <= 90; ++i) z.push_back(std::pow(10.0, -3.0 + 9.0 * i / 90.0));
    for (int i = 0; i <= 20; ++i) th.push_back(0.2 + 4.8 * i / 20.0);
    const auto rep = nsf::validate_hypotheses(c.gas, z, th);
    double gibbs = 0.0;
    const nsf::GasThermo model{c.gas, true};
    for (double r : th)
        for (double t : th) {
            const auto g = nsf::gibbs_residual(model, r, t, 1e-5);
            gibbs = std::max({gibbs, std::abs(g.r1), std::abs(g.r2)});
        }
    const nsf::Scheme scheme = nsf::make_scheme(c);
    std::cout << "config ok, hash " << nsf::config_hash(c) << "\n";
    std::cout << "grid dx " << scheme.grid().dx() << ", steps " << scheme.steps() << "\n";
    std::cout << "md7 range [" << rep.md7_min << ", " << rep.md7_max << "]\n";
    std::cout << "P/Z^(5/3) at Z=" << rep.z_max << ": " << rep.p_ratio_at_zmax << "\n";
    std::cout << "coercivity residual min " << rep.nhelm_min << "\n";
    std::cout << "max Gibbs residual " << gibbs << "\n";
    std::cout << "noise tail sum_{k>K} f_k^2 (to 10^4) " << c.noise.tail_sum_sq(c.noise.K + 1, 10000) << "\n";
    const bool ok = rep.all_pass() && gibbs <= 1e-6;
    std::cout << (ok ? "all hypotheses pass\n" : "hypothesis check FAILED\n");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic compressible Navier-Stokes-Fourier simulator"};
    app.require_subcommand(1);
    Overrides o;
    auto add_common = [&](CLI::App* sub, bool ensemble_flags) {
        sub->add_option("--config", o.config, "configuration file")->required()->check(CLI::ExistingFile);
        if (!ensemble_flags) return;
        sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; }, "base seed");
        sub->add_option_function<std::string>("--out", [&](const std::string& v) { o.out = v; }, "output directory");
    };
    auto* run = app.add_subcommand("run", "one path, ledger and summary");
    add_common(run, true);
    auto* ens = app.add_subcommand("ensemble", "independent paths, ledgers and summary");
    add_common(ens, true);
    auto* conv = app.add_subcommand("converge", "refinement study with shared increments");
    add_common(conv, true);
    for (auto* sub : {ens, conv}) {
        sub->add_option_function<int>("--paths", [&](const int& v) { o.paths = v; }, "number of paths")
            ->check(CLI::PositiveNumber);
        sub->add_option_function<int>("--threads", [&](const int& v) { o.threads = v; }, "worker threads")
            ->check(CLI::PositiveNumber);
    }
    auto* val = app.add_subcommand("validate", "check config and constitutive hypotheses");
    add_common(val, false);

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(o);
        if (ens->parsed()) return cmd_ensemble(o);
        if (conv->parsed()) return cmd_converge(o);
        if (val->parsed()) return cmd_validate(o);
    } catch (const nsf::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
