#include "hygrid/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "hygrid/errors.hpp"
#include "hygrid/io.hpp"

namespace hygrid {

namespace {

struct RunConfig {
    std::string network;
    std::string disturbance;
    std::string format{"text"};
    std::string output;
    std::string export_model;
    double t_final{10.0};
    double dt{1e-3};
    std::size_t sample_every{1};
    double tol_rank{kRankTolerance};
    double tol_eig{kEigTolerance};
    bool from_equilibrium{false};
};

struct Loaded {
    SystemModel model;
    std::string name;
    std::optional<PassiveElimination> elimination;
};

Loaded load(const RunConfig& cfg) {
    NetworkSpec spec = load_network(cfg.network);
    Loaded l;
    l.name = spec.name;
    const bool passive = std::any_of(spec.nodes.begin(), spec.nodes.end(),
                                     [](const NodeSpec& n) { return n.kind == NodeKind::AcBus; });
    if (passive) {
        l.elimination = eliminate_passive_buses(spec);
        spec = l.elimination->reduced;
    }
    l.model = assemble(spec);
    return l;
}

DisturbanceSchedule disturbance(const RunConfig& cfg, const Loaded& l) {
    if (cfg.disturbance.empty()) return {};
    DisturbanceSchedule s = load_disturbance(cfg.disturbance);
    if (l.elimination) s = transfer_loads(s, *l.elimination);
    s.validate(l.model);
    return s;
}

void maybe_export(const RunConfig& cfg, const SystemModel& model) {
    if (cfg.export_model.empty()) return;
    std::ofstream f(cfg.export_model);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + cfg.export_model, cfg.export_model);
    f << model_to_json(model).dump(2) << "\n";
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
    const Loaded l = load(cfg);
    maybe_export(cfg, l.model);
    StabilityReport rep = verify_stability(l.model, cfg.tol_rank, cfg.tol_eig);
    rep.network = l.name;
    if (cfg.format == "json") out << report_to_json(l.model, rep).dump(2) << "\n";
    else print_report(out, l.model, rep);
    return exit_code(rep.verdict);
}

int cmd_eig(const RunConfig& cfg, std::ostream& out) {
    const Loaded l = load(cfg);
    maybe_export(cfg, l.model);
    const EigenResult eig = eigen_oracle(l.model, cfg.tol_eig);
    if (cfg.format == "json") {
        out << eigen_to_json(eig).dump(2) << "\n";
    } else if (cfg.format == "csv") {
        out << std::setprecision(17) << "real,imag\n";
        for (const auto& z : eig.spectrum) out << z.real() << "," << z.imag() << "\n";
    } else {
        print_eigen(out, eig);
    }
    return 0;
}

int cmd_steady(const RunConfig& cfg, std::ostream& out) {
    const Loaded l = load(cfg);
    const DisturbanceSchedule s = disturbance(cfg, l);
    const Eigen::VectorXd p = l.model.load_vector(s.final_loads());
    const Equilibrium eq = solve_equilibrium(l.model, p);
    if (cfg.format == "csv") {
        print_equilibrium_csv(out, l.model, eq);
    } else {
        out << equilibrium_to_json(l.model, eq, p).dump(2) << "\n";
    }
    return 0;
}

Trajectory run_sim(const RunConfig& cfg, const Loaded& l, const DisturbanceSchedule& s) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.model.dim()));
    SimOptions opt;
    opt.sample_every = cfg.sample_every;
    // V is measured from the equilibrium of the final load set.
    const Eigen::VectorXd p = l.model.load_vector(s.final_loads());
    if (p.cwiseAbs().maxCoeff() > 0.0) {
        try {
            opt.reference = solve_equilibrium(l.model, p).x;
        } catch (const Error&) {
        }
    }
    return simulate(l.model, x0, s, cfg.t_final, cfg.dt, opt);
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const Loaded l = load(cfg);
    const DisturbanceSchedule s = disturbance(cfg, l);
    const Trajectory tr = run_sim(cfg, l, s);
    if (!cfg.output.empty()) {
        std::ofstream f(cfg.output);
        if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + cfg.output, cfg.output);
        write_trajectory_csv(f, tr);
    } else if (cfg.format == "csv") {
        write_trajectory_csv(out, tr);
        return 0;
    }
    out << trajectory_summary(l.model, tr).dump(2) << "\n";
    return 0;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
    const Loaded l = load(cfg);
    maybe_export(cfg, l.model);
    StabilityReport rep = verify_stability(l.model, cfg.tol_rank, cfg.tol_eig);
    rep.network = l.name;
    Json j;
    j["stability"] = report_to_json(l.model, rep);
    j["eigen"] = eigen_to_json(rep.eigen);
    const DisturbanceSchedule s = disturbance(cfg, l);
    if (!cfg.disturbance.empty()) {
        const Eigen::VectorXd p = l.model.load_vector(s.final_loads());
        try {
            j["steady_state"] = equilibrium_to_json(l.model, solve_equilibrium(l.model, p), p);
        } catch (const Error& e) {
            j["steady_state"] = {{"error", e.what()}};
        }
        try {
            j["simulation"] = trajectory_summary(l.model, run_sim(cfg, l, s));
        } catch (const Error& e) {
            j["simulation"] = {{"error", e.what()}};
        }
    }
    out << j.dump(2) << "\n";
    return exit_code(rep.verdict);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stability analysis and simulation of hybrid ac/dc networks with dual-port grid-forming converters",
                 "hygrid"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("network", cfg.network, "network JSON file")->required()->check(CLI::ExistingFile);
    };
    auto add_tols = [&](CLI::App* sub) {
        sub->add_option("--rank-tol", cfg.tol_rank, "relative singular value cutoff")->check(CLI::PositiveNumber);
        sub->add_option("--eig-tol", cfg.tol_eig, "spectral abscissa band treated as marginal")->check(CLI::PositiveNumber);
    };
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--tfinal", cfg.t_final, "simulated time in seconds")->check(CLI::PositiveNumber);
        sub->add_option("--dt", cfg.dt, "RK4 step in seconds")->check(CLI::PositiveNumber);
        sub->add_option("--sample-every", cfg.sample_every, "keep every n-th step")->check(CLI::PositiveNumber);
    };

    auto* check = app.add_subcommand("check", "run the stability checks");
    add_common(check);
    add_tols(check);
    check->add_option("--format", cfg.format)->check(CLI::IsMember({"text", "json"}));
    check->add_option("--export-model", cfg.export_model, "write the assembled matrices as JSON");

    auto* eig = app.add_subcommand("eig", "spectrum on the reachable subspace");
    add_common(eig);
    eig->add_option("--eig-tol", cfg.tol_eig)->check(CLI::PositiveNumber);
    eig->add_option("--format", cfg.format)->check(CLI::IsMember({"text", "json", "csv"}));
    eig->add_option("--export-model", cfg.export_model, "write the assembled matrices as JSON");

    auto* steady = app.add_subcommand("steady-state", "equilibrium under constant loads");
    add_common(steady);
    steady->add_option("--disturbance", cfg.disturbance, "load steps JSON (all steps applied)")
        ->required()
        ->check(CLI::ExistingFile);
    steady->add_option("--format", cfg.format)->check(CLI::IsMember({"json", "csv"}));

    auto* sim = app.add_subcommand("simulate", "RK4 simulation of the linear model");
    add_common(sim);
    add_sim(sim);
    sim->add_option("--disturbance", cfg.disturbance, "load steps JSON")->check(CLI::ExistingFile);
    sim->add_option("--output", cfg.output, "trajectory CSV path");
    sim->add_option("--format", cfg.format)->check(CLI::IsMember({"json", "csv"}));

    auto* report = app.add_subcommand("report", "checks, spectrum, equilibrium and simulation summary as JSON");
    add_common(report);
    add_tols(report);
    add_sim(report);
    report->add_option("--disturbance", cfg.disturbance, "load steps JSON")->check(CLI::ExistingFile);
    report->add_option("--export-model", cfg.export_model, "write the assembled matrices as JSON");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*check) return cmd_check(cfg, out);
        if (*eig) return cmd_eig(cfg, out);
        if (*steady) return cmd_steady(cfg, out);
        if (*sim) return cmd_simulate(cfg, out);
        if (*report) return cmd_report(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace hygrid
