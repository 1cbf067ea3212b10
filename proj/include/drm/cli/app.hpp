#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "drm/analysis.hpp"
#include "drm/bounds.hpp"
#include "drm/cli/config.hpp"
#include "drm/io.hpp"
#include "drm/problems.hpp"
#include "drm/train.hpp"

namespace drm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitAborted = 3;

struct Options {
    std::string config;
    std::string out;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> jobs;
};

namespace detail {

inline std::filesystem::path prepare_output(ExperimentConfig& cfg, const Options& opt) {
    if (!opt.out.empty()) cfg.output = opt.out;
    if (opt.seeds) cfg.analysis.seeds = *opt.seeds;
    if (opt.jobs) cfg.analysis.jobs = *opt.jobs;
    std::filesystem::path dir(cfg.output);
    std::filesystem::create_directories(dir);
    std::ofstream echo(dir / "config.json");
    if (!echo) throw ConfigError("cannot write to output directory '" + cfg.output + "'");
    echo << to_json(cfg).dump(2) << '\n';
    return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p);
    if (!os) throw InvalidArgument("cannot write '" + p.string() + "'");
    os << s;
}

inline std::string fmt_bound(const BoundValue& b) {
    std::ostringstream os;
    if (b.representable)
        os << std::setprecision(6) << b.value;
    else
        os << "1e" << std::fixed << std::setprecision(2) << b.log10();
    return os.str();
}

}  // namespace detail

/// Trains one network and writes params.bin, history.csv and report.json.
inline int cmd_solve(ExperimentConfig cfg, const Options& opt, std::ostream& out, std::ostream& err) {
    const auto dir = detail::prepare_output(cfg, opt);
    const auto& arch = cfg.require_arch();
    const auto problem = make_manufactured(cfg.problem);

    std::optional<SampleBatch> batch;
    if (cfg.train.batch.mode == BatchConfig::Mode::FullBatch)
        batch = sample_batch(problem.domain, cfg.train.batch.n_interior, cfg.train.batch.n_boundary,
                             derive_seed(cfg.train.seed, kBatchStream));
    const auto run = train(arch, problem, cfg.train, batch);
    {
        std::ofstream hist(dir / "history.csv");
        write_history_csv(hist, run.history);
    }
    if (!run.ok()) {
        err << "training aborted: " << run.message << '\n';
        return kExitAborted;
    }
    save_params_file((dir / "params.bin").string(), arch, run.params);

    const NetworkField u(arch, run.params);
    const auto h1 = measure_h1_error(u, problem, cfg.analysis.n_quad, derive_seed(cfg.train.seed, 4));
    json rep;
    rep["problem"] = problem.name;
    rep["arch"] = to_json_value(arch);
    rep["best_loss"] = run.best_loss;
    rep["best_step"] = run.best_step;
    rep["final_loss"] = to_json_value(run.history.back().loss);
    rep["error"] = to_json_value(h1);
    if (batch) rep["generalization_gap"] = measure_gap(u, problem, *batch, cfg.analysis.n_quad, derive_seed(cfg.train.seed, 3));
    detail::write_text(dir / "report.json", rep.dump(2) + "\n");

    out << "problem      " << problem.name << "\n"
        << "arch         " << arch.describe() << "\n"
        << "best loss    " << run.best_loss << " (step " << run.best_step << ")\n"
        << "H1 error     " << h1.h1_error << " (relative " << h1.relative_h1() << ")\n"
        << "outputs      " << dir.string() << "\n";
    return kExitOk;
}

/// Prints and writes the bound report for an architecture, plus the
/// hyper-parameter plan when one is requested.
inline int cmd_bounds(ExperimentConfig cfg, const Options& opt, std::ostream& out, std::ostream&) {
    const auto dir = detail::prepare_output(cfg, opt);
    json doc;
    if (cfg.bounds.plan) {
        auto req = *cfg.bounds.plan;
        req.dimension = cfg.problem.domain.dimension();
        req.constants = cfg.constants;
        const auto plan = plan_hyperparams(req, cfg.problem.bc.kind);
        doc["plan"] = to_json_value(plan);
        out << "plan for eps = " << req.epsilon << ", mu = " << req.mu << ", d = " << req.dimension << "\n"
            << "  depth D            " << plan.depth << "\n"
            << "  parameter count    " << detail::fmt_bound(plan.weight_count) << "\n"
            << "  weight bound B     " << detail::fmt_bound(plan.weight_bound) << "\n"
            << "  samples N = M      " << detail::fmt_bound(plan.samples) << "\n";
        if (plan.beta) out << "  beta = C_coe * eps = " << *plan.beta << "\n";
        for (const auto& w : plan.warnings) out << "  warning: " << w << "\n";
    }
    if (cfg.arch) {
        if (cfg.bounds.N != cfg.bounds.M)
            throw ConfigError("the statistical error bound holds only for N = M (got N = " + std::to_string(cfg.bounds.N) +
                              ", M = " + std::to_string(cfg.bounds.M) + ")");
        const auto rep = bound_report(*cfg.arch, cfg.bounds.N, cfg.bounds.M, cfg.problem.bc, cfg.constants);
        doc["report"] = to_json_value(rep);
        out << "arch " << cfg.arch->describe() << ", N = M = " << cfg.bounds.N << "\n"
            << "  class        B_i          L_i    Rademacher\n";
        for (int i = 0; i < 5; ++i) {
            const auto& c = rep.classes[i];
            out << "  " << std::setw(5) << i + 1 << std::setw(13) << detail::fmt_bound(rep.class_constants.B[i])
                << std::setw(13) << detail::fmt_bound(rep.class_constants.L[i]) << "    "
                << (c.rademacher ? detail::fmt_bound(*c.rademacher) : "n/a (" + c.rademacher_error + ")") << "\n";
        }
        out << "  statistical error bound (C = " << cfg.constants.C_aggregate
            << "): " << detail::fmt_bound(rep.statistical) << "\n";
        if (rep.penalty) out << "  penalty gap bound C_coe * beta = " << *rep.penalty << "\n";
    }
    if (doc.is_null()) throw ConfigError("bounds: config needs 'arch' and/or 'bounds.plan'");
    doc["constants"] = to_json_value(cfg.constants);
    detail::write_text(dir / "bounds.json", doc.dump(2) + "\n");
    return kExitOk;
}

/// Runs the convergence sweep, appending rows to sweep.csv as they complete.
inline int cmd_sweep(ExperimentConfig cfg, const Options& opt, std::ostream& out, std::ostream& err) {
    const auto dir = detail::prepare_output(cfg, opt);
    const auto problem = make_manufactured(cfg.problem);
    std::vector<SweepPlan> plans;
    for (double eps : cfg.sweep.epsilons) {
        HyperParamRequest req;
        req.epsilon = eps;
        req.mu = cfg.sweep.mu;
        req.dimension = problem.dimension();
        req.constants = cfg.constants;
        const auto plan = plan_hyperparams(req, problem.bc.kind);
        auto sp = sweep_plan("eps=" + format_double(eps), eps, plan, problem.dimension(), cfg.sweep.activation);
        plans.push_back(std::move(sp));
    }

    std::ofstream csv(dir / "sweep.csv");
    if (!csv) throw InvalidArgument("cannot write sweep.csv");
    csv << sweep_csv_header() << '\n' << std::flush;

    SweepConfig sc;
    sc.train = cfg.train;
    sc.seeds = cfg.seed_list();
    sc.n_quad = cfg.analysis.n_quad;
    sc.C_aggregate = cfg.constants.C_aggregate;
    sc.calibrate_first_row = cfg.sweep.calibrate_first_row;
    sc.jobs = cfg.analysis.jobs;
    const auto res = convergence_sweep(problem, plans, sc, [&](const SweepRow& r) {
        csv << sweep_csv_row(r) << '\n' << std::flush;
        out << "  " << r.plan_id << " seed " << r.seed << ": " << (r.ok() ? "h1 " + format_double(r.h1_error) : r.status)
            << "\n";
    });

    std::size_t ok = 0;
    for (const auto& r : res.rows) ok += r.ok();
    const auto medians = median_h1_by_plan(plans, res.rows);
    for (std::size_t k = 0; k < plans.size(); ++k)
        out << plans[k].id << " (" << plans[k].arch.describe() << ", N = " << plans[k].N
            << "): median H1 error " << medians[k] << "\n";
    out << "C_aggregate used for stat_bound: " << res.C_aggregate << "\n";
    if (!res.rows.empty() && ok == 0) {
        err << "sweep: every run failed\n";
        return kExitAborted;
    }
    return kExitOk;
}

/// Generalisation gap of trained networks over the seed ensemble, and the
/// error decomposition when analysis.decompose is set.
inline int cmd_gap(ExperimentConfig cfg, const Options& opt, std::ostream& out, std::ostream&) {
    const auto dir = detail::prepare_output(cfg, opt);
    const auto& arch = cfg.require_arch();
    const auto problem = make_manufactured(cfg.problem);
    const auto seeds = cfg.seed_list();
    const std::size_t N = cfg.train.batch.n_interior, M = cfg.train.batch.n_boundary;

    std::vector<double> gaps(seeds.size(), 0.0), losses(seeds.size(), 0.0);
    std::vector<std::string> status(seeds.size(), "ok");
    parallel_for(seeds.size(), cfg.analysis.jobs, [&](std::size_t k) {
        TrainConfig tc = cfg.train;
        tc.seed = seeds[k];
        tc.batch.mode = BatchConfig::Mode::FullBatch;
        const auto batch = sample_batch(problem.domain, N, M, derive_seed(tc.seed, kBatchStream));
        const auto run = train(arch, problem, tc, batch);
        if (!run.ok()) {
            status[k] = "aborted: " + run.message;
            gaps[k] = losses[k] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        losses[k] = run.best_loss;
        gaps[k] = measure_gap(NetworkField(arch, run.params), problem, batch, cfg.analysis.n_quad, derive_seed(tc.seed, 3));
    });

    std::optional<double> bound;
    if (N == M) bound = statistical_error_bound(arch, N, M, problem.bc.alpha, problem.bc.beta, problem.dimension(),
                                                cfg.constants.C_aggregate).value;
    {
        std::ofstream csv(dir / "gap.csv");
        csv << "seed,N,M,best_loss,gap,stat_bound,status\n";
        for (std::size_t k = 0; k < seeds.size(); ++k)
            csv << seeds[k] << ',' << N << ',' << M << ',' << format_double(losses[k]) << ',' << format_double(gaps[k])
                << ',' << format_double(bound.value_or(std::numeric_limits<double>::quiet_NaN())) << ','
                << csv_field(status[k]) << '\n';
    }
    std::vector<double> good;
    for (std::size_t k = 0; k < seeds.size(); ++k)
        if (status[k] == "ok") good.push_back(gaps[k]);
    json summary = {{"N", N}, {"M", M}, {"median_gap", median(good)}, {"mean_gap", mean(good)}, {"runs_ok", good.size()}};
    summary["stat_bound"] = bound ? json(*bound) : json(nullptr);
    out << "median gap " << median(good) << " over " << good.size() << " runs (N = " << N << ", M = " << M << ")\n";

    if (cfg.analysis.decompose) {
        DecompositionConfig dc;
        dc.arch = arch;
        dc.train = cfg.train;
        dc.seeds = seeds;
        dc.approx_samples = cfg.analysis.approx_samples;
        dc.approx_steps = cfg.analysis.approx_steps;
        dc.n_quad = cfg.analysis.n_quad;
        dc.C_aggregate = cfg.constants.C_aggregate;
        dc.jobs = cfg.analysis.jobs;
        const auto rep = decompose_errors(problem, dc);
        summary["decomposition"] = to_json_value(rep);
        out << "e_app " << rep.e_app << "  e_sta " << rep.e_sta << "  e_opt " << rep.e_opt << "\n";
    }
    detail::write_text(dir / "gap.json", summary.dump(2) + "\n");
    if (good.empty() && !seeds.empty()) return kExitAborted;
    return kExitOk;
}

/// H1 distance between the Robin solution at each beta and the Dirichlet
/// solution, from the one-dimensional reference solver.
inline int cmd_penalty(ExperimentConfig cfg, const Options& opt, std::ostream& out, std::ostream&) {
    const auto dir = detail::prepare_output(cfg, opt);
    if (cfg.problem.domain.dimension() != 1) throw ConfigError("penalty: the reference solver needs a 1D problem");
    if (cfg.penalty.betas.size() < 2) throw ConfigError("penalty: need at least two betas");
    ProblemSpec spec = cfg.problem;
    spec.bc = BoundaryCondition::robin(1.0, 1.0);  // only w and f are used
    const auto family = make_manufactured(spec);
    const auto gaps = penalty_gap_1d(family, cfg.penalty.betas, cfg.penalty.n_grid);
    std::vector<double> xs, ys;
    {
        std::ofstream csv(dir / "penalty.csv");
        csv << "beta,h1_gap,bound\n";
        for (const auto& g : gaps) {
            csv << format_double(g.beta) << ',' << format_double(g.h1_gap) << ','
                << format_double(penalty_gap_bound(g.beta, cfg.constants.C_coe)) << '\n';
            xs.push_back(g.beta);
            ys.push_back(g.h1_gap);
        }
    }
    const double slope = loglog_slope(xs, ys);
    const double c_fit = fit_penalty_constant(gaps);
    json summary = {{"loglog_slope", slope}, {"fitted_C_coe", c_fit}, {"n_grid", cfg.penalty.n_grid}};
    detail::write_text(dir / "penalty.json", summary.dump(2) + "\n");
    for (const auto& g : gaps) out << "beta " << g.beta << "  gap " << g.h1_gap << "\n";
    out << "log-log slope " << slope << ", fitted C_coe " << c_fit << "\n";
    return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Deep Ritz solver and error-bound toolkit"};
    app.require_subcommand(1);
    Options opt;
    std::size_t seeds = 0, jobs = 0;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(ExperimentConfig, const Options&, std::ostream&, std::ostream&);
    };
    const Sub subs[] = {
        {"solve", "train one network and measure its error", cmd_solve},
        {"bounds", "evaluate the closed-form bounds and hyper-parameter plan", cmd_bounds},
        {"sweep", "convergence sweep over scaled-constant plans", cmd_sweep},
        {"gap", "generalisation gap (and error decomposition) over seeds", cmd_gap},
        {"penalty", "penalty-gap experiment with the 1D reference solver", cmd_penalty},
    };
    std::vector<CLI::App*> handles;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("--config", opt.config, "JSON configuration file")->required();
        sub->add_option("--out", opt.out, "output directory (overrides the config)");
        sub->add_option("--seeds", seeds, "number of seeds (overrides analysis.seeds)");
        sub->add_option("--jobs", jobs, "worker threads (overrides analysis.jobs)");
        handles.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }
    for (std::size_t k = 0; k < handles.size(); ++k) {
        if (!handles[k]->parsed()) continue;
        if (handles[k]->count("--seeds")) opt.seeds = seeds;
        if (handles[k]->count("--jobs")) opt.jobs = jobs;
        try {
            return subs[k].fn(load_config(opt.config), opt, out, err);
        } catch (const InvalidArgument& e) {
            err << "error: " << e.what() << '\n';
            return kExitInvalid;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return kExitFailure;
        }
    }
    return kExitInvalid;
}

}  // namespace drm::cli
