// Command-line front end: single training runs, hyperparameter sweeps,
// ray-traced evaluation, and report aggregation.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "manet/evaluate.hpp"
#include "manet/io.hpp"
#include "manet/runner.hpp"

namespace fs = std::filesystem;
using namespace manet;

namespace {

struct SolveArgs {
    std::string problem = "A";
    std::vector<int> hidden = {32, 32, 32};
    int n_interior = 2500;
    int n_boundary = 500;
    double alpha = 1.0, beta = 1.0, gamma = 1.0;
    std::string optimizer = "lbfgs";
    double timeout_s = 15.0;
    std::size_t max_iter = 0;  // 0: no limit
    double grad_tol = 1e-10;
    int memory = 10;
    double adam_lr = 1e-3, adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    std::vector<std::uint64_t> seeds = {0};
    int eval_rows = 100, eval_cols = 100;
    bool no_iter_nmae = false;
    bool export_plan = false;
    std::size_t rays = 1000000;  // post-hoc trace for problems without an exact reflector
    int bins = 100;
    std::string out = "runs";
};

void add_solve_options(CLI::App& cmd, SolveArgs& a) {
    cmd.add_option("--problem", a.problem, "problem name (A..E)")->capture_default_str();
    cmd.add_option("--hidden", a.hidden, "hidden layer widths")->capture_default_str();
    cmd.add_option("--interior", a.n_interior, "number of interior collocation points")
        ->capture_default_str();
    cmd.add_option("--boundary", a.n_boundary, "number of boundary points")->capture_default_str();
    cmd.add_option("--alpha", a.alpha, "interior residual weight")->capture_default_str();
    cmd.add_option("--beta", a.beta, "convexity penalty weight")->capture_default_str();
    cmd.add_option("--gamma", a.gamma, "boundary penalty weight")->capture_default_str();
    cmd.add_option("--optimizer", a.optimizer, "lbfgs or adam")->capture_default_str();
    cmd.add_option("--timeout", a.timeout_s, "optimization budget in seconds")
        ->capture_default_str();
    cmd.add_option("--max-iter", a.max_iter, "iteration limit (0 = none)")->capture_default_str();
    cmd.add_option("--grad-tol", a.grad_tol, "gradient infinity-norm tolerance")
        ->capture_default_str();
    cmd.add_option("--memory", a.memory, "L-BFGS history length")->capture_default_str();
    cmd.add_option("--adam-lr", a.adam_lr, "Adam learning rate")->capture_default_str();
    cmd.add_option("--adam-beta1", a.adam_beta1, "Adam first-moment decay")->capture_default_str();
    cmd.add_option("--adam-beta2", a.adam_beta2, "Adam second-moment decay")
        ->capture_default_str();
    cmd.add_option("--adam-eps", a.adam_eps, "Adam epsilon")->capture_default_str();
    cmd.add_option("--seeds", a.seeds, "RNG seeds, one run per seed")->capture_default_str();
    cmd.add_option("--eval-rows", a.eval_rows, "evaluation grid rows")->capture_default_str();
    cmd.add_option("--eval-cols", a.eval_cols, "evaluation grid columns")->capture_default_str();
    cmd.add_flag("--no-iter-nmae", a.no_iter_nmae,
                 "skip the per-iteration NMAE column (faster wall clock)");
    cmd.add_flag("--export-plan", a.export_plan, "write the sample plan as CSV");
    cmd.add_option("--rays", a.rays, "rays for the post-hoc trace of problems without an exact "
                                     "reflector")
        ->capture_default_str();
    cmd.add_option("--bins", a.bins, "image bins per side for the post-hoc trace")
        ->capture_default_str();
    cmd.add_option("--out", a.out, "output directory")->capture_default_str();
}

RunConfig to_run_config(const SolveArgs& a) {
    RunConfig cfg;
    const auto id = parse_problem(a.problem);
    if (!id) throw CLI::ValidationError("--problem", "unknown problem '" + a.problem + "'");
    cfg.problem = *id;
    cfg.layer_sizes.clear();
    cfg.layer_sizes.push_back(2);
    for (int w : a.hidden) cfg.layer_sizes.push_back(w);
    cfg.layer_sizes.push_back(1);
    validate_layer_sizes(cfg.layer_sizes);
    if (a.n_interior < 1 || a.n_boundary < 1)
        throw CLI::ValidationError("--interior/--boundary", "point counts must be positive");
    cfg.n_interior = a.n_interior;
    cfg.n_boundary = a.n_boundary;
    if (a.alpha < 0 || a.beta < 0 || a.gamma < 0)
        throw CLI::ValidationError("--alpha/--beta/--gamma", "weights must be nonnegative");
    cfg.weights = {a.alpha, a.beta, a.gamma};
    if (a.optimizer == "lbfgs")
        cfg.optimizer = OptimizerKind::Lbfgs;
    else if (a.optimizer == "adam")
        cfg.optimizer = OptimizerKind::Adam;
    else
        throw CLI::ValidationError("--optimizer", "must be 'lbfgs' or 'adam'");
    cfg.timeout_s = a.timeout_s;
    cfg.max_iter = a.max_iter == 0 ? std::numeric_limits<std::size_t>::max() : a.max_iter;
    cfg.grad_tol = a.grad_tol;
    cfg.lbfgs_memory = static_cast<std::size_t>(a.memory);
    cfg.adam.lr = a.adam_lr;
    cfg.adam.beta1 = a.adam_beta1;
    cfg.adam.beta2 = a.adam_beta2;
    cfg.adam.eps = a.adam_eps;
    cfg.eval_rows = a.eval_rows;
    cfg.eval_cols = a.eval_cols;
    cfg.record_metric = !a.no_iter_nmae;
    return cfg;
}

void write_summary_csv(const std::string& path, const Problem& prob, std::uint64_t seed,
                       const std::string& optimizer, double metric,
                       const std::string& metric_kind, const SolveOutcome& out) {
    std::ofstream os(path);
    os << "problem,seed,optimizer,final_metric,metric_kind,termination_reason,wall_s,"
          "iterations\n";
    os << to_string(prob.id) << ',' << seed << ',' << optimizer << ','
       << detail::fmt_double(metric) << ',' << metric_kind << ','
       << to_string(out.record.reason) << ',' << detail::fmt_double(out.wall_s) << ','
       << out.record.rows.size() - 1 << '\n';
}

/// One training run plus its artifacts; returns the summary metric.
double solve_one(const SolveArgs& args, const RunConfig& cfg, std::uint64_t seed) {
    const Problem prob = make_problem(cfg.problem);
    const fs::path dir = fs::path(args.out) / to_string(cfg.problem) / ("seed" + std::to_string(seed));
    fs::create_directories(dir);

    const SolveOutcome out = run_solve(cfg, seed);
    write_run_csv((dir / "run.csv").string(), out.record);
    save_checkpoint(out.net, (dir / "model.manet").string());
    if (args.export_plan) {
        write_points_csv((dir / "interior.csv").string(), out.plan.interior);
        write_points_csv((dir / "boundary.csv").string(), out.plan.boundary);
    }

    double metric = out.final_metric;
    std::string metric_kind = "nmae";
    if (prob.has_exact()) {
        const auto grid = eval_grid(prob.source, cfg.eval_rows, cfg.eval_cols);
        const ErrorMap em = make_error_map(out.net, prob.exact_solution, grid, cfg.eval_rows,
                                           cfg.eval_cols);
        write_error_map_csv((dir / "errormap.csv").string(), em);
        write_error_map_pgm((dir / "errormap.pgm").string(), em);
        metric = em.nmae;
    } else {
        // no closed form: evaluate by quasi-Monte-Carlo ray tracing
        const Extent extent = default_extent(prob.target);
        const BinnedImage traced =
            ray_trace([&](Vec2 p) { return mapping(out.net, p); }, prob.source,
                      prob.source_density, args.rays, args.bins, args.bins, extent);
        const BinnedImage target = target_image(prob, args.bins, args.bins, extent);
        metric = image_nmae(traced, target);
        metric_kind = "image_nmae";
        write_image_csv((dir / "traced.csv").string(), traced);
        write_image_pgm((dir / "traced.pgm").string(), traced);
        write_image_csv((dir / "target.csv").string(), target);
        write_image_pgm((dir / "target.pgm").string(), target);
    }

    write_summary_csv((dir / "summary.csv").string(), prob, seed, args.optimizer, metric,
                      metric_kind, out);
    std::printf("problem %s seed %llu: %s %.6e, %s after %zu iterations, %.2f s\n",
                to_string(cfg.problem), static_cast<unsigned long long>(seed),
                metric_kind.c_str(), metric, to_string(out.record.reason),
                out.record.rows.size() - 1, out.wall_s);
    return metric;
}

int cmd_solve(const SolveArgs& args) {
    const RunConfig cfg = to_run_config(args);
    for (std::uint64_t seed : args.seeds) solve_one(args, cfg, seed);
    return 0;
}

struct SweepArgs {
    SolveArgs base;
    std::string axis;
    std::vector<std::string> values;
    int width = 32;  // fixed width for the depth axis
    int depth = 3;   // fixed depth for the width axis
};

int cmd_sweep(SweepArgs& args) {
    static const std::set<std::string> kAxes{"n_interior", "n_boundary", "depth", "width",
                                             "optimizer"};
    if (!kAxes.count(args.axis))
        throw CLI::ValidationError("--axis", "must be one of n_interior, n_boundary, depth, "
                                             "width, optimizer");
    if (args.values.empty()) throw CLI::ValidationError("--values", "at least one value");
    {
        const auto id = parse_problem(args.base.problem);
        if (!id || !make_problem(*id).has_exact())
            throw CLI::ValidationError("--problem",
                                       "sweeps compare NMAE and need an exact reflector (A-C)");
    }

    const fs::path sweep_dir = fs::path(args.base.out) / ("sweep_" + args.axis);
    fs::create_directories(sweep_dir);
    std::ofstream tidy(sweep_dir / "sweep.csv");
    tidy << "axis_value,seed,final_nmae,wall_time_s\n";
    std::ofstream summary(sweep_dir / "sweep_summary.csv");
    summary << "axis_value,median_nmae,mean_nmae,ci95_half_width\n";

    for (const std::string& value : args.values) {
        SolveArgs cell = args.base;
        cell.out = (sweep_dir / ("cell_" + value)).string();
        if (args.axis == "n_interior") cell.n_interior = std::stoi(value);
        if (args.axis == "n_boundary") cell.n_boundary = std::stoi(value);
        if (args.axis == "depth") cell.hidden.assign(std::stoul(value), args.width);
        if (args.axis == "width") cell.hidden.assign(args.depth, std::stoi(value));
        if (args.axis == "optimizer") cell.optimizer = value;
        const RunConfig cfg = to_run_config(cell);

        std::vector<double> nmaes, walls;
        for (std::uint64_t seed : args.base.seeds) {
            const double metric = solve_one(cell, cfg, seed);
            const fs::path run_dir =
                fs::path(cell.out) / to_string(cfg.problem) / ("seed" + std::to_string(seed));
            std::ifstream sf(run_dir / "summary.csv");
            nmaes.push_back(metric);
            // wall time from the run record written moments ago
            std::string header, row;
            std::getline(sf, header);
            std::getline(sf, row);
            std::istringstream ss(row);
            std::string field;
            for (int i = 0; i < 7; ++i) std::getline(ss, field, ',');
            walls.push_back(std::stod(field));
            tidy << value << ',' << seed << ',' << detail::fmt_double(metric) << ','
                 << detail::fmt_double(walls.back()) << '\n';
        }
        const MeanCi ci = mean_ci95(nmaes);
        summary << value << ',' << detail::fmt_double(median(nmaes)) << ','
                << detail::fmt_double(ci.mean) << ',' << detail::fmt_double(ci.half_width)
                << '\n';
    }
    std::printf("sweep written to %s\n", sweep_dir.string().c_str());
    return 0;
}

struct RaytraceArgs {
    std::string checkpoint;
    std::string problem = "D";
    std::size_t rays = 1000000;
    int bins = 100;
    bool paper_scale = false;
    std::string out = "runs/raytrace";
};

int cmd_raytrace(const RaytraceArgs& args) {
    const auto id = parse_problem(args.problem);
    if (!id) throw CLI::ValidationError("--problem", "unknown problem '" + args.problem + "'");
    const Problem prob = make_problem(*id);
    const Mlp net = load_checkpoint(args.checkpoint);

    std::size_t rays = args.rays;
    int bins = args.bins;
    if (args.paper_scale) {
        rays = 100000000;
        bins = 250;
    }
    const Extent extent = default_extent(prob.target);
    const BinnedImage traced = ray_trace([&](Vec2 p) { return mapping(net, p); }, prob.source,
                                         prob.source_density, rays, bins, bins, extent);
    const BinnedImage target = target_image(prob, bins, bins, extent);
    const double err = image_nmae(traced, target);

    fs::create_directories(args.out);
    const fs::path dir(args.out);
    write_image_csv((dir / "traced.csv").string(), traced);
    write_image_pgm((dir / "traced.pgm").string(), traced);
    write_image_csv((dir / "target.csv").string(), target);
    write_image_pgm((dir / "target.pgm").string(), target);
    std::ofstream os(dir / "raytrace_summary.csv");
    os << "problem,rays,bins,image_nmae,overflow_weight\n";
    os << to_string(*id) << ',' << rays << ',' << bins << ',' << detail::fmt_double(err) << ','
       << detail::fmt_double(traced.overflow) << '\n';
    std::printf("problem %s: image_nmae %.6e over %zu rays into %dx%d bins\n", to_string(*id),
                err, rays, bins, bins);
    return 0;
}

struct ReportArgs {
    std::string dir = "runs";
};

int cmd_report(const ReportArgs& args) {
    struct Cell {
        std::vector<double> metrics;
        std::vector<double> walls;
        std::string metric_kind;
    };
    std::map<std::pair<std::string, std::string>, Cell> table;  // (problem, optimizer)

    if (!fs::exists(args.dir)) throw CLI::ValidationError("--dir", "no such directory");
    for (const auto& entry : fs::recursive_directory_iterator(args.dir)) {
        if (entry.path().filename() != "summary.csv") continue;
        std::ifstream in(entry.path());
        std::string header, row;
        std::getline(in, header);
        if (!header.starts_with("problem,seed,optimizer")) continue;
        while (std::getline(in, row)) {
            std::istringstream ss(row);
            std::string problem, seed, optimizer, metric, kind, reason, wall;
            std::getline(ss, problem, ',');
            std::getline(ss, seed, ',');
            std::getline(ss, optimizer, ',');
            std::getline(ss, metric, ',');
            std::getline(ss, kind, ',');
            std::getline(ss, reason, ',');
            std::getline(ss, wall, ',');
            Cell& cell = table[{problem, optimizer}];
            cell.metrics.push_back(std::stod(metric));
            cell.walls.push_back(std::stod(wall));
            cell.metric_kind = kind;
        }
    }
    if (table.empty()) {
        std::printf("no run summaries found under %s\n", args.dir.c_str());
        return 1;
    }
    std::printf("%-8s %-9s %-11s %5s %12s %12s %9s\n", "problem", "optimizer", "metric", "runs",
                "median", "best", "wall_s");
    for (const auto& [key, cell] : table) {
        std::vector<double> m = cell.metrics;
        std::printf("%-8s %-9s %-11s %5zu %12.4e %12.4e %9.2f\n", key.first.c_str(),
                    key.second.c_str(), cell.metric_kind.c_str(), m.size(), median(m),
                    *std::min_element(m.begin(), m.end()), median(cell.walls));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural solver for the second-order optimal-transport reflector equation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "declarative run configuration (flags override file values)");

    SolveArgs solve_args;
    CLI::App* solve = app.add_subcommand("solve", "train a reflector network");
    add_solve_options(*solve, solve_args);
    std::string dump_config;
    solve->add_option("--dump-config", dump_config,
                      "write the effective configuration to a file and exit");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "run one hyperparameter axis over seeds");
    add_solve_options(*sweep, sweep_args.base);
    sweep_args.base.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    sweep->get_option("--seeds")->default_val(sweep_args.base.seeds)->capture_default_str();
    sweep->add_option("--axis", sweep_args.axis,
                      "n_interior, n_boundary, depth, width, or optimizer")
        ->required();
    sweep->add_option("--values", sweep_args.values, "axis values")->required();
    sweep->add_option("--fixed-width", sweep_args.width, "width used by the depth axis")
        ->capture_default_str();
    sweep->add_option("--fixed-depth", sweep_args.depth, "depth used by the width axis")
        ->capture_default_str();

    RaytraceArgs rt_args;
    CLI::App* raytrace = app.add_subcommand("raytrace", "evaluate a checkpoint by ray tracing");
    raytrace->add_option("--checkpoint", rt_args.checkpoint, "model checkpoint path")->required();
    raytrace->add_option("--problem", rt_args.problem, "problem name")->capture_default_str();
    raytrace->add_option("--rays", rt_args.rays, "ray count")->capture_default_str();
    raytrace->add_option("--bins", rt_args.bins, "bins per side")->capture_default_str();
    raytrace->add_flag("--paper-scale", rt_args.paper_scale, "use 1e8 rays and 250x250 bins");
    raytrace->add_option("--out", rt_args.out, "output directory")->capture_default_str();

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "aggregate run summaries into a table");
    report->add_option("--dir", report_args.dir, "directory to scan")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) {
            if (!dump_config.empty()) {
                std::ofstream os(dump_config);
                os << app.config_to_str(true, false);
                return 0;
            }
            return cmd_solve(solve_args);
        }
        if (*sweep) return cmd_sweep(sweep_args);
        if (*raytrace) return cmd_raytrace(rt_args);
        if (*report) return cmd_report(report_args);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
