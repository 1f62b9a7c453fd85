// Command-line front end: simulate, estimate, learn-graph, benchmark, plot-data.

#include "epijoint/baselines.hpp"
#include "epijoint/bench.hpp"
#include "epijoint/errors.hpp"
#include "epijoint/io.hpp"
#include "epijoint/joint.hpp"
#include "epijoint/metrics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>

using namespace epijoint;

namespace {

struct Options {
    std::string input;
    std::vector<std::string> countries;
    std::string start;
    std::string end;
    std::string method = "joint";
    std::string graph;
    std::string r_hat;
    std::string grid;
    std::string out_dir = ".";
    double lambda_t = 1.0;
    double lambda_s = 1.0;
    double lambda_l = 1.0;
    int tau = 7;
    std::uint64_t seed = 0;
    int n_max = 10;
    double epsilon = 1e-7;
    int k_max = 50000;
    bool no_clip = false;
    bool smooth = false;
    int territories = 9;
    int clusters = 3;
    int days = 300;
    double z0 = 1000.0;
    int seeds = 20;
    bool smoke = false;
};

IngestConfig ingest_config(const Options& o)
{
    IngestConfig cfg;
    cfg.input = o.input;
    cfg.countries = o.countries;
    if (!o.start.empty())
        cfg.start = parse_iso_date(o.start);
    if (!o.end.empty())
        cfg.end = parse_iso_date(o.end);
    cfg.clip_negative = !o.no_clip;
    cfg.smooth = o.smooth;
    return cfg;
}

DatasetFiles load_input(const Options& o)
{
    if (o.input.empty())
        throw ParameterError("--input is required");
    if (fs::is_directory(o.input))
        return read_dataset(o.input);
    return load_counts(o.input, ingest_config(o));
}

nlohmann::json common_config(const Options& o)
{
    return {{"input", o.input},         {"countries", o.countries}, {"start", o.start},
            {"end", o.end},             {"clip", !o.no_clip},       {"smooth", o.smooth},
            {"method", o.method},       {"graph", o.graph},         {"lambda_t", o.lambda_t},
            {"lambda_s", o.lambda_s},   {"lambda_l", o.lambda_l},   {"tau", o.tau},
            {"n_max", o.n_max},         {"epsilon", o.epsilon},     {"k_max", o.k_max},
            {"grid", o.grid}};
}

RunManifest manifest(const std::string& command, const std::vector<std::string>& argv,
                     const nlohmann::json& config)
{
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.config = config;
    return m;
}

std::vector<fs::path> input_files(const std::string& input)
{
    std::vector<fs::path> out;
    if (input.empty())
        return out;
    if (fs::is_directory(input)) {
        for (const char* name : {"counts.csv", "r_star.csv", "l_star.csv", "history.csv", "metadata.json"})
            if (fs::exists(fs::path(input) / name))
                out.push_back(fs::path(input) / name);
    } else {
        out.push_back(input);
    }
    return out;
}

// Graph for fix-L: a CSV path, "empty", or the dataset's own l_star.csv.
Matrix fixed_graph(const Options& o, const DatasetFiles& data)
{
    const Eigen::Index c = data.z.territories();
    if (o.graph == "empty")
        return Matrix::Zero(c, c);
    if (!o.graph.empty()) {
        Matrix l = read_labeled_csv(o.graph).values;
        if (l.rows() != c || l.cols() != c)
            throw DimensionError(fmt::format("graph {} is not {} x {}", o.graph, c, c));
        return l;
    }
    if (data.l_star)
        return *data.l_star;
    return Matrix::Zero(c, c);
}

SyntheticDataset as_benchmark_data(const DatasetFiles& data, const Matrix& graph)
{
    if (!data.r_star)
        throw ParameterError("grid search needs the true R (r_star.csv) in the dataset directory");
    SyntheticDataset ds;
    ds.z = data.z;
    ds.r_star = data.r_star->values;
    ds.l_star = GraphLaplacian{graph};
    ds.history = data.history ? *data.history : Matrix::Zero(data.z.territories(), 0);
    return ds;
}

Method cli_method(const std::string& name, const Matrix& graph)
{
    if (name == "ml")
        return Method::ml;
    if (name == "epiestim")
        return Method::epiestim;
    if (name == "fix-l")
        return graph.isZero(0.0) ? Method::fix_l_empty : Method::fix_l_star;
    if (name == "joint")
        return Method::joint;
    throw ParameterError(fmt::format("unknown method '{}'", name));
}

int run_simulate(const Options& o, const std::vector<std::string>& argv)
{
    SyntheticConfig sc;
    sc.territories = o.territories;
    sc.clusters = o.clusters;
    sc.days = o.days;
    sc.z0 = o.z0;
    sc.seed = o.seed;
    const SyntheticDataset data = make_synthetic(sc, covid_serial_interval());
    RunManifest m = manifest("simulate", argv,
                             {{"territories", o.territories}, {"clusters", o.clusters},
                              {"days", o.days}, {"z0", o.z0}});
    m.seed = o.seed;
    m.outputs = write_dataset(o.out_dir, data);
    m.write(fs::path(o.out_dir) / "manifest.json");
    std::cout << fmt::format("wrote {} territories x {} days to {}\n", data.z.territories(),
                             data.z.days(), o.out_dir);
    return 0;
}

int run_estimate(const Options& o, const std::vector<std::string>& argv)
{
    const DatasetFiles data = load_input(o);
    const SerialInterval phi = covid_serial_interval();
    const Matrix& z = data.z.counts;
    const Infectiousness pz = data.phi_z(phi);
    const Vector omega = fidelity_weights(z);
    const Matrix graph = o.method == "fix-l" ? fixed_graph(o, data) : Matrix();
    const fs::path out(o.out_dir);
    fs::create_directories(out);

    RunManifest m = manifest("estimate", argv, common_config(o));
    m.inputs = input_files(o.input);
    if (!o.graph.empty() && o.graph != "empty")
        m.inputs.push_back(o.graph);
    auto put = [&](const std::string& name, const std::string& content) {
        atomic_write(out / name, content);
        m.outputs.push_back(out / name);
    };

    Hyperparameters h{o.lambda_t, o.lambda_s, o.lambda_l, o.tau};
    nlohmann::json summary;
    if (!o.grid.empty()) {
        const Method method = cli_method(o.method, graph);
        GridSpec g = nlohmann::json::parse(read_file(o.grid)).get<GridSpec>();
        m.inputs.push_back(o.grid);
        EvalOptions eval;
        eval.n_max = o.n_max;
        eval.inner.epsilon = o.epsilon;
        eval.inner.k_max = o.k_max;
        const SyntheticDataset bench_data = as_benchmark_data(data, graph);
        const GridResult best = grid_search(method, bench_data, phi, g, eval);
        h = best.best.hyper;
        summary["grid_points"] = best.points;
        summary["grid_failed_points"] = best.failed_points;
        summary["grid_best_mrse"] = best.best.mrse;
    }
    summary["method"] = o.method;
    summary["lambda_t"] = h.lambda_t;
    summary["lambda_s"] = h.lambda_s;
    summary["lambda_l"] = h.lambda_l;
    summary["tau"] = h.tau;

    ReproMatrix r;
    std::string trace = "step,kind,objective\n";
    if (o.method == "ml") {
        r = ml_estimate(z, pz);
    } else if (o.method == "epiestim") {
        EpiEstimConfig e;
        e.tau = h.tau;
        r = epiestim_estimate(z, pz, e);
    } else if (o.method == "fix-l") {
        PdConfig pd;
        pd.lambda_t = h.lambda_t;
        pd.lambda_s = h.lambda_s;
        pd.epsilon = o.epsilon;
        pd.k_max = o.k_max;
        FixLResult res = estimate_fix_L(z, pz, omega, graph, pd, joint_warm_start(z, pz));
        trace += fmt::format("0,r_step,{}\n", format_real(res.objective));
        summary["iterations"] = res.iterations;
        summary["converged"] = res.converged;
        r = std::move(res.r);
    } else if (o.method == "joint") {
        JointConfig cfg;
        cfg.lambda_t = h.lambda_t;
        cfg.lambda_s = h.lambda_s;
        cfg.lambda_l = h.lambda_l;
        cfg.n_max = o.n_max;
        cfg.inner.epsilon = o.epsilon;
        cfg.inner.k_max = o.k_max;
        JointResult res = estimate_joint(z, pz, omega, cfg, joint_warm_start(z, pz));
        for (std::size_t i = 0; i < res.objective_trace.size(); ++i) {
            const char* kind = res.trace_kind[i] == HalfStep::init     ? "init"
                               : res.trace_kind[i] == HalfStep::r_step ? "r_step"
                                                                       : "l_step";
            trace += fmt::format("{},{},{}\n", i, kind, format_real(res.objective_trace[i]));
        }
        put("l_hat.csv", to_csv(laplacian_table(res.l_hat.l, data.z.territory_ids)));
        summary["inner_iterations"] = res.inner_iterations;
        summary["qp_newton_steps"] = res.qp_newton_steps;
        if (data.l_star) {
            summary["laplacian_error"] = laplacian_recovery_error(res.l_hat.l, *data.l_star);
            const SupportRecovery s = support_recovery(res.l_hat.l, *data.l_star, 1e-6);
            summary["support_recovered"] = s.exact;
            summary["false_positive_edges"] = s.false_positives;
            summary["false_negative_edges"] = s.false_negatives;
        }
        r = std::move(res.r_hat);
    } else {
        throw ParameterError(fmt::format("unknown method '{}'", o.method));
    }

    put("counts.csv", to_csv(counts_table(data.z)));
    put("r_hat.csv", to_csv(repro_table(r, data.z)));
    if (o.method == "fix-l" || o.method == "joint")
        put("objective_trace.csv", trace);
    if (data.r_star) {
        summary["mrse"] = mrse(r, data.r_star->values);
        put("r_star.csv", to_csv(*data.r_star));
    }
    put("summary.json", summary.dump(2) + "\n");
    m.write(out / "manifest.json");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_learn_graph(const Options& o, const std::vector<std::string>& argv)
{
    if (o.r_hat.empty())
        throw ParameterError("--r-hat is required");
    const LabeledMatrix r = read_labeled_csv(o.r_hat);
    std::vector<std::string> ids = r.rows;
    if (!o.input.empty()) {
        const DatasetFiles data = load_input(o);
        if (data.z.territories() != r.values.rows())
            throw DimensionError("R and the counts have different territory counts");
        ids = data.z.territory_ids;
    }
    const LaplacianSolution sol = solve_laplacian_qp(gram(r.values), o.lambda_s, o.lambda_l);
    const fs::path out(o.out_dir);
    RunManifest m = manifest("learn-graph", argv, common_config(o));
    m.inputs = input_files(o.input);
    m.inputs.push_back(o.r_hat);
    write_labeled_csv(out / "l_hat.csv", laplacian_table(sol.laplacian.l, ids));
    m.outputs.push_back(out / "l_hat.csv");
    nlohmann::json summary = {
        {"objective", laplacian_qp_objective(sol.laplacian.l, gram(r.values), o.lambda_s, o.lambda_l)},
        {"newton_steps", sol.stats.newton_steps},
        {"polished", sol.stats.polished},
        {"edges", sol.laplacian.edges(1e-6).size()}};
    atomic_write(out / "summary.json", summary.dump(2) + "\n");
    m.outputs.push_back(out / "summary.json");
    m.write(out / "manifest.json");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_benchmark_cmd(const Options& o, const std::vector<std::string>& argv)
{
    BenchOptions b;
    b.n_seeds = o.seeds;
    b.first_seed = o.seed;
    b.data.territories = o.territories;
    b.data.clusters = o.clusters;
    b.data.days = o.days;
    b.data.z0 = o.z0;
    b.grids = o.smoke ? BenchGrids::smoke() : BenchGrids::full();
    if (!o.grid.empty())
        b.grids = nlohmann::json::parse(read_file(o.grid)).get<BenchGrids>();
    b.eval.n_max = o.n_max;
    b.eval.inner.epsilon = o.epsilon;
    b.eval.inner.k_max = o.k_max;
    b.progress = [](const std::string& line) { std::cerr << line << std::endl; };
    const BenchReport rep = run_benchmark(b);

    const fs::path out(o.out_dir);
    RunManifest m = manifest("benchmark", argv,
                             {{"seeds", o.seeds}, {"smoke", o.smoke}, {"grids", b.grids},
                              {"n_max", o.n_max}, {"epsilon", o.epsilon}, {"k_max", o.k_max}});
    m.seed = o.seed;
    if (!o.grid.empty())
        m.inputs.push_back(o.grid);
    atomic_write(out / "report.json", rep.to_json().dump(2) + "\n");
    atomic_write(out / "report.txt", rep.to_table());
    m.outputs = {out / "report.json", out / "report.txt"};
    m.write(out / "manifest.json");
    std::cout << rep.to_table();
    return 0;
}

int run_plot_data(const Options& o, const std::vector<std::string>& argv)
{
    if (o.input.empty() || !fs::is_directory(o.input))
        throw ParameterError("--input must be an estimate or dataset directory");
    const fs::path in(o.input);
    std::vector<std::pair<std::string, LabeledMatrix>> series;
    RunManifest m = manifest("plot-data", argv, {{"input", o.input}});
    for (const auto& [file, name] : std::vector<std::pair<std::string, std::string>>{
             {"counts.csv", "counts"}, {"r_hat.csv", "R_hat"}, {"r_star.csv", "R_star"}})
        if (fs::exists(in / file)) {
            series.emplace_back(name, read_labeled_csv(in / file));
            m.inputs.push_back(in / file);
        }
    if (series.empty())
        throw ParameterError(fmt::format("no counts.csv, r_hat.csv or r_star.csv in {}", o.input));
    const fs::path out(o.out_dir);
    atomic_write(out / "plot_data.csv", tidy_csv(series));
    m.outputs.push_back(out / "plot_data.csv");
    m.write(out / "plot_manifest.json");
    std::cout << fmt::format("wrote {}\n", (out / "plot_data.csv").string());
    return 0;
}

std::string error_kind(const std::exception& e)
{
    if (dynamic_cast<const ParseError*>(&e))
        return "parse_error";
    if (dynamic_cast<const RangeError*>(&e))
        return "range_error";
    if (dynamic_cast<const DimensionError*>(&e))
        return "dimension_error";
    if (dynamic_cast<const ParameterError*>(&e))
        return "parameter_error";
    if (dynamic_cast<const SolverError*>(&e))
        return "solver_error";
    if (dynamic_cast<const nlohmann::json::exception*>(&e))
        return "json_error";
    return "error";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Joint estimation of reproduction numbers and territory graphs"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::string> args(argv, argv + argc);

    auto data_flags = [&](CLI::App* sub) {
        sub->add_option("--input", o.input, "Dataset directory or CSSE time-series CSV");
        sub->add_option("--countries", o.countries, "Countries to ingest from a CSSE file")
            ->delimiter(',');
        sub->add_option("--start", o.start, "First day (YYYY-MM-DD)");
        sub->add_option("--end", o.end, "Last day (YYYY-MM-DD)");
        sub->add_flag("--no-clip", o.no_clip, "Keep negative daily increments");
        sub->add_flag("--smooth", o.smooth, "7-day centered moving average");
    };
    auto solver_flags = [&](CLI::App* sub) {
        sub->add_option("--n-max", o.n_max, "Outer alternations")->capture_default_str();
        sub->add_option("--epsilon", o.epsilon, "Inner stopping tolerance")->capture_default_str();
        sub->add_option("--k-max", o.k_max, "Inner iteration budget")->capture_default_str();
    };
    auto synth_flags = [&](CLI::App* sub) {
        sub->add_option("--territories", o.territories)->capture_default_str();
        sub->add_option("--clusters", o.clusters)->capture_default_str();
        sub->add_option("--days", o.days)->capture_default_str();
        sub->add_option("--z0", o.z0, "Initial count level")->capture_default_str();
    };

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic clustered dataset");
    sim->add_option("--seed", o.seed)->capture_default_str();
    synth_flags(sim);
    sim->add_option("--out-dir", o.out_dir)->required();

    auto* est = app.add_subcommand("estimate", "Estimate R (and the graph for joint)");
    data_flags(est);
    solver_flags(est);
    est->add_option("--method", o.method)
        ->check(CLI::IsMember({"ml", "epiestim", "fix-l", "joint"}))
        ->capture_default_str();
    est->add_option("--lambda-t", o.lambda_t)->capture_default_str();
    est->add_option("--lambda-s", o.lambda_s)->capture_default_str();
    est->add_option("--lambda-l", o.lambda_l)->capture_default_str();
    est->add_option("--tau", o.tau, "EpiEstim window (odd)")->capture_default_str();
    est->add_option("--graph", o.graph, "Laplacian CSV for fix-l, or 'empty'");
    est->add_option("--grid", o.grid, "GridSpec JSON; selects the best point against r_star.csv");
    est->add_option("--out-dir", o.out_dir)->required();

    auto* lg = app.add_subcommand("learn-graph", "Solve the Laplacian step for a fixed R");
    data_flags(lg);
    lg->add_option("--r-hat", o.r_hat, "R CSV")->required();
    lg->add_option("--lambda-s", o.lambda_s)->capture_default_str();
    lg->add_option("--lambda-l", o.lambda_l)->capture_default_str();
    lg->add_option("--out-dir", o.out_dir)->required();

    auto* bench = app.add_subcommand("benchmark", "Grid-searched comparison on synthetic data");
    bench->add_option("--seeds", o.seeds, "Number of datasets")->capture_default_str();
    bench->add_option("--seed", o.seed, "First dataset seed")->capture_default_str();
    bench->add_flag("--smoke", o.smoke, "4 points per lambda axis");
    bench->add_option("--grid", o.grid, "BenchGrids JSON");
    synth_flags(bench);
    solver_flags(bench);
    bench->add_option("--out-dir", o.out_dir)->required();

    auto* plot = app.add_subcommand("plot-data", "Long-format CSV of an output directory");
    plot->add_option("--input", o.input)->required();
    plot->add_option("--out-dir", o.out_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim)
            return run_simulate(o, args);
        if (*est)
            return run_estimate(o, args);
        if (*lg)
            return run_learn_graph(o, args);
        if (*bench)
            return run_benchmark_cmd(o, args);
        if (*plot)
            return run_plot_data(o, args);
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 1;
}
