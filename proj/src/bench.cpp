#include "epijoint/bench.hpp"

#include "epijoint/baselines.hpp"
#include "epijoint/errors.hpp"
#include "epijoint/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace epijoint {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool uses_lambda_t(Method m)
{
    return m == Method::fix_l_empty || m == Method::fix_l_blur || m == Method::fix_l_star
           || m == Method::joint;
}
bool uses_lambda_s(Method m)
{
    return m == Method::fix_l_blur || m == Method::fix_l_star || m == Method::joint;
}

void sort_unique(std::vector<double>& v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

void check_axis(const std::vector<double>& axis, const char* name)
{
    if (axis.empty())
        throw ParameterError(fmt::format("grid axis {} is empty", name));
    for (double v : axis)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ParameterError(fmt::format("grid axis {} has a non-positive value", name));
}

std::vector<double> axis_from_json(const nlohmann::json& j)
{
    if (j.is_array())
        return j.get<std::vector<double>>();
    if (j.is_object())
        return log_grid(j.at("min").get<double>(), j.at("max").get<double>(),
                        j.at("points").get<int>());
    throw ParseError("grid axis must be an array or {min, max, points}", 0);
}

// Points of the grid in lexicographic order.
std::vector<Hyperparameters> enumerate(Method m, const GridSpec& g)
{
    std::vector<Hyperparameters> out;
    switch (m) {
    case Method::ml:
        out.push_back({});
        break;
    case Method::epiestim:
        for (int tau : g.tau)
            out.push_back({0.0, 0.0, 0.0, tau});
        break;
    case Method::fix_l_empty:
        for (double lt : g.lambda_t)
            out.push_back({lt, 0.0, 0.0, 0});
        break;
    case Method::fix_l_blur:
    case Method::fix_l_star:
        for (double lt : g.lambda_t)
            for (double ls : g.lambda_s)
                out.push_back({lt, ls, 0.0, 0});
        break;
    case Method::joint:
        for (double lt : g.lambda_t)
            for (double ls : g.lambda_s)
                for (double ll : g.lambda_l)
                    out.push_back({lt, ls, ll, 0});
        break;
    }
    return out;
}

nlohmann::json hyper_json(Method m, const Hyperparameters& h)
{
    nlohmann::json j = nlohmann::json::object();
    if (m == Method::epiestim)
        j["tau"] = h.tau;
    if (uses_lambda_t(m))
        j["lambda_t"] = h.lambda_t;
    if (uses_lambda_s(m))
        j["lambda_s"] = h.lambda_s;
    if (m == Method::joint)
        j["lambda_l"] = h.lambda_l;
    return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

std::string_view method_name(Method m)
{
    switch (m) {
    case Method::ml:
        return "ML";
    case Method::epiestim:
        return "EpiEstim";
    case Method::fix_l_empty:
        return "fix-L0";
    case Method::fix_l_blur:
        return "fix-Lb";
    case Method::fix_l_star:
        return "fix-L*";
    case Method::joint:
        return "Joint";
    }
    return "?";
}

Method parse_method(std::string_view name)
{
    for (Method m : kAllMethods)
        if (method_name(m) == name)
            return m;
    if (name == "ml")
        return Method::ml;
    if (name == "epiestim")
        return Method::epiestim;
    if (name == "fix-l0" || name == "fix-l-empty")
        return Method::fix_l_empty;
    if (name == "fix-lb" || name == "fix-l-blur")
        return Method::fix_l_blur;
    if (name == "fix-l*" || name == "fix-l-star" || name == "fix-l")
        return Method::fix_l_star;
    if (name == "joint")
        return Method::joint;
    throw ParameterError(fmt::format("unknown method '{}'", name));
}

std::vector<double> log_grid(double lo, double hi, int n)
{
    if (!(lo > 0.0) || !(hi >= lo) || n < 1)
        throw ParameterError("log_grid needs 0 < lo <= hi and at least one point");
    if (n == 1)
        return {lo};
    std::vector<double> out(static_cast<std::size_t>(n));
    const double a = std::log(lo);
    const double step = (std::log(hi) - a) / (n - 1);
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = std::exp(a + step * i);
    out.front() = lo;
    out.back() = hi;
    return out;
}

void GridSpec::normalize()
{
    sort_unique(lambda_t);
    sort_unique(lambda_s);
    sort_unique(lambda_l);
    std::sort(tau.begin(), tau.end());
    tau.erase(std::unique(tau.begin(), tau.end()), tau.end());
}

void GridSpec::validate(Method m) const
{
    if (uses_lambda_t(m))
        check_axis(lambda_t, "lambda_t");
    if (uses_lambda_s(m))
        check_axis(lambda_s, "lambda_s");
    if (m == Method::joint)
        check_axis(lambda_l, "lambda_l");
    if (m == Method::epiestim) {
        if (tau.empty())
            throw ParameterError("grid axis tau is empty");
        for (int t : tau)
            if (t < 1 || t % 2 == 0)
                throw ParameterError("tau values must be odd and positive");
    }
}

std::size_t GridSpec::size(Method m) const
{
    switch (m) {
    case Method::ml:
        return 1;
    case Method::epiestim:
        return tau.size();
    case Method::fix_l_empty:
        return lambda_t.size();
    case Method::fix_l_blur:
    case Method::fix_l_star:
        return lambda_t.size() * lambda_s.size();
    case Method::joint:
        return lambda_t.size() * lambda_s.size() * lambda_l.size();
    }
    return 0;
}

GridSpec GridSpec::default_for(Method m)
{
    switch (m) {
    case Method::fix_l_empty:
        return reduced_for(m, 64);
    case Method::fix_l_blur:
    case Method::fix_l_star:
        return reduced_for(m, 16);
    case Method::joint:
        return reduced_for(m, 8);
    default:
        return reduced_for(m, 1);
    }
}

GridSpec GridSpec::reduced_for(Method m, int n)
{
    GridSpec g;
    if (m == Method::epiestim)
        for (int t = 1; t <= 29; t += 2)
            g.tau.push_back(t);
    if (uses_lambda_t(m))
        g.lambda_t = log_grid(1.0, 100.0, n);
    if (uses_lambda_s(m))
        g.lambda_s = log_grid(0.01, 1000.0, n);
    if (m == Method::joint)
        g.lambda_l = log_grid(0.001, 100.0, n);
    return g;
}

void to_json(nlohmann::json& j, const GridSpec& g)
{
    j = nlohmann::json::object();
    if (!g.lambda_t.empty())
        j["lambda_t"] = g.lambda_t;
    if (!g.lambda_s.empty())
        j["lambda_s"] = g.lambda_s;
    if (!g.lambda_l.empty())
        j["lambda_l"] = g.lambda_l;
    if (!g.tau.empty())
        j["tau"] = g.tau;
}

void from_json(const nlohmann::json& j, GridSpec& g)
{
    g = GridSpec{};
    if (j.contains("lambda_t"))
        g.lambda_t = axis_from_json(j.at("lambda_t"));
    if (j.contains("lambda_s"))
        g.lambda_s = axis_from_json(j.at("lambda_s"));
    if (j.contains("lambda_l"))
        g.lambda_l = axis_from_json(j.at("lambda_l"));
    if (j.contains("tau"))
        g.tau = j.at("tau").get<std::vector<int>>();
    g.normalize();
}

const GridSpec& BenchGrids::for_method(Method m) const
{
    switch (m) {
    case Method::epiestim:
        return epiestim;
    case Method::fix_l_empty:
        return fix_l_empty;
    case Method::joint:
        return joint;
    default:
        return fix_l;
    }
}

BenchGrids BenchGrids::full()
{
    return {GridSpec::default_for(Method::epiestim), GridSpec::default_for(Method::fix_l_empty),
            GridSpec::default_for(Method::fix_l_star), GridSpec::default_for(Method::joint)};
}

BenchGrids BenchGrids::smoke()
{
    return {GridSpec::default_for(Method::epiestim), GridSpec::reduced_for(Method::fix_l_empty, 4),
            GridSpec::reduced_for(Method::fix_l_star, 4), GridSpec::reduced_for(Method::joint, 4)};
}

void to_json(nlohmann::json& j, const BenchGrids& g)
{
    j = {{"epiestim", g.epiestim}, {"fix_l_empty", g.fix_l_empty}, {"fix_l", g.fix_l},
         {"joint", g.joint}};
}

void from_json(const nlohmann::json& j, BenchGrids& g)
{
    g = BenchGrids::full();
    if (j.contains("epiestim"))
        g.epiestim = j.at("epiestim").get<GridSpec>();
    if (j.contains("fix_l_empty"))
        g.fix_l_empty = j.at("fix_l_empty").get<GridSpec>();
    if (j.contains("fix_l"))
        g.fix_l = j.at("fix_l").get<GridSpec>();
    if (j.contains("joint"))
        g.joint = j.at("joint").get<GridSpec>();
}

PointResult evaluate_point(Method m, const SyntheticDataset& data, const SerialInterval& phi,
                           const Hyperparameters& h, const EvalOptions& opts)
{
    PointResult out;
    out.hyper = h;
    try {
        const Matrix& z = data.z.counts;
        const Infectiousness pz = data.phi_z(phi);
        const Vector omega = fidelity_weights(z);
        PdConfig pd = opts.inner;
        pd.lambda_t = h.lambda_t;
        pd.lambda_s = h.lambda_s;
        const Matrix empty = Matrix::Zero(z.rows(), z.rows());

        switch (m) {
        case Method::ml:
            out.r_hat = ml_estimate(z, pz);
            break;
        case Method::epiestim: {
            EpiEstimConfig e;
            e.tau = h.tau;
            out.r_hat = epiestim_estimate(z, pz, e);
            break;
        }
        case Method::fix_l_empty:
        case Method::fix_l_blur:
        case Method::fix_l_star: {
            const Matrix l = m == Method::fix_l_empty ? empty
                             : m == Method::fix_l_blur
                                 ? blur_laplacian(data.l_star, opts.blur_weight).l
                                 : data.l_star.l;
            FixLResult res = estimate_fix_L(z, pz, omega, l, pd, joint_warm_start(z, pz));
            out.unconverged_inner = res.converged ? 0 : 1;
            out.r_hat = std::move(res.r);
            break;
        }
        case Method::joint: {
            JointConfig cfg;
            cfg.lambda_t = h.lambda_t;
            cfg.lambda_s = h.lambda_s;
            cfg.lambda_l = h.lambda_l;
            cfg.n_max = opts.n_max;
            cfg.inner = opts.inner;
            JointResult res = estimate_joint(z, pz, omega, cfg, joint_warm_start(z, pz));
            for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
                const double before = res.objective_trace[i - 1];
                const double after = res.objective_trace[i];
                const double slack = res.trace_kind[i] == HalfStep::l_step ? opts.l_step_slack
                                                                           : opts.r_step_slack;
                if (!(after <= before + slack * std::max(1.0, std::abs(before))))
                    ++out.descent_violations;
            }
            for (const auto& v : res.laplacian_violations)
                if (!v.within_tolerance())
                    ++out.laplacian_violations;
            for (bool c : res.inner_converged)
                out.unconverged_inner += c ? 0 : 1;
            out.r_hat = std::move(res.r_hat);
            out.l_hat = std::move(res.l_hat);
            break;
        }
        }
        out.mrse = mrse(out.r_hat, data.r_star);
        if (!std::isfinite(out.mrse))
            out.mrse = kInf;
    } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
        out.mrse = kInf;
    }
    return out;
}

GridResult grid_search(Method m, const SyntheticDataset& data, const SerialInterval& phi,
                       const GridSpec& grid, const EvalOptions& opts)
{
    GridSpec g = grid;
    g.normalize();
    g.validate(m);
    const std::vector<Hyperparameters> points = enumerate(m, g);
    std::vector<PointResult> results(points.size());

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i) {
        results[static_cast<std::size_t>(i)] =
            evaluate_point(m, data, phi, points[static_cast<std::size_t>(i)], opts);
    }

    GridResult out;
    out.points = points.size();
    std::size_t best = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const PointResult& r = results[i];
        out.failed_points += r.failed ? 1 : 0;
        out.descent_violations += r.descent_violations;
        out.laplacian_violations += r.laplacian_violations;
        out.unconverged_inner += r.unconverged_inner;
        if (r.mrse < results[best].mrse)
            best = i;
    }
    out.best = std::move(results[best]);
    return out;
}

const MethodSummary* BenchReport::find(Method m) const
{
    for (const auto& s : methods)
        if (s.method == m)
            return &s;
    return nullptr;
}

int BenchReport::support_recovered() const
{
    return static_cast<int>(
        std::count_if(support.begin(), support.end(), [](const SupportRecovery& s) { return s.exact; }));
}

nlohmann::json BenchReport::to_json() const
{
    nlohmann::json j;
    j["seeds"] = seeds;
    j["seconds"] = seconds;
    j["grids"] = grids;
    j["scale"] = 1e-4;
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& s : methods) {
        nlohmann::json best = nlohmann::json::array();
        for (const auto& h : s.best)
            best.push_back(hyper_json(s.method, h));
        ms.push_back({{"method", std::string(method_name(s.method))},
                      {"mean_mrse_e4", s.mean * 1e4},
                      {"ci95_e4", s.half_width * 1e4},
                      {"mrse", s.mrse},
                      {"best", best},
                      {"failed_points", s.failed_points},
                      {"descent_violations", s.descent_violations},
                      {"laplacian_violations", s.laplacian_violations},
                      {"unconverged_inner_solves", s.unconverged_inner},
                      {"seconds", s.seconds}});
    }
    j["methods"] = ms;
    nlohmann::json sup = nlohmann::json::array();
    for (const auto& s : support)
        sup.push_back({{"exact", s.exact},
                       {"false_positives", s.false_positives},
                       {"false_negatives", s.false_negatives}});
    j["joint_graph"] = {{"threshold", support_threshold},
                        {"laplacian_error", laplacian_error},
                        {"support", sup},
                        {"support_recovered", support_recovered()}};
    return j;
}

BenchReport BenchReport::from_json(const nlohmann::json& j)
{
    BenchReport r;
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.seconds = j.at("seconds").get<double>();
    r.grids = j.at("grids").get<BenchGrids>();
    for (const auto& m : j.at("methods")) {
        MethodSummary s;
        s.method = parse_method(m.at("method").get<std::string>());
        s.mrse = m.at("mrse").get<std::vector<double>>();
        for (const auto& b : m.at("best")) {
            Hyperparameters h;
            h.lambda_t = b.value("lambda_t", 0.0);
            h.lambda_s = b.value("lambda_s", 0.0);
            h.lambda_l = b.value("lambda_l", 0.0);
            h.tau = b.value("tau", 0);
            s.best.push_back(h);
        }
        s.mean = m.at("mean_mrse_e4").get<double>() * 1e-4;
        s.half_width = m.at("ci95_e4").get<double>() * 1e-4;
        s.failed_points = m.at("failed_points").get<int>();
        s.descent_violations = m.at("descent_violations").get<int>();
        s.laplacian_violations = m.at("laplacian_violations").get<int>();
        s.unconverged_inner = m.at("unconverged_inner_solves").get<int>();
        s.seconds = m.at("seconds").get<double>();
        r.methods.push_back(std::move(s));
    }
    const auto& g = j.at("joint_graph");
    r.support_threshold = g.at("threshold").get<double>();
    r.laplacian_error = g.at("laplacian_error").get<std::vector<double>>();
    for (const auto& s : g.at("support"))
        r.support.push_back({s.at("exact").get<bool>(), s.at("false_positives").get<int>(),
                             s.at("false_negatives").get<int>()});
    return r;
}

std::string BenchReport::to_table() const
{
    std::ostringstream os;
    os << fmt::format("mRSE x 1e-4 over {} seeds, mean (95% half-width)\n", seeds.size());
    for (const auto& s : methods)
        os << fmt::format("{:>16}", method_name(s.method));
    os << '\n';
    for (const auto& s : methods)
        os << fmt::format("{:>16}", fmt::format("{:.2f} ({:.2f})", s.mean * 1e4, s.half_width * 1e4));
    os << '\n';
    if (!laplacian_error.empty()) {
        const double mean_err =
            std::accumulate(laplacian_error.begin(), laplacian_error.end(), 0.0)
            / static_cast<double>(laplacian_error.size());
        os << fmt::format("Joint graph: support recovered in {}/{} seeds at threshold {:g}, "
                          "mean relative squared error {:.3g}\n",
                          support_recovered(), support.size(), support_threshold, mean_err);
    }
    return os.str();
}

BenchReport run_benchmark(const BenchOptions& opts)
{
    if (opts.n_seeds < 2)
        throw ParameterError("the benchmark needs at least two seeds");
    const auto t0 = std::chrono::steady_clock::now();
    const SerialInterval phi = covid_serial_interval();

    BenchReport rep;
    rep.grids = opts.grids;
    rep.support_threshold = opts.support_threshold;
    for (Method m : opts.methods) {
        MethodSummary s;
        s.method = m;
        rep.methods.push_back(s);
    }

    for (int k = 0; k < opts.n_seeds; ++k) {
        SyntheticConfig sc = opts.data;
        sc.seed = opts.first_seed + static_cast<std::uint64_t>(k);
        rep.seeds.push_back(sc.seed);
        const SyntheticDataset data = make_synthetic(sc, phi);
        for (auto& s : rep.methods) {
            const auto t1 = std::chrono::steady_clock::now();
            GridResult g = grid_search(s.method, data, phi, opts.grids.for_method(s.method), opts.eval);
            s.seconds += seconds_since(t1);
            s.mrse.push_back(g.best.mrse);
            s.best.push_back(g.best.hyper);
            s.failed_points += g.failed_points;
            s.descent_violations += g.descent_violations;
            s.laplacian_violations += g.laplacian_violations;
            s.unconverged_inner += g.unconverged_inner;
            if (s.method == Method::joint) {
                if (g.best.failed) {
                    rep.laplacian_error.push_back(kInf);
                    rep.support.push_back({});
                } else {
                    rep.laplacian_error.push_back(
                        laplacian_recovery_error(g.best.l_hat.l, data.l_star.l));
                    rep.support.push_back(
                        support_recovery(g.best.l_hat.l, data.l_star.l, opts.support_threshold));
                }
            }
            if (opts.progress)
                opts.progress(fmt::format("seed {} {}: mRSE {:.4g} x 1e-4 ({:.1f} s)", sc.seed,
                                          method_name(s.method), g.best.mrse * 1e4,
                                          seconds_since(t1)));
        }
    }

    for (auto& s : rep.methods) {
        // Sorted before reduction so the sums do not depend on task order.
        std::vector<double> v = s.mrse;
        std::sort(v.begin(), v.end());
        const double n = static_cast<double>(v.size());
        s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v)
            ss += (x - s.mean) * (x - s.mean);
        s.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    rep.seconds = seconds_since(t0);
    return rep;
}

} // namespace epijoint
