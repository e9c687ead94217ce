#pragma once

// Acceptance criteria A1-A8. A1-A3 are computed here; A4-A7 read the canned
// experiment runs and add their closed-form and oracle checks; A8 compares
// two complete reproduce runs byte for byte.

#include "filterstab/canned.hpp"
#include "filterstab/discretize.hpp"
#include "filterstab/enumeration.hpp"
#include "filterstab/experiment.hpp"
#include "filterstab/filter.hpp"
#include "filterstab/format.hpp"
#include "filterstab/io.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/mixing.hpp"
#include "filterstab/noise.hpp"
#include "filterstab/oracles.hpp"
#include "filterstab/quadrature.hpp"
#include "filterstab/series.hpp"
#include "filterstab/sg.hpp"
#include "filterstab/simulate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace filterstab {

struct CriterionResult {
    std::string id;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double limit = 0.0; // runtime limit in seconds, 0 for none
};

namespace detail {

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string num(double v)
{
    return format_short(v, 4);
}

/// Folds the runtime limit into the verdict.
inline CriterionResult finish(std::string id, bool ok, std::string detail, double seconds, double limit)
{
    CriterionResult r{std::move(id), ok, std::move(detail), seconds, limit};
    if (limit > 0.0 && seconds >= limit) {
        r.passed = false;
        r.detail += "; runtime " + num(seconds) + " s over the " + num(limit) + " s limit";
    }
    return r;
}

inline Eigen::MatrixXd random_stochastic(std::mt19937_64& rng, int rows, int cols)
{
    std::gamma_distribution<double> gam(0.7, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = gam(rng) + 1e-3;
        }
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

inline Distribution random_law(std::mt19937_64& rng, const CarrierPtr& c)
{
    std::gamma_distribution<double> gam(1.0, 1.0);
    Eigen::VectorXd w(static_cast<Eigen::Index>(c->size()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w[i] = gam(rng) + 1e-3;
    }
    return normalize(c, w);
}

inline HmmModel random_letter_model(std::mt19937_64& rng, int states, int letters)
{
    std::vector<double> atoms;
    for (int i = 0; i < states; ++i) {
        atoms.push_back(i + 1.0);
    }
    std::vector<double> ls;
    for (int i = 0; i < letters; ++i) {
        ls.push_back(i);
    }
    return build_alphabet_hmm(SignalKernel::finite(random_stochastic(rng, states, states)), atoms, ls,
                              random_stochastic(rng, states, letters));
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

} // namespace detail

/// A1: the filter recursion against brute-force path enumeration.
inline CriterionResult criterion_a1()
{
    detail::Stopwatch sw;
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int m = 0; m < 25; ++m) {
        const auto model = detail::random_letter_model(rng, 3, 4);
        const auto nu = detail::random_law(rng, model.states);
        const auto path = simulate_path(model, 5, rng());
        const auto traj = run_filter(model, nu, path);
        const std::span<const double> y(path.y.data() + 1, 5);
        for (std::size_t n = 0; n <= 5; ++n) {
            const auto oracle = enumerate_posterior_oracle(model, nu, y.first(n));
            worst = std::max(worst, (traj.posteriors[n].weights() - oracle.weights()).cwiseAbs().maxCoeff());
        }
    }
    return detail::finish("A1", worst <= 1e-12, "25 models, max |filter - enumeration| = " + detail::num(worst),
                          sw.seconds(), 5.0);
}

/// A2: rho from normalizers vs E_bar(dnu/dnu_bar(X_0) | y), the martingale
/// property, and the predictor bound, all by exact enumeration.
inline CriterionResult criterion_a2()
{
    detail::Stopwatch sw;
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    constexpr std::size_t depth = 8;
    double worst_def = 0.0;
    double worst_mart = 0.0;
    double worst_chain = -std::numeric_limits<double>::infinity();
    for (int fx = 0; fx < 10; ++fx) {
        const auto model = detail::random_letter_model(rng, 2, 2);
        const auto nu = detail::random_law(rng, model.states);
        const auto nu_bar = detail::random_law(rng, model.states);
        const auto ratio = density_ratio(nu, nu_bar);

        // children of each prefix: sum of P_bar(y | prefix) rho(prefix y)
        std::map<std::vector<double>, std::pair<double, double>> groups;
        enumerate_observation_tree(model, nu, nu_bar, depth, [&](const TreeNode& node) {
            if (node.depth == 0) {
                return;
            }
            const std::vector<double> prefix(node.prefix.begin(), node.prefix.end());
            const auto traj = run_filter(model, nu, prefix);
            const auto traj_bar = run_filter(model, nu_bar, prefix);
            const double rho = likelihood_ratio(traj, traj_bar).values().back();
            const auto post0 = enumerate_initial_posterior(model, nu_bar, prefix);
            double cond = 0.0;
            for (std::size_t i = 0; i < post0.size(); ++i) {
                cond += ratio(i) * post0[i];
            }
            worst_def = std::max(worst_def, detail::rel_err(rho, cond));

            auto& g = groups[std::vector<double>(prefix.begin(), prefix.end() - 1)];
            g.first = std::exp(node.parent_log_rho());
            g.second += std::exp(node.log_p_bar - node.parent_log_p_bar) * std::exp(node.log_rho());
        });
        for (const auto& [prefix, g] : groups) {
            worst_mart = std::max(worst_mart, std::abs(g.second - g.first));
        }

        const auto pb = StabilityProblem::finite(model, nu, nu_bar);
        for (int k = 0; k < 5; ++k) {
            const double g0 = unit(rng);
            const double g1 = unit(rng);
            const auto g = ScalarFunction::polynomial({g0, g1 - g0});
            const auto est = exact_series(pb, {MetricRequest::predictor(g), MetricRequest::rho()}, depth);
            const auto chain = check_chain_bound(est.get(MetricKind::predictor_g), est.get(MetricKind::rho_diff),
                                                 std::max(std::abs(g0), std::abs(g1)));
            worst_chain = std::max(worst_chain, chain.worst);
        }
    }
    const bool ok = worst_def <= 1e-12 && worst_mart <= 1e-12 && worst_chain <= 1e-12;
    return detail::finish("A2", ok,
                          "rho vs conditional expectation " + detail::num(worst_def) + ", martingale gap " +
                              detail::num(worst_mart) + ", worst chain excess " + detail::num(worst_chain),
                          sw.seconds(), 10.0);
}

inline StabilityProblem a3_problem()
{
    Eigen::MatrixXd emission(2, 2);
    emission << 0.9, 0.1, 0.1, 0.9;
    auto model = build_alphabet_hmm(SignalKernel::finite(Eigen::MatrixXd::Identity(2, 2)), {1.0, 2.0}, {0.0, 1.0},
                                    emission);
    model.id = "identity-signal";
    return StabilityProblem::finite(model, Distribution::finite({1.0, 2.0}, {0.5, 0.5}),
                                    Distribution::finite({1.0, 2.0}, {0.9, 0.1}));
}

/// A3: predictor forgetting with a signal that never mixes.
inline CriterionResult criterion_a3(std::size_t workers = 0)
{
    detail::Stopwatch sw;
    const auto pb = a3_problem();
    const auto g = ScalarFunction::monomial(1);
    const auto exact = exact_series(pb, {MetricRequest::predictor(g)}, 8).series[0];
    McOptions mc;
    mc.trials = 1000;
    mc.n_max = 50;
    mc.seed = 20240406;
    mc.workers = workers;
    const auto est = predictor_stability_series(pb, g, mc);
    const auto& s = est.series[0];
    const double e_ratio = exact.at(8) / exact.at(1);
    const double m_ratio = s.at(50) / s.at(1);
    const bool ok = e_ratio <= 0.05 && m_ratio <= 0.1 && est.failures.empty();
    return detail::finish("A3", ok,
                          "exact n=8/n=1 " + detail::num(e_ratio) + " (<= 0.05); Monte-Carlo n=1 " +
                              detail::num(s.at(1)) + " +- " + detail::num(s.std_err_at(1)) + ", n=50 " +
                              detail::num(s.at(50)) + " +- " + detail::num(s.std_err_at(50)) + ", ratio " +
                              detail::num(m_ratio) + " (<= 0.1)",
                          sw.seconds(), 30.0);
}

/// Canned runs keyed by experiment name.
struct ReproduceRun {
    std::filesystem::path root;
    std::map<std::string, RunResult> runs;
};

inline ReproduceRun run_canned(const std::filesystem::path& root, std::size_t workers = 0, std::ostream* log = nullptr)
{
    ReproduceRun r{root, {}};
    for (const auto& cfg : canned_experiments()) {
        RunOptions opt;
        opt.output_dir = root / cfg.name;
        opt.workers = workers;
        opt.log = log;
        r.runs.emplace(cfg.name, run_experiment(cfg, opt));
    }
    return r;
}

namespace detail {

inline const RunResult& run_of(const ReproduceRun& rr, const std::string& name)
{
    const auto it = rr.runs.find(name);
    if (it == rr.runs.end()) {
        fail(ErrorKind::invalid_argument, "reproduce run has no experiment " + name);
    }
    return it->second;
}

inline bool usable(const RunResult& r)
{
    return r.status == RunStatus::ok && r.estimate.has_value();
}

} // namespace detail

/// A4: TV forgetting on the moment-matrix fixture, and the non-forgetting control.
inline CriterionResult criterion_a4(const ReproduceRun& rr)
{
    const auto& pos = detail::run_of(rr, "hmm-prop4");
    const auto& neg = detail::run_of(rr, "hmm-prop4-negative");
    const double secs = pos.seconds + neg.seconds;
    if (!detail::usable(pos) || !detail::usable(neg)) {
        return detail::finish("A4", false, "canned runs did not complete", secs, 120.0);
    }
    const auto& tv = pos.estimate->get(MetricKind::tv);
    const auto& tv_neg = neg.estimate->get(MetricKind::tv);
    const double r_pos = tv.at(200) / tv.at(1);
    const double r_neg = tv_neg.at(200) / tv_neg.at(1);
    const bool b_ok = pos.moments && std::abs(pos.moments->determinant + 1.0) <= 1e-8;
    const bool ok = r_pos < 0.1 && r_neg > 0.5 && b_ok;
    return detail::finish("A4", ok,
                          "tv n=1 " + detail::num(tv.at(1)) + ", n=200 " + detail::num(tv.at(200)) + ", ratio " +
                              detail::num(r_pos) + " (< 0.1); control ratio " + detail::num(r_neg) +
                              " (> 0.5); det B " + (pos.moments ? detail::num(pos.moments->determinant) : "n/a"),
                          secs, 120.0);
}

/// A5: fitted TV decay rate against -lambda_* / lambda^* + slack, and lambda_circ.
inline CriterionResult criterion_a5(const ReproduceRun& rr)
{
    const auto& run = detail::run_of(rr, "mixing-rate");
    if (!detail::usable(run) || !run.rate || !run.mixing) {
        return detail::finish("A5", false, "mixing-rate run has no rate fit", run.seconds, 120.0);
    }
    const bool circ_ok = run.mixing->lambda_circ && *run.mixing->lambda_circ == 0.3;
    const bool ok = run.rate->satisfied && !run.rate->degenerate && circ_ok;
    return detail::finish(
        "A5", ok,
        "tail slope " + detail::num(run.rate->slope) + " over n=" + std::to_string(run.rate->fit_from) + ".." +
            std::to_string(run.rate->fit_to) + " (<= " + detail::num(run.rate->bound) + "); lambda_circ " +
            (run.mixing->lambda_circ ? format_double(*run.mixing->lambda_circ) : "n/a") + " (== 0.3)",
        run.seconds, 120.0);
}

/// A6: closed forms of the multiplicative-noise model and SG priors, and weak
/// stability of the gridded filter.
inline CriterionResult criterion_a6(const ReproduceRun& rr)
{
    detail::Stopwatch sw;
    const auto density = [](double x) { return mult_noise_density(x, 1.0); };
    const double mass = 2.0 * integrate_half_line(density).value;
    const double abs_mean = abs_mean_xi(1.0);
    double worst_c = 0.0;
    for (int i = 0; i <= 5; ++i) {
        const auto moment = [i](double x) {
            if (x == 0.0) {
                return i == 0 ? 1.0 / std::sqrt(2.0 * std::numbers::pi) : 0.0;
            }
            return std::exp(2.0 * i * std::log(x) - 0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        };
        const double quad = 2.0 * integrate_half_line(moment).value;
        double dfact = 1.0;
        for (int k = 2 * i - 1; k > 1; k -= 2) {
            dfact *= k;
        }
        worst_c = std::max({worst_c, std::abs(quad - dfact), std::abs(sg_normalizer(i) - dfact)});
    }
    const ContinuousPrior nu{SgParams{0.7, {0.5, 0.5}}, 0.0};
    bool sweep_ok = true;
    for (double sigma_bar : {0.5, 0.7, 1.0}) {
        const bool bounded = prior_ratio_sup(nu, ContinuousPrior::gaussian(0.0, sigma_bar)).has_value();
        sweep_ok = sweep_ok && bounded == (sigma_bar > 0.7);
    }
    const bool closed_ok = std::abs(mass - 1.0) <= 1e-8 && std::abs(abs_mean - std::sqrt(std::numbers::pi)) <= 1e-6 &&
                           worst_c <= 1e-8 && sweep_ok;
    std::string msg = "mass " + format_double(mass) + ", E|xi| - sqrt(pi) " +
                         detail::num(abs_mean - std::sqrt(std::numbers::pi)) + ", C_2i error " +
                         detail::num(worst_c) + ", ratio sweep " + (sweep_ok ? "ok" : "wrong");
    const auto& run = detail::run_of(rr, "sg-volatility");
    const double secs = sw.seconds() + run.seconds;
    if (!detail::usable(run)) {
        return detail::finish("A6", false, msg + "; sg-volatility run did not complete", secs, 300.0);
    }
    const auto& weak = run.estimate->get(MetricKind::weak_f);
    const double ratio = weak.at(100) / weak.at(1);
    msg += "; weak |x| n=1 " + detail::num(weak.at(1)) + ", n=100 " + detail::num(weak.at(100)) + ", ratio " +
              detail::num(ratio) + " (< 0.2)";
    return detail::finish("A6", closed_ok && ratio < 0.2, msg, secs, 300.0);
}

/// Largest gap between grid-filter posterior means and the Kalman recursion
/// over 100-step paths of the linear-prop5 model.
inline double linear_kalman_gap(const ExperimentConfig& cfg, std::initializer_list<std::uint64_t> seeds)
{
    const auto& spec = std::get<AdditiveSpec>(cfg.model);
    const auto& noise = std::get<NormalLaw>(spec.noise);
    const auto model = build_model(cfg);
    const auto grid_model = discretize(model, *cfg.grid);
    const auto& prior = cfg.true_prior.continuous;
    double worst = 0.0;
    for (auto seed : seeds) {
        const auto path = simulate_path(model, 100, seed);
        const auto traj = run_filter(grid_model, std::get<Distribution>(grid_model.nu), path);
        const auto kal = kalman_oracle(spec.a, spec.b, noise.std, prior.mean, prior.shape.sigma * prior.shape.sigma,
                                       std::span<const double>(path.y).subspan(1));
        for (std::size_t n = 0; n < kal.size(); ++n) {
            const double mean = expect(traj.posteriors[n], [](double x) { return x; });
            worst = std::max(worst, std::abs(mean - kal[n].mean));
        }
    }
    return worst;
}

/// A7: grid filter vs Kalman, weak stability of x^2 and characteristic-function stability.
inline CriterionResult criterion_a7(const ReproduceRun& rr)
{
    detail::Stopwatch sw;
    const double gap = linear_kalman_gap(canned_experiment("linear-prop5"), {1, 2, 3});
    std::string msg = "Kalman mean gap " + detail::num(gap) + " (<= 1e-4)";
    const auto& run = detail::run_of(rr, "linear-prop5");
    const double secs = sw.seconds() + run.seconds;
    if (!detail::usable(run)) {
        return detail::finish("A7", false, msg + "; linear-prop5 run did not complete", secs, 300.0);
    }
    bool ok = gap <= 1e-4;
    const auto& weak = run.estimate->get(MetricKind::weak_f);
    const double wr = weak.at(100) / weak.at(1);
    ok = ok && wr < 0.2;
    msg += "; x^2 ratio " + detail::num(wr);
    for (double t : {0.5, 1.0, 2.0}) {
        const auto& s = run.estimate->get(MetricKind::char_t, "t=" + format_double(t));
        const double r = s.at(100) / s.at(1);
        ok = ok && r < 0.2;
        msg += ", t=" + format_double(t) + " ratio " + detail::num(r);
    }
    const auto& zero = run.estimate->get(MetricKind::char_t, "t=0");
    const bool zero_ok = std::all_of(zero.metric.begin(), zero.metric.end(), [](double v) { return v == 0.0; });
    msg += std::string(" (each < 0.2); t=0 ") + (zero_ok ? "identically 0" : "nonzero");
    return detail::finish("A7", ok && zero_ok, msg, secs, 300.0);
}

/// A1-A7 for one reproduce run.
inline std::vector<CriterionResult> evaluate_criteria(const ReproduceRun& rr, std::size_t workers = 0)
{
    return {criterion_a1(), criterion_a2(), criterion_a3(workers), criterion_a4(rr),
            criterion_a5(rr), criterion_a6(rr), criterion_a7(rr)};
}

/// A8: two reproduce runs wrote the same CSV bytes and both tables pass.
inline CriterionResult criterion_a8(const ReproduceRun& first, const ReproduceRun& second,
                                    const std::vector<CriterionResult>& table1,
                                    const std::vector<CriterionResult>& table2)
{
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& [name, run] : first.runs) {
        const auto& other = detail::run_of(second, name);
        for (const auto& o : run.outputs) {
            ++files;
            const auto a = read_file(run.output_dir / o.file);
            const auto b_path = other.output_dir / o.file;
            if (!std::filesystem::exists(b_path) || read_file(b_path) != a) {
                differing.push_back(name + "/" + o.file);
            }
        }
        if (run.outputs.size() != other.outputs.size()) {
            differing.push_back(name + " (file count)");
        }
    }
    auto all_pass = [](const std::vector<CriterionResult>& t) {
        return !t.empty() && std::all_of(t.begin(), t.end(), [](const CriterionResult& c) { return c.passed; });
    };
    const bool identical = differing.empty() && files > 0;
    std::string msg = std::to_string(files) + " CSV files " + (identical ? "byte-identical" : "differ");
    for (const auto& d : differing) {
        msg += " " + d;
    }
    msg += std::string("; pass tables ") + (all_pass(table1) && all_pass(table2) ? "full" : "incomplete");
    return {"A8", identical && all_pass(table1) && all_pass(table2), msg, 0.0, 0.0};
}

inline std::string format_criterion(const CriterionResult& c)
{
    std::string line = c.id + " " + (c.passed ? "PASS" : "FAIL") + "  " + c.detail;
    if (c.seconds > 0.0) {
        line += "  [" + format_short(c.seconds, 3) + " s";
        if (c.limit > 0.0) {
            line += " / " + format_short(c.limit, 3) + " s";
        }
        line += "]";
    }
    return line;
}

} // namespace filterstab
