#include "filterstab/moments.hpp"
#include "filterstab/series.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace filterstab;

namespace {

SignalKernel kernel2(double p, double q)
{
    return SignalKernel::finite(std::vector<std::vector<double>>{{p, 1 - p}, {q, 1 - q}});
}

StabilityProblem prop4_problem(const std::vector<double>& nu_bar = {0.99, 0.01})
{
    const auto m = build_finite_hmm(kernel2(0.7, 0.3), {1, 2}, {NormalLaw{0.0, 1.0}, NormalLaw{1.0, 1.0}});
    return StabilityProblem::finite(m, Distribution::finite({1, 2}, {0.5, 0.5}), Distribution::finite({1, 2}, nu_bar));
}

StabilityProblem letter_problem(const SignalKernel& k, const std::vector<double>& nu, const std::vector<double>& nu_bar)
{
    Eigen::MatrixXd e(2, 2);
    e << 0.9, 0.1, 0.1, 0.9;
    const auto m = build_alphabet_hmm(k, {1, 2}, {0.0, 1.0}, e);
    return StabilityProblem::finite(m, Distribution::finite({1, 2}, nu), Distribution::finite({1, 2}, nu_bar));
}

McOptions small(std::size_t trials, std::size_t n_max, std::uint64_t seed = 3)
{
    McOptions o;
    o.trials = trials;
    o.n_max = n_max;
    o.seed = seed;
    o.workers = 1;
    return o;
}

} // namespace

TEST(Series, EqualPriorsGiveZero)
{
    const auto pb = prop4_problem({0.5, 0.5});
    const auto est = estimate_series(pb,
                                     {MetricRequest::weak(ScalarFunction::monomial(1)), MetricRequest::total_variation(),
                                      MetricRequest::predictor(ScalarFunction::monomial(1)), MetricRequest::rho()},
                                     small(50, 20));
    for (const auto& s : est.series) {
        for (double v : s.metric) {
            EXPECT_LT(v, 1e-12) << to_string(s.kind);
        }
    }
    EXPECT_TRUE(est.failures.empty());
}

TEST(Series, InitialTermIsExact)
{
    const auto pb = prop4_problem();
    const auto f = ScalarFunction::monomial(2);
    const auto est = weak_stability_series(pb, f, small(64, 5));
    const auto& s = est.series.front();
    EXPECT_EQ(s.n_values.front(), 0u);
    EXPECT_NEAR(s.metric.front(), std::abs((0.5 - 0.99) * 1.0 + (0.5 - 0.01) * 4.0), 1e-15);
    EXPECT_EQ(s.std_err.front(), 0.0);
    EXPECT_EQ(s.trials, 64u);
    const auto tv = tv_stability_series(pb, small(10, 3));
    EXPECT_NEAR(tv.series.front().metric.front(), 0.98, 1e-15);
}

TEST(Series, LinearInF)
{
    const auto pb = prop4_problem();
    const auto f = ScalarFunction::polynomial({0.3, -1.0, 0.5});
    const auto one = weak_stability_series(pb, f, small(100, 30));
    const auto two = weak_stability_series(pb, f.scaled(2.0), small(100, 30));
    for (std::size_t i = 0; i < one.series[0].metric.size(); ++i) {
        EXPECT_NEAR(two.series[0].metric[i], 2.0 * one.series[0].metric[i], 4e-16 * two.series[0].metric[i] + 1e-300);
    }
}

TEST(Series, UninformativeChannelIsOpenLoop)
{
    const auto m = build_nonmixing_control();
    const auto nu = Distribution::finite({1, 2}, {0.5, 0.5});
    const auto nu_bar = Distribution::finite({1, 2}, {0.8, 0.2});
    const auto pb = StabilityProblem::finite(m, nu, nu_bar);
    const auto f = ScalarFunction::monomial(1);
    const auto est =
        estimate_series(pb, {MetricRequest::total_variation(), MetricRequest::weak(f)}, small(40, 12));
    const Eigen::Matrix2d lam = m.signal.matrix();
    Eigen::Vector2d p = nu.weights();
    Eigen::Vector2d q = nu_bar.weights();
    for (std::size_t n = 0; n <= 12; ++n) {
        EXPECT_NEAR(est.get(MetricKind::tv).at(n), (p - q).cwiseAbs().sum(), 1e-13) << n;
        EXPECT_NEAR(est.get(MetricKind::weak_f).at(n), std::abs((p - q).dot(Eigen::Vector2d(1, 2))), 1e-13) << n;
        p = lam.transpose() * p;
        q = lam.transpose() * q;
    }
}

TEST(Series, ConstantGHasZeroPredictorGap)
{
    const auto est = predictor_stability_series(prop4_problem(), ScalarFunction::constant(3.0), small(30, 10));
    for (double v : est.series[0].metric) {
        EXPECT_LT(v, 1e-14);
    }
}

TEST(Series, PathwisePredictorMatchesMomentMatrix)
{
    const auto pb = prop4_problem();
    auto opt = small(8, 15, 77);
    opt.keep_trial_values = true;
    const auto est = predictor_stability_series(pb, ScalarFunction::monomial(1), opt);
    const std::vector<ObsLaw> laws{NormalLaw{0.0, 1.0}, NormalLaw{1.0, 1.0}};
    const auto b = moment_matrix(laws, 2);
    for (std::size_t t = 0; t < 8; ++t) {
        Rng rng = trial_rng(77, t);
        const auto path = simulate_path(pb.truth_model, 15, rng, pb.truth_nu);
        const auto traj = run_filter(pb.filter_model, pb.nu, path);
        const auto traj_bar = run_filter(pb.filter_model, pb.nu_bar, path);
        for (std::size_t n = 1; n <= 15; ++n) {
            const Eigen::VectorXd diff = traj.posteriors[n - 1].weights() - traj_bar.posteriors[n - 1].weights();
            const double via_b = std::abs(diff[0] * b.entries(0, 0) + diff[1] * b.entries(0, 1));
            EXPECT_NEAR(est.trial_values[0][t][n - 1], via_b, 1e-12) << t << " " << n;
        }
    }
}

TEST(Series, WorkerCountDoesNotChangeBits)
{
    const auto pb = prop4_problem();
    auto one = small(100, 25);
    one.batch = 8;
    auto many = one;
    many.workers = 4;
    const std::vector<MetricRequest> req{MetricRequest::total_variation(), MetricRequest::rho()};
    const auto a = estimate_series(pb, req, one);
    const auto b = estimate_series(pb, req, many);
    ASSERT_EQ(a.series.size(), b.series.size());
    for (std::size_t i = 0; i < a.series.size(); ++i) {
        EXPECT_EQ(a.series[i].metric, b.series[i].metric);
        EXPECT_EQ(a.series[i].std_err, b.series[i].std_err);
    }
}

TEST(Series, TrialsAreIndependent)
{
    const auto pb = prop4_problem();
    auto opt = small(40, 10);
    opt.keep_trial_values = true;
    const auto full = tv_stability_series(pb, opt);
    opt.trials = 13;
    const auto prefix = tv_stability_series(pb, opt);
    for (std::size_t t = 0; t < 13; ++t) {
        EXPECT_EQ(full.trial_values[0][t], prefix.trial_values[0][t]) << t;
    }
    // Dropping trials and re-aggregating equals aggregating only the kept ones.
    auto rows = full.trial_values[0];
    std::vector<std::vector<double>> kept;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (t % 3 == 1) {
            rows[t].clear();
        } else {
            kept.push_back(rows[t]);
        }
    }
    const auto& ns = full.series[0].n_values;
    const auto masked = aggregate_series(MetricKind::tv, "tv", ns, rows);
    const auto direct = aggregate_series(MetricKind::tv, "tv", ns, kept);
    EXPECT_EQ(masked.metric, direct.metric);
    EXPECT_EQ(masked.std_err, direct.std_err);
    EXPECT_EQ(masked.trials, kept.size());
}

TEST(Series, MonteCarloAgreesWithEnumeration)
{
    const auto pb = letter_problem(kernel2(0.8, 0.3), {0.5, 0.5}, {0.9, 0.1});
    const auto g = ScalarFunction::polynomial({0.2, 0.7});
    const std::vector<MetricRequest> req{MetricRequest::predictor(g), MetricRequest::total_variation(),
                                         MetricRequest::rho()};
    const auto exact = exact_series(pb, req, 6);
    const auto mc = estimate_series(pb, req, small(4000, 6, 9));
    for (const auto& e : exact.series) {
        const auto& m = mc.get(e.kind);
        for (std::size_t i = 0; i < e.n_values.size(); ++i) {
            EXPECT_NEAR(m.metric[i], e.metric[i], 5.0 * m.std_err[i] + 1e-12)
                << to_string(e.kind) << " n=" << e.n_values[i];
        }
    }
}

TEST(Series, ChainBoundHoldsExactly)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int trial = 0; trial < 5; ++trial) {
        const double p = u(rng);
        const auto pb = letter_problem(kernel2(u(rng), u(rng)), {p, 1 - p}, {0.9, 0.1});
        const double g0 = 2 * u(rng) - 1;
        const double g1 = 2 * u(rng) - 1;
        const auto g = ScalarFunction::polynomial({g0, g1 - g0});
        const auto est = exact_series(pb, {MetricRequest::predictor(g), MetricRequest::rho()}, 8);
        const auto chain = check_chain_bound(est.get(MetricKind::predictor_g), est.get(MetricKind::rho_diff),
                                             std::max(std::abs(g0), std::abs(g1)));
        EXPECT_TRUE(chain.holds) << chain.worst;
    }
}

TEST(Series, RhoIsAMartingaleUnderWrongPrior)
{
    const auto pb = letter_problem(kernel2(0.6, 0.2), {0.3, 0.7}, {0.5, 0.5});
    // Group children by parent prefix; E_bar(rho_n | F_{n-1}) = rho_{n-1}.
    struct Acc {
        double parent_rho = 0;
        double sum = 0;
    };
    std::vector<std::pair<std::vector<double>, Acc>> groups;
    enumerate_observation_tree(pb.filter_model, pb.nu, pb.nu_bar, 6, [&](const TreeNode& node) {
        if (node.depth == 0) {
            return;
        }
        std::vector<double> parent(node.prefix.begin(), node.prefix.end() - 1);
        const double cond = std::exp(node.log_p_bar - node.parent_log_p_bar);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == parent; });
        if (it == groups.end()) {
            groups.push_back({parent, {std::exp(node.parent_log_rho()), 0.0}});
            it = groups.end() - 1;
        }
        it->second.sum += cond * std::exp(node.log_rho());
    });
    EXPECT_EQ(groups.size(), 1u + 2 + 4 + 8 + 16 + 32);
    for (const auto& [prefix, acc] : groups) {
        EXPECT_NEAR(acc.sum, acc.parent_rho, 1e-12);
    }
}

TEST(Series, NonErgodicSignalStillForgetsInPrediction)
{
    const auto pb = letter_problem(SignalKernel::finite(Eigen::MatrixXd::Identity(2, 2)), {0.5, 0.5}, {0.9, 0.1});
    const auto est = exact_series(pb, {MetricRequest::predictor(ScalarFunction::monomial(1))}, 8);
    const auto& s = est.series[0];
    EXPECT_LE(s.at(8), 0.05 * s.at(1));
}

TEST(Series, FailedTrialsAreCountedAndExcluded)
{
    auto pb = letter_problem(kernel2(0.7, 0.3), {0.5, 0.5}, {0.5, 0.5});
    // The truth emits letter 1 only from state 2, which the filter model forbids.
    Eigen::MatrixXd e(2, 2);
    e << 1.0, 0.0, 1.0, 0.0;
    pb.filter_model = build_alphabet_hmm(kernel2(0.7, 0.3), {1, 2}, {0.0, 1.0}, e);
    const auto est = tv_stability_series(pb, small(50, 4));
    EXPECT_FALSE(est.failures.empty());
    EXPECT_TRUE(est.failed());
    for (const auto& f : est.failures) {
        EXPECT_EQ(f.kind, ErrorKind::zero_likelihood);
        EXPECT_GE(f.step, 1u);
    }
    EXPECT_EQ(est.series[0].trials, 50 - est.failures.size());
}

TEST(RateBound, SyntheticSeries)
{
    StabilitySeries s;
    s.kind = MetricKind::tv;
    for (std::size_t n = 0; n <= 40; ++n) {
        s.n_values.push_back(n);
        s.metric.push_back(std::exp(-static_cast<double>(n)));
        s.std_err.push_back(0.0);
    }
    MixingReport rep;
    rep.rate_star = -0.5;
    auto r = rate_bound(s, rep);
    EXPECT_NEAR(r.slope, -1.0, 1e-12);
    EXPECT_TRUE(r.satisfied);
    EXPECT_EQ(r.fit_from, 20u);

    std::fill(s.metric.begin(), s.metric.end(), 0.3);
    rep.rate_star = -3.0 / 7.0;
    r = rate_bound(s, rep);
    EXPECT_NEAR(r.slope, 0.0, 1e-12);
    EXPECT_FALSE(r.satisfied);

    s.metric.back() = 0.0;
    r = rate_bound(s, rep);
    EXPECT_TRUE(r.degenerate);
    EXPECT_TRUE(r.satisfied);
}

TEST(CharSeries, ZeroFrequencyAndEqualPriors)
{
    const auto model = build_additive_model(SignalKernel::gaussian_ar1(0.8, 0.5), ScalarFunction::monomial(1),
                                            NormalLaw{0.0, 1.0}, ContinuousPrior::gaussian(1.0, 0.5));
    const auto pb = StabilityProblem::gridded(model, GridSpec{-7.0, 7.0, 256}, ContinuousPrior::gaussian(1.0, 0.5),
                                              ContinuousPrior::gaussian(0.0, 1.0));
    const auto est = char_func_series(pb, {0.0, 1.0}, small(20, 10));
    for (double v : est.get(MetricKind::char_t, "t=0").metric) {
        EXPECT_EQ(v, 0.0);
    }
    EXPECT_GT(est.get(MetricKind::char_t, "t=1").at(0), 0.1);

    const auto same = StabilityProblem::gridded(model, GridSpec{-7.0, 7.0, 256}, ContinuousPrior::gaussian(1.0, 0.5),
                                                ContinuousPrior::gaussian(1.0, 0.5));
    for (double v : char_func_series(same, {2.0}, small(10, 5)).series[0].metric) {
        EXPECT_LT(v, 1e-13);
    }
}

TEST(CharSeries, NeedsLinearObservation)
{
    const auto model = build_additive_model(SignalKernel::gaussian_ar1(0.8, 0.5), ScalarFunction::monomial(2),
                                            NormalLaw{0.0, 1.0}, ContinuousPrior::gaussian(0.0, 1.0));
    const auto pb = StabilityProblem::gridded(model, GridSpec{-7.0, 7.0, 64}, ContinuousPrior::gaussian(0.0, 1.0),
                                              ContinuousPrior::gaussian(0.0, 1.0));
    EXPECT_THROW(char_func_series(pb, {1.0}, small(2, 2)), Error);
}
