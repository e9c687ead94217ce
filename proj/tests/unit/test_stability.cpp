#include "filterstab/conditions.hpp"
#include "filterstab/mixing.hpp"
#include "filterstab/moments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace filterstab;

namespace {

Eigen::MatrixXd random_stochastic(std::mt19937_64& rng, int rows, int cols, double shape = 1.0)
{
    std::gamma_distribution<double> gam(shape, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = gam(rng) + 1e-4;
        }
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

SignalKernel kernel2(double p, double q)
{
    return SignalKernel::finite(std::vector<std::vector<double>>{{p, 1 - p}, {q, 1 - q}});
}

} // namespace

TEST(Mixing, SymmetricFixture)
{
    const auto r = mixing_constants(SignalKernel::finite(std::vector<std::vector<double>>{{0.7, 0.3}, {0.3, 0.7}}));
    EXPECT_EQ(r.lambda_star, 0.3);
    EXPECT_EQ(r.lambda_sup, 0.7);
    ASSERT_TRUE(r.lambda_circ);
    EXPECT_EQ(*r.lambda_circ, 0.3);
    EXPECT_NEAR(r.rate_star, -3.0 / 7.0, 1e-15);
}

TEST(Mixing, CycleIsNotMixing)
{
    const auto r = mixing_constants(kernel2(0.0, 1.0));
    EXPECT_EQ(r.lambda_star, 0.0);
    EXPECT_FALSE(r.mixing());
    EXPECT_FALSE(r.lambda_circ);
    EXPECT_FALSE(r.note.empty());
}

TEST(Mixing, RankOneForgetsInOneStep)
{
    const auto r = mixing_constants(kernel2(0.5, 0.5));
    EXPECT_EQ(r.lambda_star, 0.5);
    EXPECT_EQ(r.lambda_sup, 0.5);
    EXPECT_EQ(r.rate_star, -1.0);
}

TEST(Mixing, CircBetweenBoundsOnRandomKernels)
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + trial % 7;
        const auto r = mixing_constants(SignalKernel::finite(random_stochastic(rng, d, d)));
        ASSERT_TRUE(r.lambda_circ);
        EXPECT_LE(r.lambda_star, *r.lambda_circ + 1e-15);
        EXPECT_LE(*r.lambda_circ, r.lambda_sup + 1e-15);
    }
}

TEST(Mixing, GriddedKernelRejected)
{
    const auto k = SignalKernel::finite(Eigen::MatrixXd::Identity(2, 2)).with_ar1_source(Ar1{0.8, 0.5});
    EXPECT_THROW(mixing_constants(k), Error);
}

TEST(MomentMatrix, GaussianFixture)
{
    const std::vector<ObsLaw> laws{NormalLaw{0.0, 1.0}, NormalLaw{1.0, 1.0}};
    const auto b = moment_matrix(laws, 2);
    EXPECT_NEAR(b.entries(0, 0), 0.0, 1e-10);
    EXPECT_NEAR(b.entries(0, 1), 1.0, 1e-10);
    EXPECT_NEAR(b.entries(1, 0), 1.0, 1e-10);
    EXPECT_NEAR(b.entries(1, 1), 2.0, 1e-10);
    EXPECT_NEAR(b.determinant, -1.0, 1e-9);
    EXPECT_TRUE(b.nonsingular());
}

TEST(MomentMatrix, IdenticalLawsAreSingular)
{
    const std::vector<ObsLaw> laws{NormalLaw{0.5, 1.0}, NormalLaw{0.5, 1.0}};
    const auto b = moment_matrix(laws, 2);
    EXPECT_NEAR((b.entries.col(0) - b.entries.col(1)).norm(), 0.0, 1e-12);
    EXPECT_FALSE(b.nonsingular());
}

TEST(MomentMatrix, OneDimensional)
{
    const std::vector<ObsLaw> centred{NormalLaw{0.0, 1.0}};
    EXPECT_FALSE(moment_matrix(centred, 1).nonsingular());
    const std::vector<ObsLaw> shifted{NormalLaw{0.3, 1.0}};
    const auto b = moment_matrix(shifted, 1);
    EXPECT_NEAR(b.entries(0, 0), 0.3, 1e-10);
    EXPECT_TRUE(b.nonsingular());
}

TEST(MomentMatrix, ColumnsAreRawMoments)
{
    const std::vector<ObsLaw> laws{NormalLaw{-0.5, 2.0}, FiniteLaw{{-1.0, 2.0}, {0.25, 0.75}}, NormalLaw{1.5, 0.5}};
    const auto b = moment_matrix(laws, 3);
    // normal: E X^3 = m^3 + 3 m s^2
    EXPECT_NEAR(b.entries(2, 0), -0.125 + 3 * -0.5 * 4.0, 1e-8);
    EXPECT_NEAR(b.entries(1, 1), 0.25 * 1.0 + 0.75 * 4.0, 1e-15);
    EXPECT_NEAR(b.entries(1, 2), 1.5 * 1.5 + 0.25, 1e-8);
}

TEST(MomentMatrix, DivergentMomentsReported)
{
    const std::vector<ObsLaw> laws{MultNoiseLaw{1.0}, NormalLaw{0.0, 1.0}};
    EXPECT_THROW(moment_matrix(laws, 2), Error);
}

TEST(SolveG, IdentityChannel)
{
    Eigen::VectorXd f(3);
    f << 1.0, -2.0, 0.5;
    const auto s = solve_g(Eigen::MatrixXd::Identity(3, 3), f);
    EXPECT_EQ(s.residual, 0.0);
    EXPECT_EQ(s.g, (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(SolveG, TwoByTwoFixture)
{
    Eigen::MatrixXd gam(2, 2);
    gam << 0.8, 0.2, 0.3, 0.7;
    Eigen::VectorXd f(2);
    f << 1.0, 0.0;
    const auto s = solve_g(gam, f);
    EXPECT_NEAR(s.g[0], 1.4, 1e-14);
    EXPECT_NEAR(s.g[1], -0.6, 1e-14);
    EXPECT_LE(s.residual, 1e-15);
    EXPECT_TRUE(s.solvable());
}

TEST(SolveG, RankOneHasNoSolution)
{
    Eigen::MatrixXd gam(2, 2);
    gam << 0.4, 0.6, 0.4, 0.6;
    Eigen::VectorXd f(2);
    f << 1.0, 0.0;
    const auto s = solve_g(gam, f);
    EXPECT_GT(s.residual, 1e-8);
    EXPECT_FALSE(s.solvable());
}

TEST(SolveG, SolutionTransfersFilterToPredictor)
{
    std::mt19937_64 rng(44);
    const auto m = build_alphabet_hmm(SignalKernel::finite(random_stochastic(rng, 3, 3)), {1.0, 2.0, 3.0},
                                      {0.0, 1.0, 2.0, 5.0}, random_stochastic(rng, 3, 4, 0.5));
    const auto f = ScalarFunction::polynomial({0.5, -1.0, 0.25});
    const auto s = solve_g(f, m);
    ASSERT_TRUE(s.solvable());
    const auto g = s.as_function();
    std::gamma_distribution<double> gam(1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd w(3);
        for (int i = 0; i < 3; ++i) {
            w[i] = gam(rng);
        }
        const auto pi = normalize(m.states, w);
        EXPECT_NEAR(expect(pi, [&](double x) { return f(x); }), predictor(m, pi, g), 1e-8);
    }
}

TEST(Conditions, TwoPointPriors)
{
    Eigen::MatrixXd e(2, 2);
    e << 0.9, 0.1, 0.1, 0.9;
    const auto m = build_alphabet_hmm(kernel2(0.7, 0.3), {1, 2}, {-1.0, 1.0}, e);
    const auto pb = StabilityProblem::finite(m, Distribution::finite({1, 2}, {0.5, 0.5}),
                                             Distribution::finite({1, 2}, {0.9, 0.1}));
    const auto r = check_conditions(pb, ScalarFunction::sine(1.0), {.horizon = 20});
    EXPECT_TRUE(r.admissible);
    EXPECT_TRUE(r.g_bounded);
    EXPECT_NEAR(*r.g_bound, std::sin(1.0), 1e-15);
    EXPECT_TRUE(r.ratio_bounded);
    EXPECT_NEAR(*r.ratio_sup, 5.0, 1e-15);
    ASSERT_TRUE(r.ratio_p_norm);
    EXPECT_NEAR(r.ratio_p_norm->second, 0.9 * (5.0 / 9.0) * (5.0 / 9.0) + 0.1 * 25.0, 1e-12);
    ASSERT_TRUE(r.g_ui_moment);
    EXPECT_NEAR(r.g_ui_moment->second, std::pow(std::sin(1.0), 1.5), 1e-12);
    EXPECT_FALSE(r.ui_estimate_only);
}

TEST(Conditions, UiMomentMatchesDirectMarginals)
{
    const auto m = build_finite_hmm(kernel2(0.9, 0.2), {1, 2}, {NormalLaw{0.0, 1.0}, NormalLaw{3.0, 1.0}});
    const auto nu_bar = Distribution::finite({1, 2}, {1.0, 0.0});
    const auto pb = StabilityProblem::finite(m, Distribution::finite({1, 2}, {1.0, 0.0}), nu_bar);
    const auto r = check_conditions(pb, ScalarFunction::monomial(2), {.horizon = 30});
    // Marginals of Y_n under nu_bar by explicit matrix powers.
    const double q = 1.5;
    auto abs_moment = [q](double mean) {
        return expectation(NoiseLaw{NormalLaw{mean, 1.0}}, [q](double y) { return std::pow(y * y, q); }, 3.0);
    };
    const Eigen::Matrix2d lam = kernel2(0.9, 0.2).matrix();
    Eigen::Vector2d mu(1.0, 0.0);
    double sup = 0.0;
    for (int n = 1; n <= 30; ++n) {
        sup = std::max(sup, mu[0] * abs_moment(0.0) + mu[1] * abs_moment(3.0));
        mu = lam.transpose() * mu;
    }
    ASSERT_TRUE(r.g_ui_moment);
    EXPECT_NEAR(r.g_ui_moment->second, sup, 1e-9 * sup);
    EXPECT_FALSE(r.g_bounded);
}

TEST(Conditions, MultNoiseRatioBoundedWhenWrongPriorIsWider)
{
    const auto model = build_mult_noise_model({0.8, 0.5, 1.0, SgParams{0.7, {0.5, 0.5}}});
    const GridSpec gs{-6.0, 6.0, 256};
    const auto wide = StabilityProblem::gridded(model, gs, ContinuousPrior{SgParams{0.7, {0.5, 0.5}}, 0.0},
                                                ContinuousPrior::gaussian(0.0, 1.0));
    const auto g = ScalarFunction::abs(1.0 / std::sqrt(std::numbers::pi));
    const auto r = check_conditions(wide, g, {.horizon = 20});
    EXPECT_TRUE(r.ratio_bounded);
    EXPECT_FALSE(r.g_bounded);
    EXPECT_EQ(r.ui_method, "exact-recursion(grid)");
    const auto narrow = StabilityProblem::gridded(model, gs, ContinuousPrior{SgParams{0.7, {0.5, 0.5}}, 0.0},
                                                  ContinuousPrior::gaussian(0.0, 0.5));
    EXPECT_FALSE(check_conditions(narrow, g, {.horizon = 5}).ratio_bounded);
}

TEST(Conditions, HeavyTailFallsBackToSampling)
{
    const auto model = build_mult_noise_model({0.8, 0.5, 1.0, SgParams{0.7, {0.5, 0.5}}});
    const auto pb = StabilityProblem::gridded(model, GridSpec{-6.0, 6.0, 128},
                                              ContinuousPrior{SgParams{0.7, {0.5, 0.5}}, 0.0},
                                              ContinuousPrior::gaussian(0.0, 1.0));
    const auto r = check_conditions(pb, ScalarFunction::monomial(2), {.horizon = 10, .mc_paths = 200});
    EXPECT_TRUE(r.ui_estimate_only);
    EXPECT_EQ(r.ui_method, "monte-carlo");
}
