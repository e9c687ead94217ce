#include "filterstab/measure.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

using namespace filterstab;

namespace {

template <class F>
ErrorKind kind_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no filterstab::Error thrown";
    return ErrorKind::io_failure;
}

} // namespace

TEST(Carrier, RejectsDuplicateAtoms)
{
    EXPECT_EQ(kind_of([] { Carrier::atoms({1.0, 2.0, 1.0}); }), ErrorKind::invalid_argument);
}

TEST(Carrier, GridMidpoints)
{
    auto g = Carrier::grid(-1.0, 1.0, 4);
    ASSERT_EQ(g->size(), 4u);
    EXPECT_DOUBLE_EQ((*g)[0], -0.75);
    EXPECT_DOUBLE_EQ((*g)[3], 0.75);
    EXPECT_DOUBLE_EQ(g->cell_width(), 0.5);
    EXPECT_TRUE(g->same_as(*Carrier::grid(-1.0, 1.0, 4)));
    EXPECT_FALSE(g->same_as(*Carrier::grid(-1.0, 1.0, 8)));
}

TEST(Distribution, ValidatesWeights)
{
    EXPECT_EQ(kind_of([] { Distribution::finite({1, 2}, {0.5, 0.6}); }), ErrorKind::invalid_argument);
    EXPECT_EQ(kind_of([] { Distribution::finite({1, 2}, {1.5, -0.5}); }), ErrorKind::invalid_argument);
    EXPECT_EQ(kind_of([] { Distribution::finite({1, 2}, {0.5}); }), ErrorKind::invalid_argument);
    EXPECT_NO_THROW(Distribution::finite({1, 2}, {0.25, 0.75}));
}

TEST(Distribution, PointMassOnGridSplitsBetweenNeighbours)
{
    auto g = Carrier::grid(0.0, 4.0, 4); // midpoints 0.5 1.5 2.5 3.5
    const auto d = Distribution::point_mass(g, 1.0);
    EXPECT_NEAR(d[0], 0.5, 1e-15);
    EXPECT_NEAR(d[1], 0.5, 1e-15);
    EXPECT_NEAR(expect(d, [](double x) { return x; }), 1.0, 1e-15);
}

TEST(Distribution, FromDensityMatchesNormalCellMasses)
{
    auto g = Carrier::grid(-8.0, 8.0, 64);
    const auto d = Distribution::from_density(g, [](double x) { return std::exp(-0.5 * x * x); });
    const double w = g->cell_width();
    for (std::size_t i = 0; i < g->size(); i += 7) {
        const double lo = g->cell_lo(i);
        const double exact = 0.5 * (std::erfc(-(lo + w) / std::sqrt(2.0)) - std::erfc(-lo / std::sqrt(2.0)));
        EXPECT_NEAR(d[i], exact, 1e-12) << i;
    }
}

TEST(TotalVariation, UnhalvedL1)
{
    const auto p = Distribution::finite({0, 1}, {1.0, 0.0});
    const auto q = Distribution::finite({0, 1}, {0.0, 1.0});
    EXPECT_DOUBLE_EQ(l1_tv(p, q), 2.0);
    EXPECT_DOUBLE_EQ(l1_tv(p, p), 0.0);
    const auto r = Distribution::finite({0, 2}, {1.0, 0.0});
    EXPECT_EQ(kind_of([&] { l1_tv(p, r); }), ErrorKind::mismatched_support);
}

TEST(TotalVariation, TriangleInequalityOnRandomTriples)
{
    std::mt19937_64 rng(11);
    std::gamma_distribution<double> gam(1.0, 1.0);
    auto carrier = Carrier::atoms({0, 1, 2, 3, 4});
    auto draw = [&] {
        Eigen::VectorXd w(5);
        for (int i = 0; i < 5; ++i) {
            w[i] = gam(rng);
        }
        return normalize(carrier, w);
    };
    for (int k = 0; k < 200; ++k) {
        const auto a = draw();
        const auto b = draw();
        const auto c = draw();
        EXPECT_LE(l1_tv(a, c), l1_tv(a, b) + l1_tv(b, c) + 1e-15);
        EXPECT_LE(l1_tv(a, b), 2.0);
    }
}

TEST(Expect, ComplexIntegrand)
{
    const auto d = Distribution::finite({0.0, M_PI}, {0.5, 0.5});
    const auto v = expect(d, [](double x) { return std::exp(std::complex<double>(0.0, x)); });
    EXPECT_NEAR(v.real(), 0.0, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

TEST(Normalize, ZeroMass)
{
    EXPECT_EQ(kind_of([] { normalize(std::vector<double>{1, 2}, std::vector<double>{0, 0}); }), ErrorKind::zero_mass);
    const auto d = normalize(std::vector<double>{1, 2}, std::vector<double>{1, 3});
    EXPECT_DOUBLE_EQ(d[1], 0.75);
}

TEST(DensityRatio, TwoPointExample)
{
    const auto nu = Distribution::finite({1, 2}, {0.5, 0.5});
    const auto nu_bar = Distribution::finite({1, 2}, {0.9, 0.1});
    const auto r = density_ratio(nu, nu_bar, 2.0);
    EXPECT_NEAR(*r.sup_bound, 5.0, 1e-15);
    ASSERT_TRUE(r.p_norm);
    EXPECT_NEAR(r.p_norm->second, 0.9 * (5.0 / 9.0) * (5.0 / 9.0) + 0.1 * 25.0, 1e-12);
    EXPECT_NEAR(r.p_norm->second, 25.0 / 9.0, 1e-12);
}

TEST(DensityRatio, NotAbsolutelyContinuous)
{
    const auto nu = Distribution::finite({1, 2}, {0.5, 0.5});
    const auto nu_bar = Distribution::finite({1, 2}, {1.0, 0.0});
    EXPECT_EQ(kind_of([&] { density_ratio(nu, nu_bar); }), ErrorKind::not_absolutely_continuous);
    EXPECT_NO_THROW(density_ratio(nu_bar, nu));
}
