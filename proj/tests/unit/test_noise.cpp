#include "filterstab/noise.hpp"
#include "filterstab/quadrature.hpp"
#include "filterstab/sg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace filterstab;

namespace {

ErrorKind kind_of(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no filterstab::Error thrown";
    return ErrorKind::io_failure;
}

// Standard-normal even moments by the recurrence E Z^{2i} = (2i-1) E Z^{2i-2}.
double normal_even_moment(int i)
{
    double m = 1.0;
    for (int k = 1; k <= i; ++k) {
        m *= 2 * k - 1;
    }
    return m;
}

} // namespace

TEST(MultNoise, DensityIntegratesToOne)
{
    for (double rho : {0.5, 1.0, 3.0}) {
        const double half = integrate_half_line([rho](double x) { return mult_noise_density(x, rho); }).value;
        EXPECT_NEAR(2.0 * half, 1.0, 1e-8) << rho;
    }
}

TEST(MultNoise, AbsMeanIsSqrtPiRho)
{
    EXPECT_NEAR(abs_mean_xi(1.0), std::sqrt(std::numbers::pi), 1e-6);
    EXPECT_NEAR(abs_mean_xi(2.5), std::sqrt(std::numbers::pi * 2.5), 1e-6);
}

TEST(MultNoise, MagnitudeCdf)
{
    const double rho = 1.0;
    for (double t : {0.3, 1.0, 4.0}) {
        const double inside = 2.0 * integrate_interval([rho](double x) { return mult_noise_density(x, rho); }, 0.0, t).value;
        EXPECT_NEAR(inside, std::exp(-rho / (t * t)), 1e-10) << t;
    }
}

TEST(MultNoise, SecondMomentDiverges)
{
    const NoiseLaw law = MultNoiseLaw{1.0};
    EXPECT_EQ(kind_of([&] { raw_moment(law, 2); }), ErrorKind::moment_divergence);
    EXPECT_NEAR(raw_moment(law, 1), 0.0, 1e-10);
}

TEST(MultNoise, SamplerMatchesCdf)
{
    const NoiseLaw law = MultNoiseLaw{1.0};
    Rng rng(5);
    const int n = 200000;
    int below = 0;
    for (int k = 0; k < n; ++k) {
        if (std::abs(sample(law, rng)) <= 1.0) {
            ++below;
        }
    }
    const double p = std::exp(-1.0);
    EXPECT_NEAR(static_cast<double>(below) / n, p, 5.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Normal, RawMomentsAndCharacteristic)
{
    const NoiseLaw shifted = NormalLaw{1.0, 1.0};
    EXPECT_NEAR(raw_moment(shifted, 1), 1.0, 1e-10);
    EXPECT_NEAR(raw_moment(shifted, 2), 2.0, 1e-10);
    EXPECT_NEAR(raw_moment(shifted, 3), 4.0, 1e-9);
    const NoiseLaw law = NormalLaw{0.0, 1.3};
    for (double t : {0.0, 0.5, 1.0, 2.0, 5.0}) {
        const auto c = characteristic(law, t);
        EXPECT_NEAR(c.real(), std::exp(-0.5 * t * t * 1.69), 1e-10) << t;
        EXPECT_NEAR(c.imag(), 0.0, 1e-10) << t;
    }
}

TEST(Sg, NormalizersAreDoubleFactorials)
{
    for (int i = 0; i <= 5; ++i) {
        const double q = integrate_interval(
                             [i](double x) { return std::pow(x, 2 * i) * std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); },
                             -40.0, 40.0)
                             .value;
        EXPECT_NEAR(sg_normalizer(i), q, 1e-8 * std::max(1.0, q)) << i;
        EXPECT_DOUBLE_EQ(sg_normalizer(i), normal_even_moment(i));
    }
}

TEST(Sg, DensityIntegratesToOne)
{
    const SgParams p{0.7, {0.5, 0.5}};
    const double total = integrate_interval([&](double x) { return sg_density(x, p); }, -30.0, 0.0).value +
                         integrate_interval([&](double x) { return sg_density(x, p); }, 0.0, 30.0).value;
    EXPECT_NEAR(total, 1.0, 1e-10);
    const SgParams q{1.3, {0.2, 0.3, 0.5}};
    const double total_q = integrate_interval([&](double x) { return sg_density(x, q); }, -60.0, 0.0).value +
                           integrate_interval([&](double x) { return sg_density(x, q); }, 0.0, 60.0).value;
    EXPECT_NEAR(total_q, 1.0, 1e-10);
}

TEST(Sg, SamplerSecondMoment)
{
    const SgParams p{0.7, {0.5, 0.5}};
    // term i has E X^2 = sigma^2 (2i + 1)
    const double exact = 0.49 * (0.5 * 1.0 + 0.5 * 3.0);
    Rng rng(9);
    const int n = 200000;
    double s = 0.0;
    double s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double x = sg_sample(p, rng);
        s += x * x;
        s2 += x * x * x * x;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, exact, 5.0 * se);
}

TEST(Sg, RejectsBadWeights)
{
    EXPECT_EQ(kind_of([] { validate(SgParams{1.0, {0.5, 0.6}}); }), ErrorKind::invalid_argument);
    EXPECT_EQ(kind_of([] { validate(SgParams{0.0, {1.0}}); }), ErrorKind::invalid_argument);
}

TEST(PriorRatio, BoundedIffHeavierWrongTail)
{
    const ContinuousPrior nu{SgParams{0.7, {0.5, 0.5}}, 0.0};
    EXPECT_FALSE(prior_ratio_sup(nu, ContinuousPrior::gaussian(0.0, 0.5)));
    EXPECT_FALSE(prior_ratio_sup(nu, ContinuousPrior::gaussian(0.0, 0.7)));
    EXPECT_TRUE(prior_ratio_sup(nu, ContinuousPrior::gaussian(0.0, 1.0)));
    EXPECT_DOUBLE_EQ(*prior_ratio_sup(nu, nu), 1.0);
}

TEST(PriorRatio, GaussianSupClosedForm)
{
    const double m = 1.0, s = 0.5, mb = 0.0, sb = 1.0;
    const double x = (m / (s * s) - mb / (sb * sb)) / (1.0 / (s * s) - 1.0 / (sb * sb));
    const double log_ratio = -0.5 * (x - m) * (x - m) / (s * s) + 0.5 * (x - mb) * (x - mb) / (sb * sb) + std::log(sb / s);
    const auto sup = prior_ratio_sup(ContinuousPrior::gaussian(m, s), ContinuousPrior::gaussian(mb, sb));
    ASSERT_TRUE(sup);
    EXPECT_NEAR(*sup, std::exp(log_ratio), 1e-9 * std::exp(log_ratio));
}

TEST(PriorRatio, GaussianMomentClosedForm)
{
    const double m = 1.0, s = 0.5, mb = 0.0, sb = 1.0, p = 2.0;
    const double a = p / (s * s) + (1 - p) / (sb * sb);
    const double b = p * m / (s * s) + (1 - p) * mb / (sb * sb);
    const double c = p * m * m / (s * s) + (1 - p) * mb * mb / (sb * sb);
    const double exact = std::pow(s, -p) * std::pow(sb, p - 1) / std::sqrt(a) * std::exp(-0.5 * (c - b * b / a));
    EXPECT_NEAR(prior_ratio_moment(ContinuousPrior::gaussian(m, s), ContinuousPrior::gaussian(mb, sb), p), exact,
                1e-9 * exact);
}
