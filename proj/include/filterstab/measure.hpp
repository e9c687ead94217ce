#pragma once

// Probability measures on finite alphabets and uniform quadrature grids.

#include "filterstab/error.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace filterstab {

inline constexpr double finite_mass_tolerance = 1e-12;
inline constexpr double grid_mass_tolerance = 1e-10;

/// Support of a distribution: either distinct atom labels or the midpoints of
/// a uniform grid on [lo, hi].
class Carrier {
public:
    static std::shared_ptr<const Carrier> atoms(std::vector<double> labels)
    {
        if (labels.empty()) {
            fail(ErrorKind::invalid_argument, "atom list is empty");
        }
        std::vector<double> sorted = labels;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            fail(ErrorKind::invalid_argument, "atoms must be distinct");
        }
        return std::shared_ptr<const Carrier>(new Carrier(std::move(labels), 0.0, 0.0));
    }

    static std::shared_ptr<const Carrier> grid(double lo, double hi, std::size_t cells)
    {
        if (!(lo < hi) || cells == 0) {
            fail(ErrorKind::invalid_argument, "grid needs lo < hi and at least one cell");
        }
        const double width = (hi - lo) / static_cast<double>(cells);
        std::vector<double> mid(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            mid[i] = lo + (static_cast<double>(i) + 0.5) * width;
        }
        return std::shared_ptr<const Carrier>(new Carrier(std::move(mid), width, lo));
    }

    const std::vector<double>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }

    bool is_grid() const noexcept { return cell_width_ > 0.0; }
    double cell_width() const noexcept { return cell_width_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return lo_ + cell_width_ * static_cast<double>(points_.size()); }
    double cell_lo(std::size_t i) const noexcept { return lo_ + cell_width_ * static_cast<double>(i); }
    double cell_hi(std::size_t i) const noexcept { return lo_ + cell_width_ * static_cast<double>(i + 1); }

    bool same_as(const Carrier& other) const noexcept
    {
        return this == &other || (cell_width_ == other.cell_width_ && lo_ == other.lo_ && points_ == other.points_);
    }

private:
    Carrier(std::vector<double> points, double width, double lo)
        : points_(std::move(points)), cell_width_(width), lo_(lo)
    {
    }

    std::vector<double> points_;
    double cell_width_;
    double lo_;
};

using CarrierPtr = std::shared_ptr<const Carrier>;

/// A probability vector over a carrier. Grid weights are cell masses, already
/// integrated against the cell width.
class Distribution {
public:
    Distribution(CarrierPtr carrier, Eigen::VectorXd weights)
        : carrier_(std::move(carrier)), weights_(std::move(weights))
    {
        if (!carrier_) {
            fail(ErrorKind::invalid_argument, "distribution without a carrier");
        }
        if (static_cast<std::size_t>(weights_.size()) != carrier_->size()) {
            fail(ErrorKind::invalid_argument, "weight count does not match carrier size");
        }
        for (Eigen::Index i = 0; i < weights_.size(); ++i) {
            if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
                fail(ErrorKind::invalid_argument, "weights must be finite and nonnegative");
            }
        }
        if (std::abs(weights_.sum() - 1.0) > tolerance()) {
            fail(ErrorKind::invalid_argument,
                 "weights sum to " + std::to_string(weights_.sum()) + ", not 1");
        }
    }

    static Distribution finite(std::vector<double> atoms, const std::vector<double>& weights)
    {
        return Distribution(Carrier::atoms(std::move(atoms)),
                            Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size())));
    }

    static Distribution uniform(CarrierPtr carrier)
    {
        const auto n = static_cast<Eigen::Index>(carrier->size());
        return Distribution(std::move(carrier), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    }

    /// Point mass at x. On a grid the mass is split linearly between the two
    /// neighbouring midpoints, which keeps the mean exact.
    static Distribution point_mass(CarrierPtr carrier, double x)
    {
        const auto n = static_cast<Eigen::Index>(carrier->size());
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        const auto& pts = carrier->points();
        if (!carrier->is_grid()) {
            auto it = std::find(pts.begin(), pts.end(), x);
            if (it == pts.end()) {
                fail(ErrorKind::invalid_argument, "point mass outside the atom set");
            }
            w[it - pts.begin()] = 1.0;
            return Distribution(std::move(carrier), std::move(w));
        }
        if (x <= pts.front()) {
            w[0] = 1.0;
        } else if (x >= pts.back()) {
            w[n - 1] = 1.0;
        } else {
            const double pos = (x - pts.front()) / carrier->cell_width();
            const auto left = std::min(static_cast<Eigen::Index>(std::floor(pos)), n - 2);
            const double frac = pos - static_cast<double>(left);
            w[left] = 1.0 - frac;
            w[left + 1] = frac;
        }
        return Distribution(std::move(carrier), std::move(w));
    }

    /// Cell masses of a density on a grid carrier (7-point Gauss-Legendre per
    /// cell), renormalized to absorb truncation outside [lo, hi].
    template <class Density>
    static Distribution from_density(CarrierPtr grid, Density&& density)
    {
        if (!grid->is_grid()) {
            fail(ErrorKind::invalid_argument, "from_density needs a grid carrier");
        }
        const auto n = static_cast<Eigen::Index>(grid->size());
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto cell = static_cast<std::size_t>(i);
            w[i] = boost::math::quadrature::gauss<double, 7>::integrate(density, grid->cell_lo(cell),
                                                                        grid->cell_hi(cell));
        }
        const double total = w.sum();
        if (!(total > 0.0)) {
            fail(ErrorKind::zero_mass, "density has no mass on the grid");
        }
        return Distribution(std::move(grid), w / total);
    }

    const Carrier& carrier() const noexcept { return *carrier_; }
    const CarrierPtr& carrier_ptr() const noexcept { return carrier_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }
    double tolerance() const noexcept { return carrier_->is_grid() ? grid_mass_tolerance : finite_mass_tolerance; }

private:
    CarrierPtr carrier_;
    Eigen::VectorXd weights_;
};

inline void require_same_support(const Distribution& p, const Distribution& q)
{
    if (!p.carrier().same_as(q.carrier())) {
        fail(ErrorKind::mismatched_support, "distributions live on different carriers");
    }
}

/// Un-halved L1 distance, in [0, 2].
inline double l1_tv(const Distribution& p, const Distribution& q)
{
    require_same_support(p, q);
    return (p.weights() - q.weights()).cwiseAbs().sum();
}

/// Integral of f against d; f may return double or std::complex<double>.
template <class F>
auto expect(const Distribution& d, F&& f)
{
    using R = std::decay_t<decltype(f(0.0))>;
    R sum{0.0};
    const auto& pts = d.carrier().points();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double w = d[i];
        if (w != 0.0) {
            sum += f(pts[i]) * w;
        }
    }
    if constexpr (std::is_same_v<R, std::complex<double>>) {
        if (!std::isfinite(sum.real()) || !std::isfinite(sum.imag())) {
            fail(ErrorKind::non_finite_result, "expectation overflowed");
        }
    } else {
        if (!std::isfinite(sum)) {
            fail(ErrorKind::non_finite_result, "expectation overflowed");
        }
    }
    return sum;
}

/// Turns nonnegative weights into a distribution; zero total mass is the
/// 0/0 degeneracy of the filter denominator.
inline Distribution normalize(CarrierPtr carrier, const Eigen::VectorXd& weights)
{
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) {
            fail(ErrorKind::invalid_argument, "normalize needs nonnegative weights");
        }
    }
    const double total = weights.sum();
    if (total == 0.0) {
        fail(ErrorKind::zero_mass, "all weights are zero");
    }
    if (!std::isfinite(total)) {
        fail(ErrorKind::non_finite_result, "weight total is not finite");
    }
    return Distribution(std::move(carrier), weights / total);
}

inline Distribution normalize(const std::vector<double>& atoms, const std::vector<double>& weights)
{
    return normalize(Carrier::atoms(atoms),
                     Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size())));
}

struct DensityRatio {
    Eigen::VectorXd value_at;
    std::optional<double> sup_bound;
    std::optional<std::pair<double, double>> p_norm; // (p, E_bar ratio^p)

    double operator()(std::size_t i) const { return value_at[static_cast<Eigen::Index>(i)]; }
};

/// dnu/dnu_bar per atom or cell. Fails when nu charges a point nu_bar does not.
inline DensityRatio density_ratio(const Distribution& nu, const Distribution& nu_bar,
                                  std::optional<double> p = std::nullopt)
{
    require_same_support(nu, nu_bar);
    const auto n = static_cast<Eigen::Index>(nu.size());
    DensityRatio r;
    r.value_at = Eigen::VectorXd::Zero(n);
    double sup = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = nu.weights()[i];
        const double b = nu_bar.weights()[i];
        if (b > 0.0) {
            r.value_at[i] = a / b;
            sup = std::max(sup, r.value_at[i]);
        } else if (a > 0.0) {
            fail(ErrorKind::not_absolutely_continuous,
                 "nu puts mass " + std::to_string(a) + " on point " + std::to_string(nu.carrier()[static_cast<std::size_t>(i)]) +
                     " where nu_bar has none");
        }
    }
    r.sup_bound = sup;
    if (p) {
        double moment = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (nu_bar.weights()[i] > 0.0) {
                moment += nu_bar.weights()[i] * std::pow(r.value_at[i], *p);
            }
        }
        r.p_norm = std::make_pair(*p, moment);
    }
    return r;
}

} // namespace filterstab
