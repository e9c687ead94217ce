#pragma once

// Gridding of continuous-state models: the AR(1) transition becomes a
// row-stochastic matrix of Gaussian CDF differences between cell edges, the
// channel is evaluated at cell midpoints, and continuous priors become cell
// masses.

#include "filterstab/error.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/model.hpp"
#include "filterstab/noise.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

namespace filterstab {

inline constexpr std::size_t min_grid_cells = 16;
inline constexpr double max_mass_leak = 1e-6;

struct GridSpec {
    double lo = -5.0;
    double hi = 5.0;
    std::size_t cells = 2048;
};

inline void validate(const GridSpec& gs)
{
    if (!(gs.lo < gs.hi)) {
        fail(ErrorKind::invalid_argument, "grid needs lo < hi");
    }
    if (gs.cells < min_grid_cells) {
        fail(ErrorKind::invalid_argument, "grid needs at least " + std::to_string(min_grid_cells) + " cells");
    }
}

/// Transition masses from state value u into every cell of `grid`, before
/// renormalization. Returns the mass that fell inside the grid.
inline double ar1_grid_row(const Ar1& ar, const Carrier& grid, double u, Eigen::Ref<Eigen::VectorXd> row)
{
    const double centre = ar.a * u;
    const auto n = grid.size();
    // Upper-tail and lower-tail CDF values per edge; each cell mass is taken
    // from the side that avoids cancellation.
    double prev_z = (grid.cell_lo(0) - centre) / ar.b;
    double prev_lower = 0.5 * std::erfc(-prev_z / std::numbers::sqrt2);
    double prev_upper = 0.5 * std::erfc(prev_z / std::numbers::sqrt2);
    double inside = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double z = (grid.cell_hi(j) - centre) / ar.b;
        const double lower = 0.5 * std::erfc(-z / std::numbers::sqrt2);
        const double upper = 0.5 * std::erfc(z / std::numbers::sqrt2);
        double mass;
        if (prev_z >= 0.0) {
            mass = prev_upper - upper;
        } else if (z <= 0.0) {
            mass = lower - prev_lower;
        } else {
            mass = 1.0 - prev_lower - upper;
        }
        mass = std::max(mass, 0.0);
        row[static_cast<Eigen::Index>(j)] = mass;
        inside += mass;
        prev_z = z;
        prev_lower = lower;
        prev_upper = upper;
    }
    return inside;
}

/// Stationary (or worst-row) mass lost outside [lo, hi].
inline double ar1_truncation_leak(const Ar1& ar, const GridSpec& gs)
{
    if (std::abs(ar.a) < 1.0) {
        const double s = ar.b / std::sqrt(1.0 - ar.a * ar.a);
        return normal_cdf(gs.lo / s) + normal_cdf(-gs.hi / s);
    }
    auto grid = Carrier::grid(gs.lo, gs.hi, gs.cells);
    Eigen::VectorXd row(static_cast<Eigen::Index>(gs.cells));
    double worst = 0.0;
    for (double u : grid->points()) {
        worst = std::max(worst, 1.0 - ar1_grid_row(ar, *grid, u, row));
    }
    return worst;
}

inline Eigen::MatrixXd ar1_grid_matrix(const Ar1& ar, const Carrier& grid)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd m(n, n);
    Eigen::VectorXd row(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double inside = ar1_grid_row(ar, grid, grid[static_cast<std::size_t>(i)], row);
        if (!(inside > 0.0)) {
            fail(ErrorKind::mass_leak, "a grid cell maps entirely outside the grid");
        }
        m.row(i) = row.transpose() / inside;
    }
    return m;
}

/// Cell masses of a continuous prior on a grid.
inline Distribution discretize_prior(const ContinuousPrior& prior, CarrierPtr grid)
{
    return Distribution::from_density(std::move(grid), [&prior](double x) { return prior.density(x); });
}

/// Finite model on the grid midpoints. Grids are cell-centred, so an even
/// cell count on a symmetric range never places a state at 0.
inline HmmModel discretize(const HmmModel& model, const GridSpec& gs)
{
    validate(gs);
    if (model.states || model.signal.is_finite()) {
        fail(ErrorKind::invalid_argument, "discretize needs a continuous-state model");
    }
    const Ar1 ar = model.signal.ar1();
    const double leak = ar1_truncation_leak(ar, gs);
    if (leak > max_mass_leak) {
        fail(ErrorKind::mass_leak, "grid [" + format_double(gs.lo) + ", " + format_double(gs.hi) +
                                       "] loses stationary mass " + format_double(leak));
    }
    auto grid = Carrier::grid(gs.lo, gs.hi, gs.cells);
    auto kernel = SignalKernel::finite(ar1_grid_matrix(ar, *grid)).with_ar1_source(ar);
    InitialLaw nu = model.nu;
    if (const auto* prior = std::get_if<ContinuousPrior>(&model.nu)) {
        nu = discretize_prior(*prior, grid);
    }
    return HmmModel{model.id + "@grid", std::move(kernel), model.channel, std::move(grid), std::move(nu)};
}

} // namespace filterstab
