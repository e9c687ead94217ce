#pragma once

#include "filterstab/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace filterstab {

/// x[0..n] and y[0..n] with y[0] = 0. `index` holds atom positions for
/// finite-state models and is empty otherwise.
struct SimulatedPath {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::size_t> index;
};

namespace detail {

inline std::size_t sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) {
            return static_cast<std::size_t>(i);
        }
    }
    for (Eigen::Index i = p.size() - 1; i >= 0; --i) {
        if (p[i] > 0.0) {
            return static_cast<std::size_t>(i);
        }
    }
    return 0;
}

} // namespace detail

/// Draws (X, Y) for n steps. `initial` overrides the model's own nu (used to
/// sample under the wrong prior).
inline SimulatedPath simulate_path(const HmmModel& model, std::size_t n, Rng& rng,
                                   const std::optional<InitialLaw>& initial = std::nullopt)
{
    if (n < 1) {
        fail(ErrorKind::invalid_argument, "simulate_path needs n >= 1");
    }
    const InitialLaw& law = initial ? *initial : model.nu;
    SimulatedPath path;
    path.x.reserve(n + 1);
    path.y.reserve(n + 1);
    path.y.push_back(0.0);

    if (model.is_finite_state()) {
        const auto* d = std::get_if<Distribution>(&law);
        if (!d || !d->carrier().same_as(*model.states)) {
            fail(ErrorKind::mismatched_support, "finite-state model needs an initial law on its atoms");
        }
        const Eigen::MatrixXd& m = model.signal.matrix();
        std::size_t cur = detail::sample_categorical(d->weights(), rng);
        path.index.push_back(cur);
        path.x.push_back((*model.states)[cur]);
        for (std::size_t k = 1; k <= n; ++k) {
            path.y.push_back(model.channel.sample(cur, (*model.states)[cur], rng));
            cur = detail::sample_categorical(m.row(static_cast<Eigen::Index>(cur)).transpose(), rng);
            path.index.push_back(cur);
            path.x.push_back((*model.states)[cur]);
        }
        return path;
    }

    if (model.channel.needs_finite_states()) {
        fail(ErrorKind::invalid_argument, "channel is indexed by atoms but the signal is continuous");
    }
    const auto* prior = std::get_if<ContinuousPrior>(&law);
    if (!prior) {
        fail(ErrorKind::invalid_argument, "continuous model needs a continuous initial law");
    }
    const Ar1 ar = model.signal.ar1();
    std::normal_distribution<double> theta(0.0, ar.b);
    double cur = prior->sample(rng);
    path.x.push_back(cur);
    for (std::size_t k = 1; k <= n; ++k) {
        path.y.push_back(model.channel.sample(0, cur, rng));
        cur = ar.a * cur + theta(rng);
        path.x.push_back(cur);
    }
    return path;
}

inline SimulatedPath simulate_path(const HmmModel& model, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    return simulate_path(model, n, rng);
}

} // namespace filterstab
