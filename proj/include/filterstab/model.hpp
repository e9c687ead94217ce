#pragma once

// Signal kernels, observation channels and the assembled hidden Markov model
//   (X_n, Y_n):  X_n | X_{n-1} ~ Lambda(X_{n-1}, .),  Y_n | X_{n-1} ~ gamma(X_{n-1}, y) phi(dy),
// with Y_0 = 0.

#include "filterstab/error.hpp"
#include "filterstab/functions.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/noise.hpp"
#include "filterstab/sg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace filterstab {

inline constexpr double stochastic_row_tolerance = 1e-12;

struct Ar1 {
    double a = 0.0;
    double b = 1.0;
};

/// Either a row-stochastic matrix on a finite carrier or the Gaussian AR(1)
/// recursion X_n = a X_{n-1} + theta_n, theta_n ~ N(0, b^2).
class SignalKernel {
public:
    enum class Kind { finite_matrix, gaussian_ar1 };

    static SignalKernel finite(Eigen::MatrixXd matrix)
    {
        if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
            fail(ErrorKind::bad_stochastic_matrix, "kernel matrix must be square and nonempty");
        }
        for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
            for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
                if (!(matrix(r, c) >= 0.0) || !std::isfinite(matrix(r, c))) {
                    fail(ErrorKind::bad_stochastic_matrix,
                         "row " + std::to_string(r) + " has a negative or non-finite entry");
                }
            }
            const double s = matrix.row(r).sum();
            if (std::abs(s - 1.0) > stochastic_row_tolerance) {
                fail(ErrorKind::bad_stochastic_matrix,
                     "row " + std::to_string(r) + " sums to " + format_double(s));
            }
        }
        SignalKernel k;
        k.kind_ = Kind::finite_matrix;
        k.matrix_ = std::move(matrix);
        return k;
    }

    static SignalKernel finite(const std::vector<std::vector<double>>& rows)
    {
        const auto d = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd m(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
            if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != d) {
                fail(ErrorKind::bad_stochastic_matrix, "kernel matrix must be square");
            }
            for (Eigen::Index c = 0; c < d; ++c) {
                m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            }
        }
        return finite(std::move(m));
    }

    /// `require_stable` enforces |a| < 1 (the ergodic multiplicative-noise model).
    static SignalKernel gaussian_ar1(double a, double b, bool require_stable = false)
    {
        if (!(b > 0.0) || !std::isfinite(a)) {
            fail(ErrorKind::invalid_argument, "AR(1) needs finite drift and positive noise std");
        }
        if (require_stable && !(std::abs(a) < 1.0)) {
            fail(ErrorKind::invalid_argument, "AR(1) drift must satisfy |a| < 1");
        }
        SignalKernel k;
        k.kind_ = Kind::gaussian_ar1;
        k.ar1_ = Ar1{a, b};
        return k;
    }

    Kind kind() const noexcept { return kind_; }
    bool is_finite() const noexcept { return kind_ == Kind::finite_matrix; }
    const Eigen::MatrixXd& matrix() const
    {
        if (!is_finite()) {
            fail(ErrorKind::invalid_argument, "kernel has no matrix form (discretize it first)");
        }
        return matrix_;
    }
    const Ar1& ar1() const
    {
        if (kind_ != Kind::gaussian_ar1 && !ar1_source_) {
            fail(ErrorKind::invalid_argument, "kernel is not an AR(1) recursion");
        }
        return kind_ == Kind::gaussian_ar1 ? ar1_ : *ar1_source_;
    }
    /// Set on matrices produced by discretizing an AR(1) kernel.
    const std::optional<Ar1>& ar1_source() const noexcept { return ar1_source_; }
    std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }

    SignalKernel with_ar1_source(Ar1 src) const
    {
        SignalKernel k = *this;
        k.ar1_source_ = src;
        return k;
    }

private:
    SignalKernel() = default;

    Kind kind_ = Kind::finite_matrix;
    Eigen::MatrixXd matrix_;
    Ar1 ar1_;
    std::optional<Ar1> ar1_source_;
};

// Channel shapes. Finite-state channels are indexed by the state's position;
// value-based channels read the state's numeric value.
struct FiniteAlphabetChannel {
    std::vector<double> letters;
    Eigen::MatrixXd probs; // states x letters
};

/// Y_n = xi_n(j) when X_{n-1} is the j-th atom.
struct PerStateNoiseChannel {
    std::vector<NoiseLaw> laws;
};

/// Y_n = h(X_{n-1}) + xi_n.
struct AdditiveChannel {
    ScalarFunction h;
    NoiseLaw noise;
};

/// Y_n = X_{n-1} xi_n, i.e. gamma(x, y) = p(y/x)/|x|.
struct MultiplicativeChannel {
    NoiseLaw noise;
};

class ObservationChannel {
public:
    using Shape = std::variant<FiniteAlphabetChannel, PerStateNoiseChannel, AdditiveChannel, MultiplicativeChannel>;

    explicit ObservationChannel(Shape shape) : shape_(std::move(shape)) {}

    const Shape& shape() const noexcept { return shape_; }

    bool is_finite_alphabet() const noexcept { return std::holds_alternative<FiniteAlphabetChannel>(shape_); }
    bool needs_finite_states() const noexcept
    {
        return is_finite_alphabet() || std::holds_alternative<PerStateNoiseChannel>(shape_);
    }

    const std::vector<double>& letters() const
    {
        if (!is_finite_alphabet()) {
            fail(ErrorKind::invalid_argument, "channel has no finite alphabet");
        }
        return std::get<FiniteAlphabetChannel>(shape_).letters;
    }

    std::optional<std::size_t> letter_index(double y) const
    {
        const auto& ls = letters();
        auto it = std::find(ls.begin(), ls.end(), y);
        if (it == ls.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - ls.begin());
    }

    /// log gamma(state, y) w.r.t. phi (counting measure for finite alphabets,
    /// Lebesgue otherwise).
    double log_density(std::size_t state, double x, double y) const
    {
        constexpr double neg_inf = -std::numeric_limits<double>::infinity();
        return std::visit(
            [&](const auto& ch) -> double {
                using T = std::decay_t<decltype(ch)>;
                if constexpr (std::is_same_v<T, FiniteAlphabetChannel>) {
                    const auto k = letter_index(y);
                    if (!k) {
                        return neg_inf;
                    }
                    const double p = ch.probs(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(*k));
                    return p > 0.0 ? std::log(p) : neg_inf;
                } else if constexpr (std::is_same_v<T, PerStateNoiseChannel>) {
                    return log_pdf(ch.laws[state], y);
                } else if constexpr (std::is_same_v<T, AdditiveChannel>) {
                    return log_pdf(ch.noise, y - ch.h(x));
                } else {
                    if (x == 0.0) {
                        return neg_inf;
                    }
                    return log_pdf(ch.noise, y / x) - std::log(std::abs(x));
                }
            },
            shape_);
    }

    double density(std::size_t state, double x, double y) const { return std::exp(log_density(state, x, y)); }

    double sample(std::size_t state, double x, Rng& rng) const
    {
        return std::visit(
            [&](const auto& ch) -> double {
                using T = std::decay_t<decltype(ch)>;
                if constexpr (std::is_same_v<T, FiniteAlphabetChannel>) {
                    const auto row = ch.probs.row(static_cast<Eigen::Index>(state));
                    std::uniform_real_distribution<double> unif(0.0, 1.0);
                    const double u = unif(rng);
                    double acc = 0.0;
                    for (Eigen::Index k = 0; k < row.size(); ++k) {
                        acc += row[k];
                        if (u < acc) {
                            return ch.letters[static_cast<std::size_t>(k)];
                        }
                    }
                    for (Eigen::Index k = row.size() - 1; k >= 0; --k) {
                        if (row[k] > 0.0) {
                            return ch.letters[static_cast<std::size_t>(k)];
                        }
                    }
                    return ch.letters.back();
                } else if constexpr (std::is_same_v<T, PerStateNoiseChannel>) {
                    return filterstab::sample(ch.laws[state], rng);
                } else if constexpr (std::is_same_v<T, AdditiveChannel>) {
                    return ch.h(x) + filterstab::sample(ch.noise, rng);
                } else {
                    return x * filterstab::sample(ch.noise, rng);
                }
            },
            shape_);
    }

    /// int g(y) gamma(state, y) phi(dy).
    double integrate(std::size_t state, double x, const ScalarFunction& g) const
    {
        return std::visit(
            [&](const auto& ch) -> double {
                using T = std::decay_t<decltype(ch)>;
                if constexpr (std::is_same_v<T, FiniteAlphabetChannel>) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < ch.letters.size(); ++k) {
                        const double p = ch.probs(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(k));
                        if (p > 0.0) {
                            s += g(ch.letters[k]) * p;
                        }
                    }
                    return s;
                } else if constexpr (std::is_same_v<T, PerStateNoiseChannel>) {
                    return expectation(ch.laws[state], g, g.growth_order());
                } else if constexpr (std::is_same_v<T, AdditiveChannel>) {
                    const double shift = ch.h(x);
                    return expectation(
                        ch.noise, [&](double z) { return g(shift + z); }, g.growth_order());
                } else {
                    if (x == 0.0) {
                        return g(0.0);
                    }
                    return expectation(
                        ch.noise, [&](double z) { return g(x * z); }, g.growth_order());
                }
            },
            shape_);
    }

    std::string id() const
    {
        return std::visit(
            [](const auto& ch) -> std::string {
                using T = std::decay_t<decltype(ch)>;
                if constexpr (std::is_same_v<T, FiniteAlphabetChannel>) {
                    return "alphabet(" + std::to_string(ch.letters.size()) + ")";
                } else if constexpr (std::is_same_v<T, PerStateNoiseChannel>) {
                    std::string s = "per-state(";
                    for (std::size_t j = 0; j < ch.laws.size(); ++j) {
                        s += (j ? "/" : "") + describe(ch.laws[j]);
                    }
                    return s + ")";
                } else if constexpr (std::is_same_v<T, AdditiveChannel>) {
                    return "additive(" + ch.h.id() + "+" + describe(ch.noise) + ")";
                } else {
                    return "multiplicative(" + describe(ch.noise) + ")";
                }
            },
            shape_);
    }

private:
    Shape shape_;
};

using InitialLaw = std::variant<Distribution, ContinuousPrior>;

/// Signal kernel + channel + true initial law. `states` is null for models on
/// the continuous line; those must be discretized before filtering.
struct HmmModel {
    std::string id;
    SignalKernel signal;
    ObservationChannel channel;
    CarrierPtr states;
    InitialLaw nu;

    bool is_finite_state() const noexcept { return states != nullptr && signal.is_finite(); }
    std::size_t dim() const { return states ? states->size() : 0; }

    double log_gamma(std::size_t i, double y) const { return channel.log_density(i, (*states)[i], y); }
    double gamma(std::size_t i, double y) const { return std::exp(log_gamma(i, y)); }
};

inline void check_channel_fits(const ObservationChannel& ch, std::size_t d)
{
    if (const auto* fa = std::get_if<FiniteAlphabetChannel>(&ch.shape())) {
        if (static_cast<std::size_t>(fa->probs.rows()) != d ||
            static_cast<std::size_t>(fa->probs.cols()) != fa->letters.size()) {
            fail(ErrorKind::invalid_argument, "emission matrix shape does not match states x letters");
        }
        for (Eigen::Index r = 0; r < fa->probs.rows(); ++r) {
            if ((fa->probs.row(r).array() < 0.0).any() ||
                std::abs(fa->probs.row(r).sum() - 1.0) > stochastic_row_tolerance) {
                fail(ErrorKind::bad_stochastic_matrix, "emission row " + std::to_string(r) + " is not a distribution");
            }
        }
        auto sorted = fa->letters;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            fail(ErrorKind::invalid_argument, "alphabet letters must be distinct");
        }
    } else if (const auto* ps = std::get_if<PerStateNoiseChannel>(&ch.shape())) {
        if (ps->laws.size() != d) {
            fail(ErrorKind::invalid_argument, "need one observation law per state");
        }
        for (const auto& l : ps->laws) {
            validate(l);
        }
    }
}

/// Finite HMM with an explicit emission matrix over a finite alphabet.
inline HmmModel build_alphabet_hmm(const SignalKernel& kernel, std::vector<double> atoms, std::vector<double> letters,
                                   Eigen::MatrixXd emission, std::optional<Distribution> nu = std::nullopt)
{
    if (!kernel.is_finite() || kernel.dim() != atoms.size()) {
        fail(ErrorKind::invalid_argument, "kernel dimension must match the atom count");
    }
    ObservationChannel ch(FiniteAlphabetChannel{std::move(letters), std::move(emission)});
    check_channel_fits(ch, atoms.size());
    auto carrier = Carrier::atoms(std::move(atoms));
    Distribution init = nu ? *nu : Distribution::uniform(carrier);
    if (!init.carrier().same_as(*carrier)) {
        fail(ErrorKind::mismatched_support, "initial law is not on the model atoms");
    }
    return HmmModel{"alphabet-hmm", kernel, std::move(ch), std::move(carrier), std::move(init)};
}

/// Y_n = sum_j xi_n(j) 1{X_{n-1} = a_j}: the j-th law is emitted from atom a_j.
/// All laws must share one reference measure (all continuous or all finite).
inline HmmModel build_finite_hmm(const SignalKernel& kernel, std::vector<double> atoms, const std::vector<ObsLaw>& obs,
                                 std::optional<Distribution> nu = std::nullopt)
{
    if (atoms.size() < 2) {
        fail(ErrorKind::invalid_argument, "finite HMM needs at least two atoms");
    }
    if (!kernel.is_finite() || kernel.dim() != atoms.size() || obs.size() != atoms.size()) {
        fail(ErrorKind::invalid_argument, "kernel, atoms and observation laws must agree in size");
    }
    const auto finite_count =
        std::count_if(obs.begin(), obs.end(), [](const ObsLaw& l) { return std::holds_alternative<FiniteLaw>(l); });
    if (finite_count != 0 && finite_count != static_cast<std::ptrdiff_t>(obs.size())) {
        fail(ErrorKind::unsupported_noise_family, "observation laws mix counting and Lebesgue reference measures");
    }
    if (finite_count == 0) {
        std::vector<NoiseLaw> laws;
        for (const auto& l : obs) {
            if (const auto* n = std::get_if<NormalLaw>(&l)) {
                laws.emplace_back(*n);
            } else {
                laws.emplace_back(std::get<MultNoiseLaw>(l));
            }
        }
        ObservationChannel ch(PerStateNoiseChannel{std::move(laws)});
        check_channel_fits(ch, atoms.size());
        auto carrier = Carrier::atoms(std::move(atoms));
        Distribution init = nu ? *nu : Distribution::uniform(carrier);
        if (!init.carrier().same_as(*carrier)) {
            fail(ErrorKind::mismatched_support, "initial law is not on the model atoms");
        }
        return HmmModel{"finite-hmm", kernel, std::move(ch), std::move(carrier), std::move(init)};
    }
    std::vector<double> letters;
    for (const auto& l : obs) {
        for (double v : std::get<FiniteLaw>(l).letters) {
            if (std::find(letters.begin(), letters.end(), v) == letters.end()) {
                letters.push_back(v);
            }
        }
    }
    std::sort(letters.begin(), letters.end());
    Eigen::MatrixXd emission = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(atoms.size()),
                                                     static_cast<Eigen::Index>(letters.size()));
    for (std::size_t j = 0; j < obs.size(); ++j) {
        const auto& fl = std::get<FiniteLaw>(obs[j]);
        if (fl.letters.size() != fl.probs.size()) {
            fail(ErrorKind::invalid_argument, "finite law letters and probabilities differ in length");
        }
        for (std::size_t k = 0; k < fl.letters.size(); ++k) {
            const auto pos = std::find(letters.begin(), letters.end(), fl.letters[k]) - letters.begin();
            emission(static_cast<Eigen::Index>(j), pos) += fl.probs[k];
        }
    }
    auto m = build_alphabet_hmm(kernel, std::move(atoms), std::move(letters), std::move(emission), std::move(nu));
    m.id = "finite-hmm";
    return m;
}

struct MultNoiseParams {
    double a = 0.8;
    double b = 0.5;
    double rho = 1.0;
    SgParams prior;
};

/// X_n = a X_{n-1} + theta_n, Y_n = X_{n-1} xi_n with xi ~ p_rho and an SG prior.
inline HmmModel build_mult_noise_model(const MultNoiseParams& p)
{
    validate(p.prior);
    if (!(p.rho > 0.0)) {
        fail(ErrorKind::invalid_argument, "rho must be positive");
    }
    return HmmModel{"mult-noise", SignalKernel::gaussian_ar1(p.a, p.b, true),
                    ObservationChannel(MultiplicativeChannel{MultNoiseLaw{p.rho}}), nullptr,
                    ContinuousPrior{p.prior, 0.0}};
}

/// Y_n = h(X_{n-1}) + xi_n. For finite kernels `states` must be supplied.
inline HmmModel build_additive_model(const SignalKernel& signal, const ScalarFunction& h, const NoiseLaw& noise,
                                     InitialLaw nu, CarrierPtr states = nullptr)
{
    validate(noise);
    if (signal.is_finite()) {
        if (!states || states->size() != signal.dim()) {
            fail(ErrorKind::invalid_argument, "finite signal needs a matching state carrier");
        }
    } else if (states) {
        fail(ErrorKind::invalid_argument, "continuous signal takes no carrier (use discretize)");
    }
    return HmmModel{"additive", signal, ObservationChannel(AdditiveChannel{h, noise}), std::move(states),
                    std::move(nu)};
}

/// Deterministic 2-cycle seen through an uninformative channel: the filter
/// reduces to open-loop prediction and never forgets its initial condition.
inline HmmModel build_nonmixing_control()
{
    auto m = build_finite_hmm(SignalKernel::finite(std::vector<std::vector<double>>{{0.0, 1.0}, {1.0, 0.0}}), {1.0, 2.0},
                              {NormalLaw{0.0, 1.0}, NormalLaw{0.0, 1.0}});
    m.id = "nonmixing-control";
    return m;
}

inline constexpr std::size_t stationary_max_iterations = 100000;
inline constexpr double stationary_tolerance = 1e-13;

/// Invariant law of a finite kernel by power iteration. The returned vector is
/// the limit from the uniform start; point-mass starts must reach the same
/// limit, which rules out reducible and periodic kernels.
inline Distribution stationary_distribution(const SignalKernel& k, CarrierPtr carrier = nullptr)
{
    const Eigen::MatrixXd& m = k.matrix();
    const Eigen::Index d = m.rows();
    if (!carrier) {
        std::vector<double> labels(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) {
            labels[static_cast<std::size_t>(i)] = static_cast<double>(i);
        }
        carrier = Carrier::atoms(std::move(labels));
    }
    std::vector<Eigen::Index> starts;
    if (d <= 64) {
        for (Eigen::Index i = 0; i < d; ++i) {
            starts.push_back(i);
        }
    } else {
        starts = {0, d / 2, d - 1};
    }
    const auto cols = static_cast<Eigen::Index>(starts.size()) + 1;
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, cols);
    v.col(0).setConstant(1.0 / static_cast<double>(d));
    for (Eigen::Index c = 1; c < cols; ++c) {
        v(starts[static_cast<std::size_t>(c - 1)], c) = 1.0;
    }
    const Eigen::MatrixXd mt = m.transpose();
    Eigen::MatrixXd next(d, cols);
    for (std::size_t it = 0; it < stationary_max_iterations; ++it) {
        next.noalias() = mt * v;
        for (Eigen::Index c = 0; c < cols; ++c) {
            next.col(c) /= next.col(c).sum();
        }
        const double change = (next - v).cwiseAbs().colwise().sum().maxCoeff();
        v.swap(next);
        if (change <= stationary_tolerance) {
            double spread = 0.0;
            for (Eigen::Index c = 1; c < cols; ++c) {
                spread = std::max(spread, (v.col(c) - v.col(0)).cwiseAbs().sum());
            }
            if (spread > 1e-9) {
                fail(ErrorKind::no_convergence, "power iteration has several limits (reducible kernel)");
            }
            Eigen::VectorXd mu = v.col(0).cwiseMax(0.0);
            return Distribution(std::move(carrier), mu / mu.sum());
        }
    }
    fail(ErrorKind::no_convergence, "power iteration did not settle (periodic or slowly mixing kernel)");
}

} // namespace filterstab
