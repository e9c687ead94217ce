#pragma once

// Stability series: path-averaged distances between the filter started from
// the true prior nu and the one started from the wrong prior nu_bar, both
// run on the same observation path. Monte-Carlo trials are batched so that
// all filter columns of a batch share one kernel product; exact series walk
// the observation tree instead.

#include "filterstab/enumeration.hpp"
#include "filterstab/error.hpp"
#include "filterstab/filter.hpp"
#include "filterstab/functions.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/mixing.hpp"
#include "filterstab/model.hpp"
#include "filterstab/seed.hpp"
#include "filterstab/simulate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace filterstab {

enum class MetricKind { weak_f, tv, predictor_g, rho_diff, char_t };

inline std::string_view to_string(MetricKind k)
{
    switch (k) {
    case MetricKind::weak_f: return "weak-f";
    case MetricKind::tv: return "tv";
    case MetricKind::predictor_g: return "predictor-g";
    case MetricKind::rho_diff: return "rho-diff";
    case MetricKind::char_t: return "char-t";
    }
    return "?";
}

inline std::optional<MetricKind> parse_metric_kind(std::string_view s)
{
    for (auto k : {MetricKind::weak_f, MetricKind::tv, MetricKind::predictor_g, MetricKind::rho_diff,
                   MetricKind::char_t}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

struct MetricRequest {
    MetricKind kind = MetricKind::tv;
    std::optional<ScalarFunction> fn;
    double t = 0.0;

    static MetricRequest weak(ScalarFunction f) { return {MetricKind::weak_f, std::move(f), 0.0}; }
    static MetricRequest total_variation() { return {MetricKind::tv, std::nullopt, 0.0}; }
    static MetricRequest predictor(ScalarFunction g) { return {MetricKind::predictor_g, std::move(g), 0.0}; }
    static MetricRequest rho() { return {MetricKind::rho_diff, std::nullopt, 0.0}; }
    static MetricRequest characteristic(double t) { return {MetricKind::char_t, std::nullopt, t}; }

    std::string label() const
    {
        switch (kind) {
        case MetricKind::weak_f:
        case MetricKind::predictor_g: return fn ? fn->id() : "?";
        case MetricKind::char_t: return "t=" + format_double(t);
        case MetricKind::tv: return "tv";
        case MetricKind::rho_diff: return "rho";
        }
        return "?";
    }

    /// Predictor and rho metrics start at n = 1, the others at n = 0.
    std::size_t first_n() const noexcept
    {
        return kind == MetricKind::predictor_g || kind == MetricKind::rho_diff ? 1 : 0;
    }

    bool under_wrong_prior() const noexcept { return kind == MetricKind::rho_diff; }
};

struct StabilitySeries {
    MetricKind kind = MetricKind::tv;
    std::string label;
    std::vector<std::size_t> n_values;
    std::vector<double> metric;
    std::vector<double> std_err;
    std::size_t trials = 0;

    double at(std::size_t n) const
    {
        for (std::size_t i = 0; i < n_values.size(); ++i) {
            if (n_values[i] == n) {
                return metric[i];
            }
        }
        fail(ErrorKind::invalid_argument, "series has no entry for n = " + std::to_string(n));
    }

    double std_err_at(std::size_t n) const
    {
        for (std::size_t i = 0; i < n_values.size(); ++i) {
            if (n_values[i] == n) {
                return std_err[i];
            }
        }
        fail(ErrorKind::invalid_argument, "series has no entry for n = " + std::to_string(n));
    }
};

struct TrialFailure {
    std::size_t trial = 0;
    std::size_t step = 0;
    ErrorKind kind = ErrorKind::zero_likelihood;
    std::string reason;
};

inline constexpr double max_failure_fraction = 0.01;

struct SeriesEstimate {
    std::vector<StabilitySeries> series;
    std::vector<TrialFailure> failures;
    std::size_t trials_requested = 0;
    bool exact = false;
    // [series][trial][n index]; filled only on request, empty rows for failed trials.
    std::vector<std::vector<std::vector<double>>> trial_values;

    double failure_fraction() const
    {
        return trials_requested ? static_cast<double>(failures.size()) / static_cast<double>(trials_requested) : 0.0;
    }
    bool failed() const { return failure_fraction() > max_failure_fraction; }

    const StabilitySeries& get(MetricKind kind, std::string_view label = {}) const
    {
        for (const auto& s : series) {
            if (s.kind == kind && (label.empty() || s.label == label)) {
                return s;
            }
        }
        fail(ErrorKind::invalid_argument, "no " + std::string(to_string(kind)) + " series named '" +
                                              std::string(label) + "'");
    }
};

/// A filter model on a finite carrier plus the laws used to simulate paths.
/// For gridded problems the truth is the continuous model itself; only the
/// filters run on the grid.
struct StabilityProblem {
    HmmModel filter_model;
    HmmModel truth_model;
    InitialLaw truth_nu;
    InitialLaw truth_nu_bar;
    Distribution nu;
    Distribution nu_bar;

    static StabilityProblem finite(HmmModel model, Distribution nu, Distribution nu_bar)
    {
        require_filterable(model);
        require_same_support(nu, nu_bar);
        if (!nu.carrier().same_as(*model.states)) {
            fail(ErrorKind::mismatched_support, "priors are not on the model's atoms");
        }
        density_ratio(nu, nu_bar);
        return StabilityProblem{model, model, nu, nu_bar, std::move(nu), std::move(nu_bar)};
    }

    static StabilityProblem gridded(const HmmModel& model, const GridSpec& gs, const ContinuousPrior& prior,
                                    const ContinuousPrior& prior_bar)
    {
        validate(prior.shape);
        validate(prior_bar.shape);
        HmmModel truth = model;
        truth.nu = prior;
        HmmModel grid_model = discretize(truth, gs);
        Distribution nu = std::get<Distribution>(grid_model.nu);
        Distribution nu_bar = discretize_prior(prior_bar, grid_model.states);
        density_ratio(nu, nu_bar);
        return StabilityProblem{std::move(grid_model), std::move(truth), prior, prior_bar, std::move(nu),
                                std::move(nu_bar)};
    }

    std::string id() const { return filter_model.id; }
};

namespace detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) noexcept
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            c_ += (sum_ - t) + v;
        } else {
            c_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

} // namespace detail

struct MeanEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t count = 0;
};

/// Sample mean and standard error with compensated sums, in input order.
inline MeanEstimate mean_estimate(std::span<const double> values)
{
    MeanEstimate m;
    m.count = values.size();
    if (values.empty()) {
        return m;
    }
    detail::CompensatedSum s;
    for (double v : values) {
        s.add(v);
    }
    m.mean = s.value() / static_cast<double>(values.size());
    if (values.size() > 1) {
        detail::CompensatedSum sq;
        for (double v : values) {
            sq.add((v - m.mean) * (v - m.mean));
        }
        m.std_err = std::sqrt(sq.value() / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
    }
    return m;
}

/// Aggregates per-trial rows (empty row = excluded trial) in trial order.
inline StabilitySeries aggregate_series(MetricKind kind, std::string label, std::vector<std::size_t> n_values,
                                        const std::vector<std::vector<double>>& per_trial)
{
    StabilitySeries s;
    s.kind = kind;
    s.label = std::move(label);
    s.n_values = std::move(n_values);
    const std::size_t len = s.n_values.size();
    std::vector<double> column;
    column.reserve(per_trial.size());
    for (std::size_t j = 0; j < len; ++j) {
        column.clear();
        for (const auto& row : per_trial) {
            if (!row.empty()) {
                column.push_back(row[j]);
            }
        }
        const auto m = mean_estimate(column);
        s.metric.push_back(m.mean);
        s.std_err.push_back(m.std_err);
        s.trials = m.count;
    }
    return s;
}

inline std::size_t resolve_workers(std::size_t requested)
{
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("FILTERSTAB_WORKERS")) {
        std::size_t v = 0;
        const std::string_view sv(env);
        const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
        if (ec == std::errc() && ptr == sv.data() + sv.size() && v > 0) {
            return v;
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

struct McOptions {
    std::size_t trials = 1000;
    std::size_t n_max = 100;
    std::uint64_t seed = 1;
    std::size_t workers = 0;   // 0: FILTERSTAB_WORKERS, else hardware threads
    std::size_t batch = 32;    // trials per kernel product; fixed so results do not depend on workers
    bool keep_trial_values = false;
};

namespace detail {

struct PreparedMetric {
    MetricRequest request;
    Eigen::VectorXd a;
    Eigen::VectorXd b;
    std::size_t offset = 0;
    std::size_t count = 0;
};

struct TrialRecord {
    bool ok = true;
    TrialFailure failure;
    std::vector<double> values;
};

inline std::vector<PreparedMetric> prepare_metrics(const StabilityProblem& pb,
                                                   const std::vector<MetricRequest>& requests, std::size_t n_max,
                                                   std::size_t& width)
{
    const HmmModel& m = pb.filter_model;
    std::vector<PreparedMetric> out;
    width = 0;
    for (const auto& r : requests) {
        PreparedMetric p;
        p.request = r;
        const auto& pts = m.states->points();
        const auto d = static_cast<Eigen::Index>(pts.size());
        switch (r.kind) {
        case MetricKind::weak_f:
            if (!r.fn) {
                fail(ErrorKind::invalid_argument, "weak-f metric needs f");
            }
            p.a.resize(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                p.a[i] = (*r.fn)(pts[static_cast<std::size_t>(i)]);
            }
            break;
        case MetricKind::predictor_g:
            if (!r.fn) {
                fail(ErrorKind::invalid_argument, "predictor-g metric needs g");
            }
            p.a = channel_integrals(m, *r.fn);
            break;
        case MetricKind::char_t:
            p.a.resize(d);
            p.b.resize(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                p.a[i] = std::cos(r.t * pts[static_cast<std::size_t>(i)]);
                p.b[i] = std::sin(r.t * pts[static_cast<std::size_t>(i)]);
            }
            break;
        case MetricKind::tv:
        case MetricKind::rho_diff: break;
        }
        p.offset = width;
        p.count = n_max + 1 - r.first_n();
        width += p.count;
        out.push_back(std::move(p));
    }
    return out;
}

/// Metrics that depend only on the pair of filters at time n.
inline void record_pair(const std::vector<PreparedMetric>& metrics, std::size_t n, std::size_t n_max,
                        const Eigen::Ref<const Eigen::VectorXd>& w, const Eigen::Ref<const Eigen::VectorXd>& w_bar,
                        std::vector<double>& values)
{
    for (const auto& p : metrics) {
        switch (p.request.kind) {
        case MetricKind::weak_f: values[p.offset + n] = std::abs(p.a.dot(w - w_bar)); break;
        case MetricKind::tv: values[p.offset + n] = (w - w_bar).cwiseAbs().sum(); break;
        case MetricKind::char_t: {
            if (p.request.t == 0.0) {
                values[p.offset + n] = 0.0; // both filters integrate 1 to 1
                break;
            }
            const double re = p.a.dot(w - w_bar);
            const double im = p.b.dot(w - w_bar);
            values[p.offset + n] = std::hypot(re, im);
            break;
        }
        case MetricKind::predictor_g:
            // eta_{n+1|n} uses pi_n.
            if (n + 1 <= n_max) {
                values[p.offset + n] = std::abs(p.a.dot(w - w_bar));
            }
            break;
        case MetricKind::rho_diff: break;
        }
    }
}

inline void run_batch(const StabilityProblem& pb, const std::vector<PreparedMetric>& metrics, std::size_t width,
                      bool under_bar, const McOptions& opt, std::size_t first, std::size_t count,
                      std::vector<TrialRecord>& records)
{
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    const HmmModel& fm = pb.filter_model;
    const auto d = static_cast<Eigen::Index>(fm.dim());
    const std::size_t n_max = opt.n_max;

    std::vector<SimulatedPath> paths(count);
    for (std::size_t t = 0; t < count; ++t) {
        auto& rec = records[first + t];
        rec.values.assign(width, 0.0);
        try {
            Rng rng = trial_rng(opt.seed, first + t);
            paths[t] = simulate_path(pb.truth_model, n_max, rng, under_bar ? pb.truth_nu_bar : pb.truth_nu);
        } catch (const Error& e) {
            rec.ok = false;
            rec.failure = {first + t, 0, e.kind(), e.what()};
        }
    }

    Eigen::MatrixXd w(d, static_cast<Eigen::Index>(2 * count));
    Eigen::MatrixXd scratch;
    for (std::size_t t = 0; t < count; ++t) {
        w.col(static_cast<Eigen::Index>(2 * t)) = pb.nu.weights();
        w.col(static_cast<Eigen::Index>(2 * t + 1)) = pb.nu_bar.weights();
    }
    std::vector<double> log_rho(count, 0.0);
    std::vector<char> nu_dead(count, 0);
    Eigen::VectorXd lg(d);

    for (std::size_t t = 0; t < count; ++t) {
        if (records[first + t].ok) {
            record_pair(metrics, 0, n_max, w.col(static_cast<Eigen::Index>(2 * t)),
                        w.col(static_cast<Eigen::Index>(2 * t + 1)), records[first + t].values);
        }
    }

    for (std::size_t k = 1; k <= n_max; ++k) {
        for (std::size_t t = 0; t < count; ++t) {
            auto& rec = records[first + t];
            const auto c0 = static_cast<Eigen::Index>(2 * t);
            if (!rec.ok) {
                w.col(c0) = pb.nu.weights();
                w.col(c0 + 1) = pb.nu_bar.weights();
                continue;
            }
            log_likelihoods(fm, paths[t].y[k], lg);
            const double lc_bar = bayes_correct(w.col(c0 + 1), lg);
            if (lc_bar == neg_inf) {
                rec.ok = false;
                rec.failure = {first + t, k, ErrorKind::zero_likelihood,
                               "observation impossible under the wrong-prior filter"};
                continue;
            }
            double lc = neg_inf;
            if (!nu_dead[t]) {
                lc = bayes_correct(w.col(c0), lg);
            }
            if (lc == neg_inf) {
                if (!under_bar) {
                    rec.ok = false;
                    rec.failure = {first + t, k, ErrorKind::zero_likelihood,
                                   "observation impossible under the true-prior filter"};
                    continue;
                }
                // P-null path: rho is 0 from here on.
                nu_dead[t] = 1;
                w.col(c0) = w.col(c0 + 1);
            }
            const double prev_rho = std::exp(log_rho[t]);
            log_rho[t] = nu_dead[t] ? neg_inf : log_rho[t] + lc - lc_bar;
            for (const auto& p : metrics) {
                if (p.request.kind == MetricKind::rho_diff) {
                    rec.values[p.offset + k - 1] = std::abs(std::exp(log_rho[t]) - prev_rho);
                }
            }
        }
        propagate_columns(fm.signal.matrix(), w, scratch);
        for (std::size_t t = 0; t < count; ++t) {
            if (records[first + t].ok) {
                record_pair(metrics, k, n_max, w.col(static_cast<Eigen::Index>(2 * t)),
                            w.col(static_cast<Eigen::Index>(2 * t + 1)), records[first + t].values);
            }
        }
    }
}

inline void run_pass(const StabilityProblem& pb, const std::vector<MetricRequest>& requests, bool under_bar,
                     const McOptions& opt, SeriesEstimate& out)
{
    if (requests.empty()) {
        return;
    }
    std::size_t width = 0;
    const auto metrics = prepare_metrics(pb, requests, opt.n_max, width);
    std::vector<TrialRecord> records(opt.trials);
    const std::size_t batch = std::max<std::size_t>(1, opt.batch);
    const std::size_t batches = (opt.trials + batch - 1) / batch;
    const std::size_t workers = std::min(resolve_workers(opt.workers), std::max<std::size_t>(1, batches));

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= batches) {
                return;
            }
            try {
                const std::size_t first = b * batch;
                run_batch(pb, metrics, width, under_bar, opt, first, std::min(batch, opt.trials - first), records);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = batches;
                return;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) {
            pool.emplace_back(work);
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    for (const auto& r : records) {
        if (!r.ok) {
            const bool seen = std::any_of(out.failures.begin(), out.failures.end(),
                                          [&](const TrialFailure& f) { return f.trial == r.failure.trial; });
            if (!seen) {
                out.failures.push_back(r.failure);
            }
        }
    }
    for (const auto& p : metrics) {
        std::vector<std::size_t> ns(p.count);
        for (std::size_t j = 0; j < p.count; ++j) {
            ns[j] = j + p.request.first_n();
        }
        std::vector<std::vector<double>> rows(records.size());
        for (std::size_t t = 0; t < records.size(); ++t) {
            if (records[t].ok) {
                rows[t].assign(records[t].values.begin() + static_cast<std::ptrdiff_t>(p.offset),
                               records[t].values.begin() + static_cast<std::ptrdiff_t>(p.offset + p.count));
            }
        }
        out.series.push_back(aggregate_series(p.request.kind, p.request.label(), std::move(ns), rows));
        if (opt.keep_trial_values) {
            out.trial_values.push_back(std::move(rows));
        }
    }
}

} // namespace detail

/// Monte-Carlo estimate of every requested metric. Paths for rho-diff are
/// drawn under the wrong prior, all others under the true prior. Series come
/// back in request order within each of the two groups (true-prior first).
inline SeriesEstimate estimate_series(const StabilityProblem& pb, const std::vector<MetricRequest>& requests,
                                      const McOptions& opt)
{
    if (opt.trials < 1 || opt.n_max < 1) {
        fail(ErrorKind::invalid_argument, "need trials >= 1 and n_max >= 1");
    }
    std::vector<MetricRequest> under_p;
    std::vector<MetricRequest> under_bar;
    for (const auto& r : requests) {
        (r.under_wrong_prior() ? under_bar : under_p).push_back(r);
    }
    SeriesEstimate out;
    out.trials_requested = opt.trials;
    detail::run_pass(pb, under_p, false, opt, out);
    detail::run_pass(pb, under_bar, true, opt, out);
    std::sort(out.failures.begin(), out.failures.end(),
              [](const TrialFailure& a, const TrialFailure& b) { return a.trial < b.trial; });
    return out;
}

/// Exact expectations by summing over every observation sequence of length
/// n_max (finite alphabet only).
inline SeriesEstimate exact_series(const StabilityProblem& pb, const std::vector<MetricRequest>& requests,
                                   std::size_t n_max)
{
    if (n_max < 1) {
        fail(ErrorKind::invalid_argument, "need n_max >= 1");
    }
    if (!pb.filter_model.channel.is_finite_alphabet()) {
        fail(ErrorKind::invalid_argument, "exact series need a finite observation alphabet");
    }
    const std::size_t leaves = observation_tree_leaves(pb.filter_model.channel.letters().size(), n_max);
    std::size_t width = 0;
    const auto metrics = detail::prepare_metrics(pb, requests, n_max, width);
    std::vector<detail::CompensatedSum> sums(width);
    std::vector<double> scratch(width, 0.0);

    enumerate_observation_tree(pb.filter_model, pb.nu, pb.nu_bar, n_max, [&](const TreeNode& node) {
        const std::size_t n = node.depth;
        if (node.alive()) {
            const double p = std::exp(node.log_p);
            std::fill(scratch.begin(), scratch.end(), 0.0);
            detail::record_pair(metrics, n, n_max, *node.pi, *node.pi_bar, scratch);
            for (const auto& m : metrics) {
                if (m.request.kind == MetricKind::rho_diff) {
                    continue;
                }
                const std::size_t j = m.offset + n;
                const bool in_range = m.request.kind == MetricKind::predictor_g ? n + 1 <= n_max : true;
                if (in_range) {
                    sums[j].add(p * scratch[j]);
                }
            }
        }
        if (n >= 1) {
            const double p_bar = std::exp(node.log_p_bar);
            const double rho = node.alive() ? std::exp(node.log_rho()) : 0.0;
            const double parent = node.parent_log_p > -std::numeric_limits<double>::infinity()
                                      ? std::exp(node.parent_log_rho())
                                      : 0.0;
            for (const auto& m : metrics) {
                if (m.request.kind == MetricKind::rho_diff) {
                    sums[m.offset + n - 1].add(p_bar * std::abs(rho - parent));
                }
            }
        }
    });

    SeriesEstimate out;
    out.exact = true;
    out.trials_requested = leaves;
    for (const auto& m : metrics) {
        StabilitySeries s;
        s.kind = m.request.kind;
        s.label = m.request.label();
        s.trials = leaves;
        for (std::size_t j = 0; j < m.count; ++j) {
            s.n_values.push_back(j + m.request.first_n());
            s.metric.push_back(sums[m.offset + j].value());
            s.std_err.push_back(0.0);
        }
        out.series.push_back(std::move(s));
    }
    return out;
}

inline SeriesEstimate weak_stability_series(const StabilityProblem& pb, const ScalarFunction& f, const McOptions& opt)
{
    return estimate_series(pb, {MetricRequest::weak(f)}, opt);
}

inline SeriesEstimate tv_stability_series(const StabilityProblem& pb, const McOptions& opt)
{
    return estimate_series(pb, {MetricRequest::total_variation()}, opt);
}

inline SeriesEstimate predictor_stability_series(const StabilityProblem& pb, const ScalarFunction& g,
                                                 const McOptions& opt)
{
    return estimate_series(pb, {MetricRequest::predictor(g)}, opt);
}

enum class SeriesMethod { monte_carlo, enumeration };

/// E_bar |rho_n - rho_{n-1}|.
inline SeriesEstimate martingale_diff_series(const StabilityProblem& pb, SeriesMethod method, const McOptions& opt)
{
    if (method == SeriesMethod::enumeration) {
        return exact_series(pb, {MetricRequest::rho()}, opt.n_max);
    }
    return estimate_series(pb, {MetricRequest::rho()}, opt);
}

inline constexpr double char_zero_threshold = 1e-10;

/// Requests for E|pi_n(e^{itx}) - pi_bar_n(e^{itx})| at each t, after checking
/// the model is Y = X + xi and the noise has no characteristic zero there.
inline std::vector<MetricRequest> char_requests(const StabilityProblem& pb, const std::vector<double>& t_values)
{
    const auto* add = std::get_if<AdditiveChannel>(&pb.filter_model.channel.shape());
    const bool linear = add && add->h.family() == ScalarFunction::Family::polynomial &&
                        add->h.params().size() >= 2 && add->h(0.0) == 0.0 && add->h(1.0) == 1.0 &&
                        add->h(2.0) == 2.0;
    if (!linear) {
        fail(ErrorKind::invalid_argument, "characteristic-function series need Y_n = X_{n-1} + xi_n");
    }
    std::vector<MetricRequest> reqs;
    for (double t : t_values) {
        const double mod = std::abs(characteristic(add->noise, t));
        if (mod < char_zero_threshold) {
            fail(ErrorKind::char_zero, "|E exp(i t xi)| = " + format_double(mod) + " at t = " + format_double(t));
        }
        reqs.push_back(MetricRequest::characteristic(t));
    }
    return reqs;
}

inline SeriesEstimate char_func_series(const StabilityProblem& pb, const std::vector<double>& t_values,
                                       const McOptions& opt)
{
    return estimate_series(pb, char_requests(pb, t_values), opt);
}

struct ChainCheck {
    std::vector<double> excess;  // predictor - sup|g| * rho-diff, per n
    double worst = -std::numeric_limits<double>::infinity();
    bool holds = true;
};

/// E|eta_n - eta_bar_n| <= sup|g| * E_bar|rho_n - rho_{n-1}| term by term.
inline ChainCheck check_chain_bound(const StabilitySeries& predictor_series, const StabilitySeries& rho_series,
                                    double sup_g, double tol = 1e-12)
{
    ChainCheck c;
    for (std::size_t i = 0; i < predictor_series.n_values.size(); ++i) {
        const std::size_t n = predictor_series.n_values[i];
        const double e = predictor_series.metric[i] - sup_g * rho_series.at(n);
        c.excess.push_back(e);
        c.worst = std::max(c.worst, e);
        if (e > tol) {
            c.holds = false;
        }
    }
    return c;
}

struct RateBound {
    double slope = 0.0;
    double bound = 0.0;
    bool satisfied = false;
    bool degenerate = false;
    std::size_t fit_from = 0;
    std::size_t fit_to = 0;
};

/// Least-squares slope of log(metric) against n over the last half of the
/// series, compared with rate_star + slack.
inline RateBound rate_bound(const StabilitySeries& series, const MixingReport& report, double slack = 0.1)
{
    const std::size_t len = series.n_values.size();
    if (len < 4) {
        fail(ErrorKind::invalid_argument, "rate fit needs at least 4 points");
    }
    RateBound r;
    r.bound = report.rate_star + slack;
    const std::size_t start = len / 2;
    r.fit_from = series.n_values[start];
    r.fit_to = series.n_values[len - 1];
    const auto m = static_cast<Eigen::Index>(len - start);
    Eigen::MatrixXd x(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v = series.metric[start + static_cast<std::size_t>(i)];
        if (!(v > 0.0)) {
            r.degenerate = true;
            r.satisfied = true;
            r.slope = -std::numeric_limits<double>::infinity();
            return r;
        }
        x(i, 0) = 1.0;
        x(i, 1) = static_cast<double>(series.n_values[start + static_cast<std::size_t>(i)]);
        y[i] = std::log(v);
    }
    const Eigen::VectorXd beta = x.completeOrthogonalDecomposition().solve(y);
    r.slope = beta[1];
    r.satisfied = r.slope <= r.bound;
    return r;
}

} // namespace filterstab
