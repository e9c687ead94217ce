#pragma once

// Runs one ExperimentConfig end to end: builds the stability problem,
// estimates every requested series, writes one CSV per metric kind and then
// the JSON manifest that describes them.

#include "filterstab/conditions.hpp"
#include "filterstab/config.hpp"
#include "filterstab/error.hpp"
#include "filterstab/format.hpp"
#include "filterstab/io.hpp"
#include "filterstab/mixing.hpp"
#include "filterstab/moments.hpp"
#include "filterstab/series.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace filterstab {

inline constexpr std::string_view artifact_version = "filterstab 1.0.0";
inline constexpr std::string_view manifest_file_name = "manifest.json";
inline const std::vector<std::string> series_csv_columns{"n",           "metric",   "std_err",   "trials",
                                                         "metric_kind", "model_id", "f_or_g_id", "seed"};

enum class RunStatus { ok, failed, rejected };

constexpr std::string_view to_string(RunStatus s) noexcept
{
    switch (s) {
    case RunStatus::ok: return "OK";
    case RunStatus::failed: return "FAILED";
    case RunStatus::rejected: return "REJECTED";
    }
    return "?";
}

struct OutputFile {
    MetricKind kind = MetricKind::tv;
    std::string file; // relative to the output directory
    std::size_t rows = 0;
    std::string sha256;
};

struct RunOptions {
    std::optional<std::filesystem::path> output_dir; // overrides the config
    std::size_t workers = 0;
    std::ostream* log = nullptr;
};

struct RunResult {
    RunStatus status = RunStatus::ok;
    std::string rejection;
    std::filesystem::path output_dir;
    std::filesystem::path manifest_path;
    Json manifest;
    std::optional<SeriesEstimate> estimate;
    std::optional<MixingReport> mixing;
    std::optional<RateBound> rate;
    std::optional<MomentMatrix> moments;
    std::vector<std::pair<std::string, ConditionReport>> conditions;
    std::vector<OutputFile> outputs;
    double seconds = 0.0;
};

inline StabilityProblem build_problem(const ExperimentConfig& cfg)
{
    HmmModel model = build_model(cfg);
    if (cfg.continuous_state()) {
        return StabilityProblem::gridded(model, *cfg.grid, cfg.true_prior.continuous, cfg.filter_prior.continuous);
    }
    const auto& atoms = model.states->points();
    auto nu = Distribution::finite(atoms, cfg.true_prior.weights);
    auto nu_bar = Distribution::finite(atoms, cfg.filter_prior.weights);
    return StabilityProblem::finite(std::move(model), std::move(nu), std::move(nu_bar));
}

inline std::vector<MetricRequest> build_requests(const ExperimentConfig& cfg, const StabilityProblem& pb)
{
    std::vector<MetricRequest> reqs;
    for (auto kind : cfg.metrics) {
        switch (kind) {
        case MetricKind::weak_f:
            for (const auto& f : cfg.f) {
                reqs.push_back(MetricRequest::weak(f));
            }
            break;
        case MetricKind::predictor_g:
            for (const auto& g : cfg.g) {
                reqs.push_back(MetricRequest::predictor(g));
            }
            break;
        case MetricKind::tv: reqs.push_back(MetricRequest::total_variation()); break;
        case MetricKind::rho_diff: reqs.push_back(MetricRequest::rho()); break;
        case MetricKind::char_t: {
            auto c = char_requests(pb, cfg.t_values);
            reqs.insert(reqs.end(), c.begin(), c.end());
            break;
        }
        }
    }
    return reqs;
}

inline std::string series_csv_name(MetricKind kind)
{
    return std::string(to_string(kind)) + ".csv";
}

/// Rows of every series of one kind, in estimate order.
inline CsvTable series_table(const SeriesEstimate& est, MetricKind kind, const std::string& model_id,
                             std::uint64_t seed)
{
    CsvTable t(series_csv_columns);
    const bool has_fn = kind == MetricKind::weak_f || kind == MetricKind::predictor_g || kind == MetricKind::char_t;
    for (const auto& s : est.series) {
        if (s.kind != kind) {
            continue;
        }
        for (std::size_t i = 0; i < s.n_values.size(); ++i) {
            t.add_row({std::to_string(s.n_values[i]), format_double(s.metric[i]), format_double(s.std_err[i]),
                       std::to_string(s.trials), std::string(to_string(kind)), model_id, has_fn ? s.label : "",
                       std::to_string(seed)});
        }
    }
    return t;
}

namespace detail {

inline Json optional_number(const std::optional<double>& v)
{
    return v ? Json(*v) : Json(nullptr);
}

// JSON has no infinities; they are written as strings.
inline Json number_or_text(double v)
{
    return std::isfinite(v) ? Json(v) : Json(format_double(v));
}

inline Json to_json(const MixingReport& m)
{
    return {{"lambda_star", m.lambda_star},
            {"lambda_sup", m.lambda_sup},
            {"lambda_circ", optional_number(m.lambda_circ)},
            {"rate_star", m.rate_star},
            {"rate_circ", optional_number(m.rate_circ)},
            {"mixing", m.mixing()},
            {"note", m.note}};
}

inline Json to_json(const MomentMatrix& b)
{
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < b.entries.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < b.entries.cols(); ++j) {
            row.push_back(b.entries(i, j));
        }
        rows.push_back(std::move(row));
    }
    return {{"entries", rows},
            {"condition_number", number_or_text(b.condition_number)},
            {"determinant", b.determinant},
            {"nonsingular", b.nonsingular()}};
}

inline Json to_json(const RateBound& r)
{
    return {{"slope", number_or_text(r.slope)},
            {"bound", r.bound},
            {"satisfied", r.satisfied},
            {"degenerate", r.degenerate},
            {"fit_from", r.fit_from},
            {"fit_to", r.fit_to}};
}

inline Json to_json(const ConditionReport& c)
{
    Json j{{"admissible", c.admissible},
           {"g_bounded", c.g_bounded},
           {"g_bound", optional_number(c.g_bound)},
           {"ratio_bounded", c.ratio_bounded},
           {"ratio_sup", optional_number(c.ratio_sup)},
           {"horizon", c.horizon}};
    j["ratio_p_norm"] = c.ratio_p_norm ? Json{{"p", c.ratio_p_norm->first}, {"value", c.ratio_p_norm->second}}
                                       : Json(nullptr);
    j["ui_surrogate"] = c.g_ui_moment ? Json{{"q", c.g_ui_moment->first},
                                             {"sup_moment", c.g_ui_moment->second},
                                             {"method", c.ui_method},
                                             {"estimate_only", c.ui_estimate_only}}
                                      : Json(nullptr);
    return j;
}

} // namespace detail

inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {})
{
    const auto start = std::chrono::steady_clock::now();
    auto say = [&opt](const std::string& s) {
        if (opt.log) {
            *opt.log << s << '\n';
        }
    };

    RunResult res;
    res.output_dir = opt.output_dir ? *opt.output_dir : std::filesystem::path(cfg.output_dir);
    res.manifest_path = res.output_dir / manifest_file_name;

    Json manifest;
    manifest["artifact_version"] = artifact_version;
    manifest["config"] = to_json(cfg);
    manifest["rng"] = {{"algorithm", "mt19937_64"},
                       {"seed_split", "splitmix64(splitmix64(master) ^ trial)"},
                       {"master_seed", cfg.seed}};

    std::optional<StabilityProblem> pb;
    try {
        pb = build_problem(cfg);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::not_absolutely_continuous) {
            throw;
        }
        res.status = RunStatus::rejected;
        res.rejection = e.what();
    }
    manifest["admissibility"] = {{"admissible", pb.has_value()}, {"witness", res.rejection}};

    if (pb) {
        const auto requests = build_requests(cfg, *pb);
        say(cfg.name + ": " + std::to_string(requests.size()) + " series, n_max " + std::to_string(cfg.n_max) +
            (cfg.method == Method::enumeration ? ", exact enumeration" : ", " + std::to_string(cfg.trials) + " trials"));
        if (cfg.method == Method::enumeration) {
            res.estimate = exact_series(*pb, requests, cfg.n_max);
        } else {
            McOptions mc;
            mc.trials = cfg.trials;
            mc.n_max = cfg.n_max;
            mc.seed = cfg.seed;
            mc.workers = opt.workers;
            res.estimate = estimate_series(*pb, requests, mc);
        }
        const auto& est = *res.estimate;
        res.status = est.failed() ? RunStatus::failed : RunStatus::ok;

        for (auto kind : cfg.metrics) {
            const auto table = series_table(est, kind, pb->id(), cfg.seed);
            const auto file = series_csv_name(kind);
            const auto text = table.str();
            write_file_atomic(res.output_dir / file, text);
            res.outputs.push_back({kind, file, table.rows(), sha256_hex(text)});
            say("  wrote " + (res.output_dir / file).string() + " (" + std::to_string(table.rows()) + " rows)");
        }

        if (!cfg.continuous_state()) {
            res.mixing = mixing_constants(pb->filter_model.signal);
            if (cfg.wants(MetricKind::tv) && res.mixing->mixing()) {
                const auto& tv = est.get(MetricKind::tv);
                if (tv.n_values.size() >= 4) {
                    res.rate = rate_bound(tv, *res.mixing, cfg.rate_slack);
                }
            }
        }
        res.moments = config_moment_matrix(cfg);

        ConditionOptions co;
        co.horizon = cfg.n_max;
        co.seed = cfg.seed;
        for (const auto& g : cfg.g) {
            res.conditions.emplace_back(g.id(), check_conditions(*pb, g, co));
        }
    }

    Json outputs = Json::array();
    for (const auto& o : res.outputs) {
        outputs.push_back({{"metric_kind", to_string(o.kind)}, {"path", o.file}, {"rows", o.rows}, {"sha256", o.sha256}});
    }
    manifest["outputs"] = outputs;
    Json series = Json::array();
    Json failures = Json::array();
    if (res.estimate) {
        for (const auto& s : res.estimate->series) {
            series.push_back({{"metric_kind", to_string(s.kind)},
                              {"label", s.label},
                              {"trials", s.trials},
                              {"first", {{"n", s.n_values.front()}, {"metric", s.metric.front()}}},
                              {"last", {{"n", s.n_values.back()}, {"metric", s.metric.back()}}}});
        }
        for (const auto& f : res.estimate->failures) {
            failures.push_back(
                {{"trial", f.trial}, {"step", f.step}, {"kind", to_string(f.kind)}, {"reason", f.reason}});
        }
    }
    manifest["series"] = series;
    manifest["trials"] = {{"requested", res.estimate ? res.estimate->trials_requested : 0},
                          {"exact", res.estimate && res.estimate->exact},
                          {"failed", failures.size()},
                          {"failure_fraction", res.estimate ? res.estimate->failure_fraction() : 0.0},
                          {"max_failure_fraction", max_failure_fraction},
                          {"failures", failures}};
    manifest["mixing"] = res.mixing ? detail::to_json(*res.mixing) : Json(nullptr);
    manifest["rate_bound"] = res.rate ? detail::to_json(*res.rate) : Json(nullptr);
    manifest["moment_matrix"] = res.moments ? detail::to_json(*res.moments) : Json(nullptr);
    Json conditions = Json::array();
    for (const auto& [g, c] : res.conditions) {
        auto j = detail::to_json(c);
        j["g"] = g;
        conditions.push_back(std::move(j));
    }
    manifest["conditions"] = conditions;
    manifest["status"] = to_string(res.status);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["wall_clock_seconds"] = res.seconds;

    write_file_atomic(res.manifest_path, manifest.dump(2) + "\n");
    res.manifest = std::move(manifest);
    say("  " + cfg.name + ": " + std::string(to_string(res.status)) + " in " + format_short(res.seconds, 3) + " s");
    return res;
}

/// Problems found when checking a manifest against the files beside it;
/// empty means every listed output exists with the declared rows and hash.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir)
{
    std::vector<std::string> problems;
    const Json m = Json::parse(read_file(dir / manifest_file_name));
    for (const auto& o : m.at("outputs")) {
        const auto path = dir / o.at("path").get<std::string>();
        if (!std::filesystem::exists(path)) {
            problems.push_back(path.string() + " is missing");
            continue;
        }
        const auto text = read_file(path);
        const auto records = parse_csv(text);
        const std::size_t rows = records.empty() ? 0 : records.size() - 1;
        if (rows != o.at("rows").get<std::size_t>()) {
            problems.push_back(path.string() + " has " + std::to_string(rows) + " rows, manifest says " +
                               std::to_string(o.at("rows").get<std::size_t>()));
        }
        if (sha256_hex(text) != o.at("sha256").get<std::string>()) {
            problems.push_back(path.string() + " does not match its SHA-256");
        }
    }
    return problems;
}

} // namespace filterstab
