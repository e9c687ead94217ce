#pragma once

// The `filterstab` command line. Kept in the library so tests can drive it
// in-process with captured streams.

#include "filterstab/acceptance.hpp"
#include "filterstab/canned.hpp"
#include "filterstab/conditions.hpp"
#include "filterstab/config.hpp"
#include "filterstab/error.hpp"
#include "filterstab/experiment.hpp"
#include "filterstab/filter.hpp"
#include "filterstab/format.hpp"
#include "filterstab/io.hpp"
#include "filterstab/mixing.hpp"
#include "filterstab/moments.hpp"
#include "filterstab/simulate.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace filterstab {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_runtime = 2;

namespace detail {

inline std::vector<double> parse_number_list(std::string_view text, const std::string& flag)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find(',', pos), text.size());
        auto item = text.substr(pos, end - pos);
        while (!item.empty() && item.front() == ' ') {
            item.remove_prefix(1);
        }
        while (!item.empty() && item.back() == ' ') {
            item.remove_suffix(1);
        }
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            config_error(flag, "'" + std::string(item) + "' is not a number");
        }
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

/// "a,b;c,d" -> rows.
inline Matrix parse_matrix_text(std::string_view text, const std::string& flag)
{
    Matrix rows;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find(';', pos), text.size());
        rows.push_back(parse_number_list(text.substr(pos, end - pos), flag));
        if (rows.back().size() != rows.front().size()) {
            config_error(flag, "rows differ in length");
        }
        pos = end + 1;
    }
    return rows;
}

struct CliOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> n_max;
    std::optional<std::string> out;
    std::size_t workers = 0;
    bool dry_run = false;
    bool verbose = false;
    std::string matrix;
    std::string gamma;
    std::string f;
};

inline ExperimentConfig load_with_overrides(const CliOptions& o)
{
    if (o.config.empty()) {
        config_error("--config", "this subcommand needs a config file");
    }
    auto cfg = load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.trials) {
        cfg.trials = *o.trials;
    }
    if (o.n_max) {
        cfg.n_max = *o.n_max;
    }
    if (o.out) {
        cfg.output_dir = *o.out;
    }
    return parse_config(to_json(cfg)); // re-validate after overrides
}

inline std::string join(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + format_short(v[i]);
    }
    return s;
}

inline int cmd_simulate(const CliOptions& o, std::ostream& out)
{
    const auto cfg = load_with_overrides(o);
    if (o.dry_run) {
        out << cfg.name << ": config valid\n";
        return exit_ok;
    }
    const auto path = simulate_path(build_model(cfg), cfg.n_max, cfg.seed);
    CsvTable t({"n", "x", "y"});
    for (std::size_t n = 0; n < path.x.size(); ++n) {
        t.add_row({std::to_string(n), format_double(path.x[n]), format_double(path.y[n])});
    }
    const auto file = std::filesystem::path(cfg.output_dir) / "path.csv";
    write_file_atomic(file, t.str());
    out << "simulated " << cfg.n_max << " steps of " << cfg.name << " (seed " << cfg.seed << ") -> " << file.string()
        << '\n';
    return exit_ok;
}

inline int cmd_filter(const CliOptions& o, std::ostream& out)
{
    const auto cfg = load_with_overrides(o);
    if (o.dry_run) {
        out << cfg.name << ": config valid\n";
        return exit_ok;
    }
    const auto pb = build_problem(cfg);
    const auto path = simulate_path(pb.truth_model, cfg.n_max, cfg.seed);
    const auto traj = run_filter(pb.filter_model, pb.nu, path);
    const auto traj_bar = run_filter(pb.filter_model, pb.nu_bar, path);
    CsvTable t({"n", "y", "mean", "mean_bar", "tv"});
    const auto identity = [](double x) { return x; };
    for (std::size_t n = 0; n < traj.posteriors.size(); ++n) {
        t.add_row({std::to_string(n), format_double(path.y[n]), format_double(expect(traj.posteriors[n], identity)),
                   format_double(expect(traj_bar.posteriors[n], identity)),
                   format_double(l1_tv(traj.posteriors[n], traj_bar.posteriors[n]))});
    }
    const auto file = std::filesystem::path(cfg.output_dir) / "filter.csv";
    write_file_atomic(file, t.str());
    out << "filtered " << cfg.n_max << " steps of " << cfg.name << " under both priors; final tv "
        << format_short(l1_tv(traj.posteriors.back(), traj_bar.posteriors.back())) << " -> " << file.string() << '\n';
    return exit_ok;
}

inline int cmd_stability(const CliOptions& o, std::ostream& out, std::ostream& err)
{
    const auto cfg = load_with_overrides(o);
    if (o.dry_run) {
        out << cfg.name << ": config valid\n";
        return exit_ok;
    }
    RunOptions ro;
    ro.workers = o.workers;
    ro.log = o.verbose ? &err : nullptr;
    const auto res = run_experiment(cfg, ro);
    out << cfg.name << ": " << to_string(res.status) << '\n';
    if (res.status == RunStatus::rejected) {
        err << "run rejected: " << res.rejection << '\n';
        return exit_config;
    }
    for (const auto& s : res.estimate->series) {
        out << "  " << to_string(s.kind) << " [" << s.label << "] n=" << s.n_values.front() << ": "
            << format_short(s.metric.front()) << "  n=" << s.n_values.back() << ": " << format_short(s.metric.back())
            << "  (" << s.trials << " trials)\n";
    }
    if (res.rate) {
        if (res.rate->degenerate) {
            out << "  tail slope: metric hit 0 in the fit window (satisfied)\n";
        } else {
            out << "  tail slope " << format_short(res.rate->slope) << " vs bound " << format_short(res.rate->bound)
                << (res.rate->satisfied ? " (satisfied)" : " (not satisfied)") << '\n';
        }
    }
    out << "  manifest " << res.manifest_path.string() << '\n';
    if (res.status == RunStatus::failed) {
        err << "run failed: " << res.estimate->failures.size() << " of " << res.estimate->trials_requested
            << " trials failed\n";
        return exit_runtime;
    }
    return exit_ok;
}

inline int cmd_mixing(const CliOptions& o, std::ostream& out)
{
    Eigen::MatrixXd m;
    if (!o.matrix.empty()) {
        m = to_eigen(parse_matrix_text(o.matrix, "--matrix"));
    } else {
        const auto cfg = load_with_overrides(o);
        if (cfg.continuous_state()) {
            config_error("model.family", "mixing constants need a finite kernel");
        }
        m = build_model(cfg).signal.matrix();
    }
    std::optional<SignalKernel> k;
    try {
        k = SignalKernel::finite(m);
    } catch (const Error& e) {
        config_error(o.matrix.empty() ? "model.matrix" : "--matrix", e.what());
    }
    const auto r = mixing_constants(*k);
    out << "lambda_*=" << format_short(r.lambda_star) << " lambda^*=" << format_short(r.lambda_sup)
        << " lambda_circ=" << (r.lambda_circ ? format_short(*r.lambda_circ) : "n/a")
        << " rate=" << format_short(r.rate_star);
    if (r.rate_circ) {
        out << " rate_circ=" << format_short(*r.rate_circ);
    }
    out << (r.mixing() ? "" : " (not mixing)") << '\n';
    if (!r.note.empty()) {
        out << "note: " << r.note << '\n';
    }
    return exit_ok;
}

inline int cmd_conditions(const CliOptions& o, std::ostream& out)
{
    const auto cfg = load_with_overrides(o);
    if (cfg.g.empty()) {
        config_error("g", "conditions need at least one function g");
    }
    if (o.dry_run) {
        out << cfg.name << ": config valid\n";
        return exit_ok;
    }
    std::optional<StabilityProblem> pb;
    try {
        pb = build_problem(cfg);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::not_absolutely_continuous) {
            throw;
        }
        out << cfg.name << ": inadmissible\n";
        return exit_config;
    }
    ConditionOptions co;
    co.horizon = cfg.n_max;
    co.seed = cfg.seed;
    for (const auto& g : cfg.g) {
        const auto c = check_conditions(*pb, g, co);
        out << "g = " << g.id() << '\n';
        out << "  (i)   g bounded: " << (c.g_bounded ? "yes, sup " + format_short(*c.g_bound) : "no") << '\n';
        out << "  (ii)  ratio bounded: "
            << (c.ratio_bounded ? "yes, sup " + format_short(*c.ratio_sup) : "no") << '\n';
        if (c.ratio_p_norm) {
            out << "  (iii) E_bar ratio^" << format_short(c.ratio_p_norm->first) << " = "
                << format_short(c.ratio_p_norm->second) << '\n';
        }
        if (c.g_ui_moment) {
            out << "  UI surrogate sup_{n<=" << c.horizon << "} E_bar|g(Y_n)|^" << format_short(c.g_ui_moment->first)
                << " = " << format_short(c.g_ui_moment->second) << " (" << c.ui_method
                << (c.ui_estimate_only ? ", estimate only" : "") << ")\n";
        }
    }
    return exit_ok;
}

inline int cmd_solve_g(const CliOptions& o, std::ostream& out)
{
    if (o.gamma.empty() || o.f.empty()) {
        config_error(o.gamma.empty() ? "--gamma" : "--f", "solve-g needs --gamma and --f");
    }
    const auto gamma = to_eigen(parse_matrix_text(o.gamma, "--gamma"));
    const auto fv = parse_number_list(o.f, "--f");
    if (static_cast<Eigen::Index>(fv.size()) != gamma.rows()) {
        config_error("--f", "needs one value per row of --gamma");
    }
    const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(fv.data(), static_cast<Eigen::Index>(fv.size()));
    const auto sol = solve_g(gamma, f);
    std::vector<double> g(sol.g.data(), sol.g.data() + sol.g.size());
    // below 1e-12 the residual is rounding in the check itself
    out << "g = (" << join(g) << "), residual " << (sol.residual < 1e-12 ? "0" : format_short(sol.residual))
        << (sol.solvable() ? "" : " (no bounded solution)") << '\n';
    return exit_ok;
}

inline int cmd_reproduce(const CliOptions& o, std::ostream& out, std::ostream& err)
{
    if (o.seed || o.trials || o.n_max || !o.config.empty()) {
        config_error("reproduce", "canned experiments use pinned configs; drop --config/--seed/--trials/--nmax");
    }
    const auto configs = canned_experiments();
    if (o.dry_run) {
        for (const auto& c : configs) {
            out << c.name << ": config valid\n";
        }
        return exit_ok;
    }
    const std::filesystem::path root = o.out.value_or("reproduce");
    const auto run = run_canned(root, o.workers, o.verbose ? &err : nullptr);
    const auto table = evaluate_criteria(run, o.workers);
    bool all = true;
    for (const auto& c : table) {
        out << format_criterion(c) << '\n';
        all = all && c.passed;
    }
    out << (all ? "all criteria pass" : "some criteria fail") << "; outputs under " << root.string() << '\n';
    return all ? exit_ok : exit_runtime;
}

} // namespace detail

/// Runs the command line; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Filter stability experiments: simulation, filtering, stability series and diagnostics.\n"
                 "Precedence: command-line flags > config file > built-in defaults.",
                 "filterstab"};
    app.require_subcommand(1);
    app.fallthrough();

    detail::CliOptions o;
    app.add_option("--config", o.config, "Experiment config (JSON)");
    app.add_option("--seed", o.seed, "Master seed (overrides config)");
    app.add_option("--trials", o.trials, "Monte-Carlo trials (overrides config)")->check(CLI::PositiveNumber);
    app.add_option("--nmax", o.n_max, "Horizon n_max (overrides config)")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "Output directory (overrides config)");
    app.add_option("--workers", o.workers, "Worker threads (default: FILTERSTAB_WORKERS, else all cores)");
    app.add_flag("--dry-run", o.dry_run, "Validate configs without computing");
    app.add_flag("--verbose", o.verbose, "Progress on stderr");

    auto* simulate = app.add_subcommand("simulate", "Simulate one signal/observation path to path.csv");
    auto* filter = app.add_subcommand("filter", "Run both filters on one simulated path, write filter.csv");
    auto* stability = app.add_subcommand("stability", "Run an experiment: series CSVs plus manifest.json");
    auto* mixing = app.add_subcommand("mixing", "Mixing constants of a finite kernel");
    mixing->add_option("--matrix", o.matrix, "Kernel rows, e.g. \"0.7,0.3;0.3,0.7\"");
    auto* conditions = app.add_subcommand("conditions", "Predictor-stability conditions for each g");
    auto* solve = app.add_subcommand("solve-g", "Solve f(x) = sum_y g(y) gamma(x, y) for g");
    solve->add_option("--gamma", o.gamma, "Channel rows, e.g. \"0.8,0.2;0.3,0.7\"");
    solve->add_option("--f", o.f, "Values of f per state, e.g. \"1,0\"");
    auto* reproduce = app.add_subcommand("reproduce", "Run all canned experiments and print the pass table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    }

    try {
        if (simulate->parsed()) {
            return detail::cmd_simulate(o, out);
        }
        if (filter->parsed()) {
            return detail::cmd_filter(o, out);
        }
        if (stability->parsed()) {
            return detail::cmd_stability(o, out, err);
        }
        if (mixing->parsed()) {
            return detail::cmd_mixing(o, out);
        }
        if (conditions->parsed()) {
            return detail::cmd_conditions(o, out);
        }
        if (solve->parsed()) {
            return detail::cmd_solve_g(o, out);
        }
        if (reproduce->parsed()) {
            return detail::cmd_reproduce(o, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::config_invalid ? exit_config : exit_runtime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_config;
}

} // namespace filterstab
