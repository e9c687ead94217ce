#pragma once

// The five fixture experiments behind the acceptance checks. Each is written
// as config JSON and goes through the same parser as user configs.

#include "filterstab/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace filterstab {

namespace detail {

inline Json prop4_model(const Matrix& kernel, double mean2, bool declare_b)
{
    Json m{{"family", "finite-hmm"},
           {"matrix", kernel},
           {"atoms", {1.0, 2.0}},
           {"observation_laws",
            {{{"family", "normal"}, {"mean", 0.0}, {"std", 1.0}}, {{"family", "normal"}, {"mean", mean2}, {"std", 1.0}}}}};
    if (declare_b) {
        m["moment_matrix"] = Matrix{{0.0, 1.0}, {1.0, 2.0}};
    }
    return m;
}

inline Json finite_prior(double w1, double w2)
{
    return {{"family", "finite"}, {"weights", {w1, w2}}};
}

inline Json poly(std::vector<double> c)
{
    return {{"family", "polynomial"}, {"coefficients", std::move(c)}};
}

inline std::vector<Json> canned_json()
{
    const Matrix mixing{{0.7, 0.3}, {0.3, 0.7}};
    const Matrix cycle{{0.0, 1.0}, {1.0, 0.0}};
    std::vector<Json> out;

    out.push_back({{"schema_version", 1},
                   {"name", "hmm-prop4"},
                   {"model", prop4_model(mixing, 1.0, true)},
                   {"true_prior", finite_prior(0.5, 0.5)},
                   {"filter_prior", finite_prior(0.99, 0.01)},
                   {"f", {poly({0.0, 1.0})}},
                   {"g", {poly({0.0, 1.0}), poly({0.0, 0.0, 1.0})}},
                   {"metrics", {"tv", "weak-f", "predictor-g"}},
                   {"n_max", 200},
                   {"trials", 1000},
                   {"seed", 20240401},
                   {"output_dir", "out/hmm-prop4"}});

    // Identical observation laws and a deterministic 2-cycle: nothing to learn, nothing forgotten.
    out.push_back({{"schema_version", 1},
                   {"name", "hmm-prop4-negative"},
                   {"model", prop4_model(cycle, 0.0, false)},
                   {"true_prior", finite_prior(0.5, 0.5)},
                   {"filter_prior", finite_prior(0.99, 0.01)},
                   {"metrics", {"tv"}},
                   {"n_max", 200},
                   {"trials", 1000},
                   {"seed", 20240402},
                   {"output_dir", "out/hmm-prop4-negative"}});

    out.push_back({{"schema_version", 1},
                   {"name", "sg-volatility"},
                   {"model", {{"family", "mult-noise"}, {"a", 0.8}, {"b", 0.5}, {"rho", 1.0}}},
                   {"true_prior", {{"family", "sg"}, {"sigma", 0.7}, {"alpha", {0.5, 0.5}}, {"mean", 0.0}}},
                   {"filter_prior", {{"family", "normal"}, {"mean", 0.0}, {"std", 1.0}}},
                   {"f", {{{"family", "abs"}, {"scale", 1.0}}}},
                   {"g", {{{"family", "abs"}, {"scale", 1.0 / std::sqrt(std::numbers::pi)}}}},
                   {"metrics", {"weak-f", "predictor-g"}},
                   {"grid", {{"lo", -6.0}, {"hi", 6.0}, {"cells", 2048}}},
                   {"n_max", 100},
                   {"trials", 500},
                   {"seed", 20240403},
                   {"output_dir", "out/sg-volatility"}});

    out.push_back({{"schema_version", 1},
                   {"name", "linear-prop5"},
                   {"model",
                    {{"family", "additive"},
                     {"a", 0.8},
                     {"b", 0.5},
                     {"h", poly({0.0, 1.0})},
                     {"noise", {{"family", "normal"}, {"mean", 0.0}, {"std", 1.0}}}}},
                   {"true_prior", {{"family", "normal"}, {"mean", 1.0}, {"std", 0.5}}},
                   {"filter_prior", {{"family", "normal"}, {"mean", 0.0}, {"std", 1.0}}},
                   {"f", {poly({0.0, 0.0, 1.0})}},
                   {"t_values", {0.0, 0.5, 1.0, 2.0}},
                   {"metrics", {"weak-f", "char-t"}},
                   {"grid", {{"lo", -7.0}, {"hi", 7.0}, {"cells", 2048}}},
                   {"n_max", 100},
                   {"trials", 500},
                   {"seed", 20240404},
                   {"output_dir", "out/linear-prop5"}});

    // Short horizon: the tail fit needs TV still above rounding level.
    out.push_back({{"schema_version", 1},
                   {"name", "mixing-rate"},
                   {"model", prop4_model(mixing, 1.0, false)},
                   {"true_prior", finite_prior(0.5, 0.5)},
                   {"filter_prior", finite_prior(0.99, 0.01)},
                   {"metrics", {"tv"}},
                   {"n_max", 30},
                   {"trials", 1000},
                   {"seed", 20240405},
                   {"rate_slack", 0.1},
                   {"output_dir", "out/mixing-rate"}});
    return out;
}

} // namespace detail

inline std::vector<ExperimentConfig> canned_experiments()
{
    std::vector<ExperimentConfig> out;
    for (const auto& j : detail::canned_json()) {
        out.push_back(parse_config(j));
    }
    return out;
}

inline ExperimentConfig canned_experiment(std::string_view name)
{
    for (auto& c : canned_experiments()) {
        if (c.name == name) {
            return c;
        }
    }
    fail(ErrorKind::config_invalid, "no canned experiment named '" + std::string(name) + "'");
}

} // namespace filterstab
