#pragma once

// Experiment configuration: JSON in, validated ExperimentConfig out, and a
// canonical JSON echo for manifests. Unknown fields are errors; every error
// names the offending field path.

#include "filterstab/discretize.hpp"
#include "filterstab/error.hpp"
#include "filterstab/functions.hpp"
#include "filterstab/io.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/model.hpp"
#include "filterstab/moments.hpp"
#include "filterstab/noise.hpp"
#include "filterstab/series.hpp"
#include "filterstab/sg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace filterstab {

using Json = nlohmann::json;

inline constexpr int config_schema_version = 1;
inline constexpr double declared_moment_tolerance = 1e-8;

using Matrix = std::vector<std::vector<double>>;

struct FiniteHmmSpec {
    Matrix matrix;
    std::vector<double> atoms;
    std::vector<ObsLaw> observation_laws;
    std::optional<Matrix> moment_matrix;
};

struct AlphabetHmmSpec {
    Matrix matrix;
    std::vector<double> atoms;
    std::vector<double> letters;
    Matrix emission;
};

struct MultNoiseSpec {
    double a = 0.8;
    double b = 0.5;
    double rho = 1.0;
};

struct AdditiveSpec {
    double a = 0.8;
    double b = 0.5;
    ScalarFunction h = ScalarFunction::monomial(1);
    NoiseLaw noise = NormalLaw{};
};

using ModelSpec = std::variant<FiniteHmmSpec, AlphabetHmmSpec, MultNoiseSpec, AdditiveSpec>;

struct PriorSpec {
    enum class Family { finite, sg, normal };
    Family family = Family::finite;
    std::vector<double> weights;
    ContinuousPrior continuous = ContinuousPrior::gaussian(0.0, 1.0);
};

enum class Method { monte_carlo, enumeration };

struct ExperimentConfig {
    int schema_version = config_schema_version;
    std::string name;
    ModelSpec model;
    PriorSpec true_prior;
    PriorSpec filter_prior;
    std::vector<ScalarFunction> f;
    std::vector<ScalarFunction> g;
    std::vector<double> t_values;
    std::size_t n_max = 100;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::optional<GridSpec> grid;
    std::vector<MetricKind> metrics;
    Method method = Method::monte_carlo;
    std::string output_dir = "out";
    double rate_slack = 0.1;

    bool continuous_state() const
    {
        return std::holds_alternative<MultNoiseSpec>(model) || std::holds_alternative<AdditiveSpec>(model);
    }
    bool wants(MetricKind k) const { return std::find(metrics.begin(), metrics.end(), k) != metrics.end(); }
};

[[noreturn]] inline void config_error(const std::string& path, const std::string& message)
{
    fail(ErrorKind::config_invalid, (path.empty() ? std::string("<root>") : path) + ": " + message);
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key)
{
    return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i)
{
    return base + "[" + std::to_string(i) + "]";
}

/// A JSON object whose keys are consumed one by one; finish() rejects leftovers.
class Fields {
public:
    Fields(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j.is_object()) {
            config_error(path_, "expected an object");
        }
    }

    const std::string& path() const noexcept { return path_; }
    std::string at(const std::string& key) const { return join_path(path_, key); }

    const Json* get(const std::string& key)
    {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const Json& need(const std::string& key)
    {
        const Json* v = get(key);
        if (!v) {
            config_error(at(key), "required field is missing");
        }
        return *v;
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) {
                config_error(at(key), "unknown field");
            }
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline double as_number(const Json& j, const std::string& path)
{
    if (!j.is_number()) {
        config_error(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        config_error(path, "expected a finite number");
    }
    return v;
}

inline double as_positive(const Json& j, const std::string& path)
{
    const double v = as_number(j, path);
    if (!(v > 0.0)) {
        config_error(path, "must be positive");
    }
    return v;
}

inline std::uint64_t as_unsigned(const Json& j, const std::string& path, std::uint64_t min = 0)
{
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        config_error(path, "expected a nonnegative integer");
    }
    const auto v = j.get<std::uint64_t>();
    if (v < min) {
        config_error(path, "must be at least " + std::to_string(min));
    }
    return v;
}

inline std::string as_string(const Json& j, const std::string& path)
{
    if (!j.is_string()) {
        config_error(path, "expected a string");
    }
    return j.get<std::string>();
}

inline std::vector<double> as_numbers(const Json& j, const std::string& path, bool allow_empty = false)
{
    if (!j.is_array()) {
        config_error(path, "expected an array of numbers");
    }
    if (j.empty() && !allow_empty) {
        config_error(path, "must not be empty");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_number(j[i], index_path(path, i)));
    }
    return out;
}

inline Matrix as_matrix(const Json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) {
        config_error(path, "expected a non-empty array of rows");
    }
    Matrix out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_numbers(j[i], index_path(path, i)));
        if (out.back().size() != out.front().size()) {
            config_error(index_path(path, i), "rows differ in length");
        }
    }
    return out;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.front().size()));
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
        }
    }
    return out;
}

inline std::string family_of(Fields& o)
{
    return as_string(o.need("family"), o.at("family"));
}

inline ScalarFunction parse_function(const Json& j, const std::string& path)
{
    Fields o(j, path);
    const std::string fam = family_of(o);
    auto num = [&o](const char* key) { return as_number(o.need(key), o.at(key)); };
    auto build = [&]() -> ScalarFunction {
        if (fam == "polynomial") {
            return ScalarFunction::polynomial(as_numbers(o.need("coefficients"), o.at("coefficients")));
        }
        if (fam == "abs") {
            const Json* s = o.get("scale");
            return ScalarFunction::abs(s ? as_number(*s, o.at("scale")) : 1.0);
        }
        if (fam == "indicator") {
            const double lo = num("lo");
            const double hi = num("hi");
            if (!(lo < hi)) {
                config_error(o.at("hi"), "must exceed lo");
            }
            return ScalarFunction::indicator(lo, hi);
        }
        if (fam == "cos") {
            return ScalarFunction::cosine(num("t"));
        }
        if (fam == "sin") {
            return ScalarFunction::sine(num("t"));
        }
        if (fam == "constant") {
            return ScalarFunction::constant(num("value"));
        }
        config_error(o.at("family"), "unknown function family '" + fam + "'");
    };
    auto fn = build();
    o.finish();
    return fn;
}

inline std::vector<ScalarFunction> parse_functions(const Json* j, const std::string& path)
{
    std::vector<ScalarFunction> out;
    if (!j) {
        return out;
    }
    if (!j->is_array()) {
        config_error(path, "expected an array of functions");
    }
    for (std::size_t i = 0; i < j->size(); ++i) {
        out.push_back(parse_function((*j)[i], index_path(path, i)));
    }
    return out;
}

inline ObsLaw parse_law(const Json& j, const std::string& path)
{
    Fields o(j, path);
    const std::string fam = family_of(o);
    ObsLaw law;
    if (fam == "normal") {
        law = NormalLaw{as_number(o.need("mean"), o.at("mean")), as_positive(o.need("std"), o.at("std"))};
    } else if (fam == "mult-noise") {
        law = MultNoiseLaw{as_positive(o.need("rho"), o.at("rho"))};
    } else if (fam == "finite") {
        FiniteLaw fl{as_numbers(o.need("letters"), o.at("letters")), as_numbers(o.need("probs"), o.at("probs"))};
        if (fl.letters.size() != fl.probs.size()) {
            config_error(o.at("probs"), "needs one probability per letter");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < fl.probs.size(); ++i) {
            if (fl.probs[i] < 0.0) {
                config_error(index_path(o.at("probs"), i), "must be nonnegative");
            }
            total += fl.probs[i];
        }
        if (std::abs(total - 1.0) > finite_mass_tolerance) {
            config_error(o.at("probs"), "must sum to 1");
        }
        law = std::move(fl);
    } else {
        config_error(o.at("family"), "unknown law family '" + fam + "'");
    }
    o.finish();
    return law;
}

inline NoiseLaw parse_noise(const Json& j, const std::string& path)
{
    const ObsLaw law = parse_law(j, path);
    if (const auto* n = std::get_if<NormalLaw>(&law)) {
        return *n;
    }
    if (const auto* m = std::get_if<MultNoiseLaw>(&law)) {
        return *m;
    }
    config_error(join_path(path, "family"), "noise must be a continuous law");
}

inline ModelSpec parse_model(const Json& j, const std::string& path)
{
    Fields o(j, path);
    const std::string fam = family_of(o);
    auto num = [&o](const char* key) { return as_number(o.need(key), o.at(key)); };
    ModelSpec spec;
    if (fam == "finite-hmm") {
        FiniteHmmSpec s;
        s.matrix = as_matrix(o.need("matrix"), o.at("matrix"));
        s.atoms = as_numbers(o.need("atoms"), o.at("atoms"));
        const Json& laws = o.need("observation_laws");
        if (!laws.is_array() || laws.empty()) {
            config_error(o.at("observation_laws"), "expected a non-empty array of laws");
        }
        for (std::size_t i = 0; i < laws.size(); ++i) {
            s.observation_laws.push_back(parse_law(laws[i], index_path(o.at("observation_laws"), i)));
        }
        if (const Json* b = o.get("moment_matrix")) {
            s.moment_matrix = as_matrix(*b, o.at("moment_matrix"));
        }
        spec = std::move(s);
    } else if (fam == "alphabet-hmm") {
        AlphabetHmmSpec s;
        s.matrix = as_matrix(o.need("matrix"), o.at("matrix"));
        s.atoms = as_numbers(o.need("atoms"), o.at("atoms"));
        s.letters = as_numbers(o.need("letters"), o.at("letters"));
        s.emission = as_matrix(o.need("emission"), o.at("emission"));
        spec = std::move(s);
    } else if (fam == "mult-noise") {
        spec = MultNoiseSpec{num("a"), as_positive(o.need("b"), o.at("b")), as_positive(o.need("rho"), o.at("rho"))};
    } else if (fam == "additive") {
        AdditiveSpec s;
        s.a = num("a");
        s.b = as_positive(o.need("b"), o.at("b"));
        s.h = parse_function(o.need("h"), o.at("h"));
        s.noise = parse_noise(o.need("noise"), o.at("noise"));
        spec = std::move(s);
    } else {
        config_error(o.at("family"), "unknown model family '" + fam + "'");
    }
    o.finish();
    return spec;
}

inline PriorSpec parse_prior(const Json& j, const std::string& path)
{
    Fields o(j, path);
    const std::string fam = family_of(o);
    PriorSpec p;
    if (fam == "finite") {
        p.family = PriorSpec::Family::finite;
        p.weights = as_numbers(o.need("weights"), o.at("weights"));
    } else if (fam == "sg") {
        p.family = PriorSpec::Family::sg;
        const double sigma = as_positive(o.need("sigma"), o.at("sigma"));
        auto alpha = as_numbers(o.need("alpha"), o.at("alpha"));
        const Json* m = o.get("mean");
        p.continuous = ContinuousPrior{SgParams{sigma, std::move(alpha)}, m ? as_number(*m, o.at("mean")) : 0.0};
        try {
            validate(p.continuous.shape);
        } catch (const Error& e) {
            config_error(o.at("alpha"), e.what());
        }
    } else if (fam == "normal") {
        p.family = PriorSpec::Family::normal;
        p.continuous = ContinuousPrior::gaussian(as_number(o.need("mean"), o.at("mean")),
                                                 as_positive(o.need("std"), o.at("std")));
    } else {
        config_error(o.at("family"), "unknown prior family '" + fam + "'");
    }
    o.finish();
    return p;
}

inline bool finite_alphabet(const ModelSpec& m)
{
    if (std::holds_alternative<AlphabetHmmSpec>(m)) {
        return true;
    }
    if (const auto* f = std::get_if<FiniteHmmSpec>(&m)) {
        return std::holds_alternative<FiniteLaw>(f->observation_laws.front());
    }
    return false;
}

inline std::size_t atom_count(const ModelSpec& m)
{
    if (const auto* f = std::get_if<FiniteHmmSpec>(&m)) {
        return f->atoms.size();
    }
    if (const auto* a = std::get_if<AlphabetHmmSpec>(&m)) {
        return a->atoms.size();
    }
    return 0;
}

} // namespace detail

/// Builds the model a config describes. For continuous families the initial
/// law is the config's true prior.
inline HmmModel build_model(const ExperimentConfig& cfg)
{
    return std::visit(
        [&cfg](const auto& s) -> HmmModel {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FiniteHmmSpec>) {
                return build_finite_hmm(SignalKernel::finite(detail::to_eigen(s.matrix)), s.atoms, s.observation_laws);
            } else if constexpr (std::is_same_v<S, AlphabetHmmSpec>) {
                return build_alphabet_hmm(SignalKernel::finite(detail::to_eigen(s.matrix)), s.atoms, s.letters,
                                          detail::to_eigen(s.emission));
            } else if constexpr (std::is_same_v<S, MultNoiseSpec>) {
                const auto& prior = cfg.true_prior.continuous;
                auto m = build_mult_noise_model(MultNoiseParams{s.a, s.b, s.rho, prior.shape});
                m.nu = prior;
                return m;
            } else {
                return build_additive_model(SignalKernel::gaussian_ar1(s.a, s.b, true), s.h, s.noise,
                                            cfg.true_prior.continuous);
            }
        },
        cfg.model);
}

/// Moment matrix of a finite HMM with continuous per-state laws, if any.
inline std::optional<MomentMatrix> config_moment_matrix(const ExperimentConfig& cfg)
{
    const auto* f = std::get_if<FiniteHmmSpec>(&cfg.model);
    if (!f || detail::finite_alphabet(cfg.model)) {
        return std::nullopt;
    }
    return moment_matrix(f->observation_laws, f->observation_laws.size());
}

namespace detail {

inline void check_config(const ExperimentConfig& cfg)
{
    std::optional<HmmModel> model;
    try {
        model = build_model(cfg);
    } catch (const Error& e) {
        config_error("model", e.what());
    }

    const std::size_t atoms = atom_count(cfg.model);
    for (const auto& [prior, where] : {std::pair{&cfg.true_prior, "true_prior"}, {&cfg.filter_prior, "filter_prior"}}) {
        const bool finite_prior = prior->family == PriorSpec::Family::finite;
        if (cfg.continuous_state() == finite_prior) {
            config_error(join_path(where, "family"), cfg.continuous_state()
                                                         ? "continuous-state models need an sg or normal prior"
                                                         : "finite-state models need a finite prior");
        }
        if (finite_prior) {
            if (prior->weights.size() != atoms) {
                config_error(join_path(where, "weights"), "needs one weight per atom (" + std::to_string(atoms) + ")");
            }
            try {
                Distribution::finite(model->states->points(), prior->weights);
            } catch (const Error& e) {
                config_error(join_path(where, "weights"), e.what());
            }
        }
    }

    if (cfg.continuous_state()) {
        if (!cfg.grid) {
            config_error("grid", "continuous-state models need a grid");
        }
        try {
            validate(*cfg.grid);
        } catch (const Error& e) {
            config_error("grid", e.what());
        }
        if (std::holds_alternative<MultNoiseSpec>(cfg.model) && cfg.true_prior.continuous.mean != 0.0) {
            config_error("true_prior.mean", "the multiplicative-noise model takes a centred prior");
        }
    } else if (cfg.grid) {
        config_error("grid", "only continuous-state models take a grid");
    }

    if (const auto* f = std::get_if<FiniteHmmSpec>(&cfg.model); f && f->moment_matrix) {
        const auto computed = config_moment_matrix(cfg);
        if (!computed) {
            config_error("model.moment_matrix", "declared for a model without continuous observation laws");
        }
        const auto& b = *f->moment_matrix;
        const auto d = static_cast<std::size_t>(computed->entries.rows());
        if (b.size() != d || b.front().size() != d) {
            config_error("model.moment_matrix", "must be " + std::to_string(d) + "x" + std::to_string(d));
        }
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double want = computed->entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (std::abs(b[i][j] - want) > declared_moment_tolerance) {
                    config_error(index_path(index_path("model.moment_matrix", i), j),
                                 "declared " + format_double(b[i][j]) + " but the laws give " + format_double(want));
                }
            }
        }
    }

    if (cfg.metrics.empty()) {
        config_error("metrics", "must request at least one metric");
    }
    if (cfg.wants(MetricKind::weak_f) && cfg.f.empty()) {
        config_error("f", "weak-f needs at least one function f");
    }
    if (cfg.wants(MetricKind::predictor_g) && cfg.g.empty()) {
        config_error("g", "predictor-g needs at least one function g");
    }
    if (cfg.wants(MetricKind::char_t)) {
        const auto* add = std::get_if<AdditiveSpec>(&cfg.model);
        if (!add) {
            config_error("metrics", "char-t needs the additive model");
        }
        if (cfg.t_values.empty()) {
            config_error("t_values", "char-t needs at least one t");
        }
    }
    if (cfg.method == Method::enumeration && !finite_alphabet(cfg.model)) {
        config_error("method", "enumeration needs a finite observation alphabet");
    }
}

} // namespace detail

inline ExperimentConfig parse_config(const Json& j)
{
    detail::Fields o(j, "");
    ExperimentConfig cfg;
    const auto version = detail::as_unsigned(o.need("schema_version"), "schema_version");
    if (version != static_cast<std::uint64_t>(config_schema_version)) {
        config_error("schema_version", "unsupported version " + std::to_string(version));
    }
    cfg.name = detail::as_string(o.need("name"), "name");
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
        config_error("name", "must be a non-empty name without path separators");
    }
    cfg.model = detail::parse_model(o.need("model"), "model");
    cfg.true_prior = detail::parse_prior(o.need("true_prior"), "true_prior");
    cfg.filter_prior = detail::parse_prior(o.need("filter_prior"), "filter_prior");
    cfg.f = detail::parse_functions(o.get("f"), "f");
    cfg.g = detail::parse_functions(o.get("g"), "g");
    if (const Json* t = o.get("t_values")) {
        cfg.t_values = detail::as_numbers(*t, "t_values", true);
    }
    cfg.n_max = detail::as_unsigned(o.need("n_max"), "n_max", 1);
    cfg.trials = detail::as_unsigned(o.need("trials"), "trials", 1);
    cfg.seed = detail::as_unsigned(o.need("seed"), "seed");
    if (const Json* g = o.get("grid")) {
        detail::Fields go(*g, "grid");
        GridSpec gs;
        gs.lo = detail::as_number(go.need("lo"), "grid.lo");
        gs.hi = detail::as_number(go.need("hi"), "grid.hi");
        gs.cells = detail::as_unsigned(go.need("cells"), "grid.cells", min_grid_cells);
        go.finish();
        if (!(gs.lo < gs.hi)) {
            config_error("grid.hi", "must exceed grid.lo");
        }
        cfg.grid = gs;
    }
    const Json& metrics = o.need("metrics");
    if (!metrics.is_array()) {
        config_error("metrics", "expected an array of metric kinds");
    }
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        const auto path = detail::index_path("metrics", i);
        const auto kind = parse_metric_kind(detail::as_string(metrics[i], path));
        if (!kind) {
            config_error(path, "unknown metric kind '" + metrics[i].get<std::string>() + "'");
        }
        if (cfg.wants(*kind)) {
            config_error(path, "listed twice");
        }
        cfg.metrics.push_back(*kind);
    }
    if (const Json* m = o.get("method")) {
        const auto s = detail::as_string(*m, "method");
        if (s == "monte-carlo") {
            cfg.method = Method::monte_carlo;
        } else if (s == "enumeration") {
            cfg.method = Method::enumeration;
        } else {
            config_error("method", "expected 'monte-carlo' or 'enumeration'");
        }
    }
    if (const Json* d = o.get("output_dir")) {
        cfg.output_dir = detail::as_string(*d, "output_dir");
    }
    if (const Json* s = o.get("rate_slack")) {
        cfg.rate_slack = detail::as_number(*s, "rate_slack");
        if (cfg.rate_slack < 0.0) {
            config_error("rate_slack", "must be nonnegative");
        }
    }
    o.finish();
    detail::check_config(cfg);
    return cfg;
}

inline ExperimentConfig parse_config_text(std::string_view text, const std::string& origin = "<config>")
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::config_invalid, origin + ": not valid JSON (" + e.what() + ")");
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error&) {
        fail(ErrorKind::config_invalid, "cannot read config file " + path.string());
    }
    try {
        return parse_config_text(text, path.string());
    } catch (const Error& e) {
        const std::string prefix = std::string(to_string(ErrorKind::config_invalid)) + ": ";
        const std::string msg = e.what();
        if (e.kind() != ErrorKind::config_invalid || msg.rfind(prefix + path.string(), 0) == 0) {
            throw;
        }
        fail(ErrorKind::config_invalid, path.string() + ": " + msg.substr(prefix.size()));
    }
}

inline Json to_json(const ScalarFunction& fn)
{
    const auto& p = fn.params();
    switch (fn.family()) {
    case ScalarFunction::Family::constant: return {{"family", "constant"}, {"value", p[0]}};
    case ScalarFunction::Family::polynomial: return {{"family", "polynomial"}, {"coefficients", p}};
    case ScalarFunction::Family::abs: return {{"family", "abs"}, {"scale", p[0]}};
    case ScalarFunction::Family::indicator: return {{"family", "indicator"}, {"lo", p[0]}, {"hi", p[1]}};
    case ScalarFunction::Family::cosine: return {{"family", "cos"}, {"t", p[0]}};
    case ScalarFunction::Family::sine: return {{"family", "sin"}, {"t", p[0]}};
    case ScalarFunction::Family::custom: break;
    }
    fail(ErrorKind::invalid_argument, "function " + fn.id() + " has no config form");
}

inline Json to_json(const ObsLaw& law)
{
    return std::visit(
        [](const auto& l) -> Json {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, NormalLaw>) {
                return {{"family", "normal"}, {"mean", l.mean}, {"std", l.std}};
            } else if constexpr (std::is_same_v<L, MultNoiseLaw>) {
                return {{"family", "mult-noise"}, {"rho", l.rho}};
            } else {
                return {{"family", "finite"}, {"letters", l.letters}, {"probs", l.probs}};
            }
        },
        law);
}

inline Json to_json(const PriorSpec& p)
{
    switch (p.family) {
    case PriorSpec::Family::finite: return {{"family", "finite"}, {"weights", p.weights}};
    case PriorSpec::Family::sg:
        return {{"family", "sg"},
                {"sigma", p.continuous.shape.sigma},
                {"alpha", p.continuous.shape.alpha},
                {"mean", p.continuous.mean}};
    case PriorSpec::Family::normal:
        return {{"family", "normal"}, {"mean", p.continuous.mean}, {"std", p.continuous.shape.sigma}};
    }
    return {};
}

inline Json to_json(const ModelSpec& m)
{
    return std::visit(
        [](const auto& s) -> Json {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FiniteHmmSpec>) {
                Json laws = Json::array();
                for (const auto& l : s.observation_laws) {
                    laws.push_back(to_json(l));
                }
                Json j{{"family", "finite-hmm"}, {"matrix", s.matrix}, {"atoms", s.atoms}, {"observation_laws", laws}};
                if (s.moment_matrix) {
                    j["moment_matrix"] = *s.moment_matrix;
                }
                return j;
            } else if constexpr (std::is_same_v<S, AlphabetHmmSpec>) {
                return {{"family", "alphabet-hmm"},
                        {"matrix", s.matrix},
                        {"atoms", s.atoms},
                        {"letters", s.letters},
                        {"emission", s.emission}};
            } else if constexpr (std::is_same_v<S, MultNoiseSpec>) {
                return {{"family", "mult-noise"}, {"a", s.a}, {"b", s.b}, {"rho", s.rho}};
            } else {
                return {{"family", "additive"},
                        {"a", s.a},
                        {"b", s.b},
                        {"h", to_json(s.h)},
                        {"noise", to_json(std::visit([](const auto& n) { return ObsLaw(n); }, s.noise))}};
            }
        },
        m);
}

/// Canonical form: parse_config(to_json(cfg)) reproduces cfg.
inline Json to_json(const ExperimentConfig& cfg)
{
    Json fs = Json::array();
    for (const auto& f : cfg.f) {
        fs.push_back(to_json(f));
    }
    Json gs = Json::array();
    for (const auto& g : cfg.g) {
        gs.push_back(to_json(g));
    }
    Json metrics = Json::array();
    for (auto k : cfg.metrics) {
        metrics.push_back(std::string(to_string(k)));
    }
    Json j{{"schema_version", cfg.schema_version},
           {"name", cfg.name},
           {"model", to_json(cfg.model)},
           {"true_prior", to_json(cfg.true_prior)},
           {"filter_prior", to_json(cfg.filter_prior)},
           {"f", fs},
           {"g", gs},
           {"t_values", cfg.t_values},
           {"n_max", cfg.n_max},
           {"trials", cfg.trials},
           {"seed", cfg.seed},
           {"metrics", metrics},
           {"method", cfg.method == Method::enumeration ? "enumeration" : "monte-carlo"},
           {"output_dir", cfg.output_dir},
           {"rate_slack", cfg.rate_slack}};
    if (cfg.grid) {
        j["grid"] = {{"lo", cfg.grid->lo}, {"hi", cfg.grid->hi}, {"cells", cfg.grid->cells}};
    }
    return j;
}

} // namespace filterstab
