#pragma once

// Named real functions used as test functions f (on states) and g (on
// observations). Each knows whether it is bounded and how fast it grows.

#include "filterstab/error.hpp"
#include "filterstab/format.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace filterstab {

class ScalarFunction {
public:
    enum class Family { constant, polynomial, abs, indicator, cosine, sine, custom };

    static ScalarFunction constant(double c)
    {
        ScalarFunction f(Family::constant);
        f.params_ = {c};
        return f;
    }

    /// sum_k coeffs[k] * x^k
    static ScalarFunction polynomial(std::vector<double> coeffs)
    {
        if (coeffs.empty()) {
            fail(ErrorKind::invalid_argument, "polynomial needs at least one coefficient");
        }
        ScalarFunction f(Family::polynomial);
        f.params_ = std::move(coeffs);
        return f;
    }

    static ScalarFunction monomial(std::size_t degree)
    {
        std::vector<double> c(degree + 1, 0.0);
        c.back() = 1.0;
        return polynomial(std::move(c));
    }

    static ScalarFunction abs(double scale = 1.0)
    {
        ScalarFunction f(Family::abs);
        f.params_ = {scale};
        return f;
    }

    /// 1 on [lo, hi), 0 elsewhere.
    static ScalarFunction indicator(double lo, double hi)
    {
        if (!(lo < hi)) {
            fail(ErrorKind::invalid_argument, "indicator needs lo < hi");
        }
        ScalarFunction f(Family::indicator);
        f.params_ = {lo, hi};
        return f;
    }

    static ScalarFunction cosine(double t)
    {
        ScalarFunction f(Family::cosine);
        f.params_ = {t};
        return f;
    }

    static ScalarFunction sine(double t)
    {
        ScalarFunction f(Family::sine);
        f.params_ = {t};
        return f;
    }

    /// Arbitrary callable. `sup_abs` empty means unbounded or unknown;
    /// `growth` is the polynomial order of |f| at infinity when known.
    static ScalarFunction custom(std::string name, std::function<double(double)> fn,
                                 std::optional<double> sup_abs = std::nullopt,
                                 std::optional<double> growth = std::nullopt)
    {
        ScalarFunction f(Family::custom);
        f.name_ = std::move(name);
        f.fn_ = std::move(fn);
        f.custom_sup_ = sup_abs;
        f.custom_growth_ = growth;
        if (sup_abs) {
            f.custom_growth_ = 0.0;
        }
        return f;
    }

    double operator()(double x) const
    {
        switch (family_) {
        case Family::constant: return params_[0];
        case Family::polynomial: {
            double acc = 0.0;
            for (auto it = params_.rbegin(); it != params_.rend(); ++it) {
                acc = acc * x + *it;
            }
            return acc;
        }
        case Family::abs: return params_[0] * std::abs(x);
        case Family::indicator: return (x >= params_[0] && x < params_[1]) ? 1.0 : 0.0;
        case Family::cosine: return std::cos(params_[0] * x);
        case Family::sine: return std::sin(params_[0] * x);
        case Family::custom: return fn_(x);
        }
        return 0.0;
    }

    std::optional<double> sup_abs() const
    {
        switch (family_) {
        case Family::constant: return std::abs(params_[0]);
        case Family::polynomial:
            if (degree() == 0) {
                return std::abs(params_[0]);
            }
            return std::nullopt;
        case Family::abs:
            if (params_[0] == 0.0) {
                return 0.0;
            }
            return std::nullopt;
        case Family::indicator: return 1.0;
        case Family::cosine:
        case Family::sine: return 1.0;
        case Family::custom: return custom_sup_;
        }
        return std::nullopt;
    }

    /// Order p such that |f(x)| = O(|x|^p); empty when unknown.
    std::optional<double> growth_order() const
    {
        switch (family_) {
        case Family::polynomial: return static_cast<double>(degree());
        case Family::abs: return params_[0] == 0.0 ? 0.0 : 1.0;
        case Family::custom: return custom_growth_;
        default: return 0.0;
        }
    }

    ScalarFunction scaled(double factor) const
    {
        switch (family_) {
        case Family::constant: return constant(params_[0] * factor);
        case Family::polynomial: {
            auto c = params_;
            for (auto& v : c) {
                v *= factor;
            }
            return polynomial(std::move(c));
        }
        case Family::abs: return abs(params_[0] * factor);
        default: {
            auto inner = *this;
            auto sup = sup_abs();
            return custom(id() + "*" + format_double(factor),
                          [inner, factor](double x) { return factor * inner(x); },
                          sup ? std::optional<double>(*sup * std::abs(factor)) : std::nullopt, growth_order());
        }
        }
    }

    Family family() const noexcept { return family_; }
    const std::vector<double>& params() const noexcept { return params_; }

    std::string id() const
    {
        auto join = [this] {
            std::string s;
            for (std::size_t i = 0; i < params_.size(); ++i) {
                if (i) {
                    s += ';';
                }
                s += format_double(params_[i]);
            }
            return s;
        };
        switch (family_) {
        case Family::constant: return "const(" + join() + ")";
        case Family::polynomial: return "poly(" + join() + ")";
        case Family::abs: return "abs(" + join() + ")";
        case Family::indicator: return "ind(" + join() + ")";
        case Family::cosine: return "cos(" + join() + ")";
        case Family::sine: return "sin(" + join() + ")";
        case Family::custom: return name_;
        }
        return "?";
    }

private:
    explicit ScalarFunction(Family family) : family_(family) {}

    std::size_t degree() const
    {
        std::size_t d = params_.size() - 1;
        while (d > 0 && params_[d] == 0.0) {
            --d;
        }
        return d;
    }

    Family family_;
    std::vector<double> params_;
    std::string name_;
    std::function<double(double)> fn_;
    std::optional<double> custom_sup_;
    std::optional<double> custom_growth_;
};

} // namespace filterstab
