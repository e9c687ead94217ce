#pragma once

// Depth-first walk over every observation sequence y_1..y_m (m <= depth) of
// a finite-alphabet model, carrying the filters started from nu and nu_bar
// together with the sequence probabilities under both priors.

#include "filterstab/error.hpp"
#include "filterstab/filter.hpp"
#include "filterstab/measure.hpp"
#include "filterstab/model.hpp"
#include "filterstab/oracles.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace filterstab {

struct TreeNode {
    std::size_t depth = 0;
    std::span<const double> prefix;   // y_1..y_depth
    const Eigen::VectorXd* pi = nullptr;
    const Eigen::VectorXd* pi_bar = nullptr;
    double log_p = 0.0;               // log P(y_1..y_depth), -inf if impossible under nu
    double log_p_bar = 0.0;           // log P_bar(y_1..y_depth), always finite
    double parent_log_p = 0.0;
    double parent_log_p_bar = 0.0;

    bool alive() const noexcept { return log_p > -std::numeric_limits<double>::infinity(); }
    double log_rho() const noexcept { return log_p - log_p_bar; }
    double parent_log_rho() const noexcept { return parent_log_p - parent_log_p_bar; }
};

inline std::size_t observation_tree_leaves(std::size_t letters, std::size_t depth)
{
    const double leaves = std::pow(static_cast<double>(letters), static_cast<double>(depth));
    if (leaves > max_enumeration_terms) {
        fail(ErrorKind::too_large, std::to_string(letters) + "^" + std::to_string(depth) + " observation sequences");
    }
    return static_cast<std::size_t>(leaves);
}

namespace detail {

template <class Visitor>
void walk_tree(const HmmModel& model, std::vector<double>& prefix, TreeNode& node, std::size_t depth,
               Visitor& visit)
{
    visit(static_cast<const TreeNode&>(node));
    if (node.depth == depth) {
        return;
    }
    const auto& letters = model.channel.letters();
    const Eigen::MatrixXd& kernel = model.signal.matrix();
    const auto d = static_cast<Eigen::Index>(model.dim());
    Eigen::VectorXd lg(d);
    Eigen::VectorXd w(d);
    Eigen::VectorXd w_bar(d);
    Eigen::VectorXd next(d);
    Eigen::VectorXd next_bar(d);
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    for (double y : letters) {
        log_likelihoods(model, y, lg);
        w_bar = *node.pi_bar;
        const double lc_bar = bayes_correct(w_bar, lg);
        if (lc_bar == neg_inf) {
            continue; // P_bar-null, hence P-null too
        }
        next_bar.noalias() = kernel.transpose() * w_bar;
        next_bar /= next_bar.sum();

        double lc = neg_inf;
        if (node.alive()) {
            w = *node.pi;
            lc = bayes_correct(w, lg);
        }
        if (lc > neg_inf) {
            next.noalias() = kernel.transpose() * w;
            next /= next.sum();
        } else {
            next = next_bar; // placeholder; never read while dead
        }

        prefix.push_back(y);
        TreeNode child;
        child.depth = node.depth + 1;
        child.prefix = std::span<const double>(prefix);
        child.pi = &next;
        child.pi_bar = &next_bar;
        child.log_p = lc > neg_inf ? node.log_p + lc : neg_inf;
        child.log_p_bar = node.log_p_bar + lc_bar;
        child.parent_log_p = node.log_p;
        child.parent_log_p_bar = node.log_p_bar;
        walk_tree(model, prefix, child, depth, visit);
        prefix.pop_back();
    }
}

} // namespace detail

/// Visits the root (depth 0) and every observation prefix of positive P_bar
/// probability, parents before children, letters in alphabet order.
template <class Visitor>
void enumerate_observation_tree(const HmmModel& model, const Distribution& nu, const Distribution& nu_bar,
                                std::size_t depth, Visitor&& visit)
{
    require_filterable(model);
    if (!model.channel.is_finite_alphabet()) {
        fail(ErrorKind::invalid_argument, "exact enumeration needs a finite observation alphabet");
    }
    require_same_support(nu, nu_bar);
    if (!nu.carrier().same_as(*model.states)) {
        fail(ErrorKind::mismatched_support, "priors are not on the model carrier");
    }
    observation_tree_leaves(model.channel.letters().size(), depth);
    std::vector<double> prefix;
    prefix.reserve(depth);
    const Eigen::VectorXd pi = nu.weights();
    const Eigen::VectorXd pi_bar = nu_bar.weights();
    TreeNode root;
    root.pi = &pi;
    root.pi_bar = &pi_bar;
    root.prefix = std::span<const double>(prefix);
    detail::walk_tree(model, prefix, root, depth, visit);
}

} // namespace filterstab
