#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qhedge/measure.hpp"

namespace qhedge {

inline constexpr double kNoThreshold = std::numeric_limits<double>::infinity();

/// Empirical conditional law of D = dQ*/dP: values sorted ascending with
/// prefix sums of D and D^2. Every solver reads the same prefix array, so
/// epsilon->k->alpha->k round trips are exact.
class SortedLaw {
public:
    explicit SortedLaw(std::vector<double> d) : d_(std::move(d)) {
        if (d_.empty()) throw std::invalid_argument("SortedLaw: empty batch");
        for (double x : d_)
            if (!(x >= 0)) throw std::invalid_argument("SortedLaw: D values must be >= 0");
        std::sort(d_.begin(), d_.end());
        sum_.assign(d_.size() + 1, 0.0);
        sum_sq_.assign(d_.size() + 1, 0.0);
        for (std::size_t i = 0; i < d_.size(); ++i) {
            sum_[i + 1] = sum_[i] + d_[i];
            sum_sq_[i + 1] = sum_sq_[i] + d_[i] * d_[i];
        }
    }

    explicit SortedLaw(const ConditionalBatch& batch) : SortedLaw(batch.d_star()) {}

    std::size_t size() const { return d_.size(); }
    std::span<const double> values() const { return d_; }

    /// Order statistic d_(rank), rank in 1..n.
    double order_stat(std::size_t rank) const { return d_.at(rank - 1); }

    /// Number of samples with D <= k.
    std::size_t count_le(double k) const {
        return static_cast<std::size_t>(std::upper_bound(d_.begin(), d_.end(), k) - d_.begin());
    }

    /// (1/n) sum of the m smallest values, unclamped.
    double budget(std::size_t m) const { return sum_[m] / static_cast<double>(d_.size()); }

    double budget_sq(std::size_t m) const { return sum_sq_[m] / static_cast<double>(d_.size()); }

private:
    std::vector<double> d_;
    std::vector<double> sum_;
    std::vector<double> sum_sq_;
};

struct Estimate {
    double value = 0;
    double std_error = 0;
};

/// Empirical (1-eps)-quantile: order statistic at rank ceil((1-eps) n), 0 for rank 0.
inline double solve_k_for_epsilon(const SortedLaw& law, double epsilon) {
    if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("solve_k_for_epsilon: epsilon not in [0,1]");
    const std::size_t n = law.size();
    const auto drop = static_cast<std::size_t>(std::floor(epsilon * static_cast<double>(n) + 1e-9));
    const std::size_t rank = n - std::min(drop, n);
    return rank == 0 ? 0.0 : law.order_stat(rank);
}

/// Capital fraction E_P[D 1{D <= k} | G], clamped to [0, 1].
inline Estimate alpha_from_k(const SortedLaw& law, double k) {
    if (!(k >= 0)) throw std::invalid_argument("alpha_from_k: k must be >= 0");
    const std::size_t m = law.count_le(k);
    const double n = static_cast<double>(law.size());
    const double mean = law.budget(m);
    const double var = n > 1 ? std::max(law.budget_sq(m) - mean * mean, 0.0) * n / (n - 1) : 0.0;
    return {std::clamp(mean, 0.0, 1.0), std::sqrt(var / n)};
}

/// Success probability P(D <= k | G).
inline Estimate success_prob_from_k(const SortedLaw& law, double k) {
    if (!(k >= 0)) throw std::invalid_argument("success_prob_from_k: k must be >= 0");
    const double n = static_cast<double>(law.size());
    const double prob = static_cast<double>(law.count_le(k)) / n;
    return {prob, n > 1 ? std::sqrt(prob * (1 - prob) / (n - 1)) : 0.0};
}

struct AlphaThreshold {
    double k = 0;
    double attained_budget = 0;
    std::size_t covered = 0;      // samples with D <= k
    std::size_t blocked_tie = 0;  // size of the tie group that would overshoot the budget (0 if none)
};

/// Largest order statistic whose cumulative budget stays within alpha, tie groups entering together.
inline AlphaThreshold solve_k_for_alpha(const SortedLaw& law, double alpha) {
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("solve_k_for_alpha: alpha not in [0,1]");
    const std::size_t n = law.size();
    const auto vals = law.values();
    if (alpha >= 1) return {vals.back(), law.budget(n), n, 0};

    // budget(m) is nondecreasing in m.
    std::size_t lo = 0, hi = n;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (law.budget(mid) <= alpha)
            lo = mid;
        else
            hi = mid - 1;
    }
    std::size_t m = lo;
    std::size_t blocked = 0;
    if (m > 0 && m < n && vals[m] == vals[m - 1]) {
        const double tied = vals[m];
        const std::size_t group_begin = law.count_le(std::nextafter(tied, 0.0));
        blocked = law.count_le(tied) - group_begin;
        m = group_begin;
    } else if (m < n) {
        const std::size_t group = law.count_le(vals[m]) - m;
        if (group > 1) blocked = group;
    }
    return {m == 0 ? 0.0 : vals[m - 1], law.budget(m), m, blocked};
}

inline double solve_k_for_epsilon(const ConditionalBatch& b, double eps) { return solve_k_for_epsilon(SortedLaw(b), eps); }
inline Estimate alpha_from_k(const ConditionalBatch& b, double k) { return alpha_from_k(SortedLaw(b), k); }
inline Estimate success_prob_from_k(const ConditionalBatch& b, double k) { return success_prob_from_k(SortedLaw(b), k); }
inline AlphaThreshold solve_k_for_alpha(const ConditionalBatch& b, double a) { return solve_k_for_alpha(SortedLaw(b), a); }

struct HedgeTarget {
    enum class Kind { Epsilon, Alpha };
    Kind kind = Kind::Epsilon;
    double value = 0;

    static HedgeTarget epsilon(double e) { return {Kind::Epsilon, e}; }
    static HedgeTarget alpha(double a) { return {Kind::Alpha, a}; }
};

/// Solution of the quantile hedging problem for one realized signal: hold
/// initial_capital and replicate the knockout claim H 1{D <= k}.
struct HedgePlan {
    double k = 0;
    double alpha = 0;
    double success_prob = 0;
    double initial_capital = 0;
    std::optional<double> epsilon_target;
    std::optional<double> alpha_target;
    double mc_stderr_alpha = 0;
    double mc_stderr_success = 0;
    std::string knockout_payoff;
    bool target_attained_exactly = true;
    std::vector<std::string> warnings;

    bool below_se_floor() const { return alpha <= 2 * mc_stderr_alpha; }
};

inline HedgePlan make_hedge_plan(const SortedLaw& law, double e_qg_h, HedgeTarget target) {
    if (!(target.value >= 0 && target.value <= 1)) throw std::invalid_argument("make_hedge_plan: target not in [0,1]");
    HedgePlan plan;
    const std::size_t n = law.size();
    char buf[160];
    if (target.kind == HedgeTarget::Kind::Epsilon) {
        plan.epsilon_target = target.value;
        plan.k = solve_k_for_epsilon(law, target.value);
        const auto drop = static_cast<std::size_t>(std::floor(target.value * static_cast<double>(n) + 1e-9));
        const std::size_t rank = n - std::min(drop, n);
        if (law.count_le(plan.k) > rank) {
            plan.target_attained_exactly = false;
            std::snprintf(buf, sizeof buf, "atom at D=%.6g: success probability %.6g exceeds target %.6g",
                          plan.k, static_cast<double>(law.count_le(plan.k)) / n, 1 - target.value);
            plan.warnings.emplace_back(buf);
        }
    } else {
        plan.alpha_target = target.value;
        const auto sol = solve_k_for_alpha(law, target.value);
        plan.k = sol.k;
        if (sol.blocked_tie > 0) {
            plan.target_attained_exactly = false;
            std::snprintf(buf, sizeof buf, "atom of %zu samples blocks the budget: attained %.6g of target %.6g",
                          sol.blocked_tie, sol.attained_budget, target.value);
            plan.warnings.emplace_back(buf);
        }
    }
    const auto a = alpha_from_k(law, plan.k);
    const auto s = success_prob_from_k(law, plan.k);
    plan.alpha = a.value;
    plan.mc_stderr_alpha = a.std_error;
    plan.success_prob = s.value;
    plan.mc_stderr_success = s.std_error;
    plan.initial_capital = plan.alpha * e_qg_h;
    std::snprintf(buf, sizeof buf, "H*1{D<=%.6g}", plan.k);
    plan.knockout_payoff = buf;
    return plan;
}

inline HedgePlan make_hedge_plan(const ConditionalBatch& batch, HedgeTarget target) {
    return make_hedge_plan(SortedLaw(batch), batch.e_qg_h, target);
}

}  // namespace qhedge
