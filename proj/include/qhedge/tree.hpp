#pragma once

// Finite binomial market with an initially enlarged filtration. Everything is
// computed by enumeration over paths, so the measures, martingale identities
// and Neyman-Pearson optima can be checked exactly when Scalar is a rational
// type, or to 1e-12 when it is double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace qhedge::tree {

using Rational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend, boost::multiprecision::et_off>;

inline constexpr int kMaxPeriods = 20;
inline constexpr std::size_t kMaxEnumerationAtoms = 24;

template <class Scalar>
bool same(const Scalar& a, const Scalar& b) {
    if constexpr (std::is_floating_point_v<Scalar>) {
        const double scale = std::max({1.0, std::abs(a), std::abs(b)});
        return std::abs(a - b) <= 1e-12 * scale;
    } else {
        return a == b;
    }
}

template <class Scalar>
double to_double(const Scalar& x) {
    if constexpr (std::is_floating_point_v<Scalar>)
        return static_cast<double>(x);
    else
        return x.template convert_to<double>();
}

/// Exact text for rationals, 17 significant digits for doubles.
template <class Scalar>
std::string scalar_text(const Scalar& x) {
    if constexpr (std::is_floating_point_v<Scalar>) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(x));
        return buf;
    } else {
        return x.str();
    }
}

template <class Scalar>
Scalar power(const Scalar& base, int e) {
    Scalar r(1);
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

inline int count_ups(std::uint32_t path, int steps) {
    int c = 0;
    for (int i = 0; i < steps; ++i) c += (path >> i) & 1u;
    return c;
}

/// "udd": step i is bit i of the path, 'u' for an up move.
inline std::string path_name(std::uint32_t path, int steps) {
    std::string s;
    for (int i = 0; i < steps; ++i) s += ((path >> i) & 1u) ? 'u' : 'd';
    return steps == 0 ? "root" : s;
}

class EquivalenceViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Binomial market of `periods` steps; the claim is paid at step
/// `hedge_horizon` and the signal is a function of the full path.
template <class Scalar>
struct TreeMarket {
    int periods = 2;
    int hedge_horizon = 1;
    Scalar u = Scalar(2);
    Scalar d = Scalar(1) / 2;
    Scalar p_up = Scalar(1) / 2;
    Scalar s0 = Scalar(1);
    std::vector<Scalar> payoff;  // by number of up moves at hedge_horizon
    std::vector<int> signal;     // by terminal path

    /// Risk-neutral up probability (zero rate).
    Scalar q() const { return (Scalar(1) - d) / (u - d); }

    std::uint32_t paths_at(int t) const { return 1u << t; }

    Scalar price(std::uint32_t path, int t) const {
        const int ups = count_ups(path, t);
        return s0 * power(u, ups) * power(d, t - ups);
    }

    Scalar path_prob(std::uint32_t path, int t) const {
        const int ups = count_ups(path, t);
        return power(p_up, ups) * power(Scalar(1) - p_up, t - ups);
    }

    /// dQ_F/dP on F_t along the path prefix.
    Scalar z_f(std::uint32_t path, int t) const {
        const int ups = count_ups(path, t);
        const Scalar qq = q();
        return power(qq / p_up, ups) * power((Scalar(1) - qq) / (Scalar(1) - p_up), t - ups);
    }

    Scalar payoff_at(std::uint32_t path) const { return payoff.at(count_ups(path, hedge_horizon)); }

    std::vector<int> signal_values() const {
        std::vector<int> v(signal.begin(), signal.end());
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }

    /// P(G = g | F_t) on the prefix `path` of length t.
    Scalar cond_signal_prob(std::uint32_t path, int t, int g) const {
        Scalar total(0);
        const int rest = periods - t;
        for (std::uint32_t tail = 0; tail < (1u << rest); ++tail) {
            const std::uint32_t full = path | (tail << t);
            if (signal[full] == g) total += path_prob(tail, rest);
        }
        return total;
    }

    Scalar signal_prob(int g) const { return cond_signal_prob(0, 0, g); }

    /// p_t^g = P(G = g | F_t) / P(G = g).
    Scalar p_density(std::uint32_t path, int t, int g) const {
        return cond_signal_prob(path, t, g) / signal_prob(g);
    }

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("TreeMarket: " + msg); };
        if (periods < 1 || periods > kMaxPeriods) fail("periods out of range");
        if (hedge_horizon < 1 || hedge_horizon > periods) fail("hedge_horizon must be in 1..periods");
        if (!(d > Scalar(0) && d < Scalar(1) && u > Scalar(1))) fail("need 0 < d < 1 < u");
        if (!(p_up > Scalar(0) && p_up < Scalar(1))) fail("p_up must be in (0,1)");
        if (!(s0 > Scalar(0))) fail("s0 must be > 0");
        if (payoff.size() != static_cast<std::size_t>(hedge_horizon + 1)) fail("payoff needs hedge_horizon+1 nodes");
        for (const auto& h : payoff)
            if (h < Scalar(0)) fail("payoff must be nonnegative");
        if (signal.size() != paths_at(periods)) fail("signal needs one value per terminal path");
        const auto values = signal_values();
        for (int t = 0; t <= hedge_horizon; ++t)
            for (std::uint32_t path = 0; path < paths_at(t); ++path)
                for (int g : values)
                    if (!(cond_signal_prob(path, t, g) > Scalar(0)))
                        throw EquivalenceViolation("TreeMarket: P(G=" + std::to_string(g) + " | node " +
                                                   path_name(path, t) + ") = 0 at t=" + std::to_string(t) +
                                                   "; the conditional law of G is not equivalent to its prior");
    }
};

/// Binary signal 1{number of up moves over the whole tree is in `ups`}.
template <class Scalar>
std::vector<int> terminal_set_signal(int periods, const std::vector<int>& ups) {
    std::vector<int> sig(1u << periods);
    for (std::uint32_t path = 0; path < sig.size(); ++path)
        sig[path] = std::find(ups.begin(), ups.end(), count_ups(path, periods)) != ups.end() ? 1 : 0;
    return sig;
}

/// Call payoff (S_T - K)^+ on the hedge-horizon nodes.
template <class Scalar>
std::vector<Scalar> call_payoff(const TreeMarket<Scalar>& m, const Scalar& strike) {
    std::vector<Scalar> h(m.hedge_horizon + 1);
    for (int j = 0; j <= m.hedge_horizon; ++j) {
        const Scalar s = m.s0 * power(m.u, j) * power(m.d, m.hedge_horizon - j);
        h[j] = s > strike ? s - strike : Scalar(0);
    }
    return h;
}

/// The two-period market used throughout the tests: u=2, d=1/2, p_up=3/5,
/// s0=1, H=(S_1-1)^+, G=1{S_2=1}.
template <class Scalar>
TreeMarket<Scalar> reference_market() {
    TreeMarket<Scalar> m;
    m.periods = 2;
    m.hedge_horizon = 1;
    m.u = Scalar(2);
    m.d = Scalar(1) / Scalar(2);
    m.p_up = Scalar(3) / Scalar(5);
    m.s0 = Scalar(1);
    m.payoff = call_payoff(m, Scalar(1));
    m.signal = terminal_set_signal<Scalar>(2, {1});
    return m;
}

template <class Scalar>
struct Atom {
    std::uint32_t path = 0;  // prefix of length hedge_horizon
    int g = 0;
    Scalar prob;        // P(path, G=g)
    Scalar z_f;         // Z_T^F
    Scalar p_g;         // p_T^g
    Scalar qg_density;  // dQ_G/dP
    Scalar h;
    Scalar d_star;      // dQ*/dP
};

template <class Scalar>
struct AtomTable {
    TreeMarket<Scalar> market;
    std::vector<int> signal_values;
    std::vector<Scalar> signal_prob;  // P(G=g), aligned with signal_values
    std::vector<Scalar> q_f;          // Q_F per hedge-horizon path
    std::vector<Atom<Scalar>> atoms;  // path-major, then signal value
    Scalar e_qg_h;

    std::size_t signal_index(int g) const {
        const auto it = std::find(signal_values.begin(), signal_values.end(), g);
        if (it == signal_values.end()) throw std::invalid_argument("unknown signal value " + std::to_string(g));
        return static_cast<std::size_t>(it - signal_values.begin());
    }

    const Atom<Scalar>& atom(std::uint32_t path, int g) const {
        return atoms.at(path * signal_values.size() + signal_index(g));
    }
    Atom<Scalar>& atom(std::uint32_t path, int g) {
        return atoms.at(path * signal_values.size() + signal_index(g));
    }

    Scalar q_g(const Atom<Scalar>& a) const { return a.prob * a.qg_density; }
};

template <class Scalar>
AtomTable<Scalar> build_atom_table(const TreeMarket<Scalar>& m) {
    m.validate();
    AtomTable<Scalar> table;
    table.market = m;
    table.signal_values = m.signal_values();
    for (int g : table.signal_values) table.signal_prob.push_back(m.signal_prob(g));
    const int T = m.hedge_horizon;
    const Scalar qq = m.q();
    Scalar e_h(0);
    for (std::uint32_t path = 0; path < m.paths_at(T); ++path) {
        const int ups = count_ups(path, T);
        table.q_f.push_back(power(qq, ups) * power(Scalar(1) - qq, T - ups));
        for (int g : table.signal_values) {
            Atom<Scalar> a;
            a.path = path;
            a.g = g;
            a.prob = m.path_prob(path, T) * m.cond_signal_prob(path, T, g);
            a.z_f = m.z_f(path, T);
            a.p_g = m.p_density(path, T, g);
            a.qg_density = a.z_f / a.p_g;
            a.h = m.payoff_at(path);
            e_h += a.prob * a.qg_density * a.h;
            table.atoms.push_back(a);
        }
    }
    if (!(e_h > Scalar(0))) throw std::invalid_argument("build_atom_table: claim has zero Q_G price");
    table.e_qg_h = e_h;
    for (auto& a : table.atoms) a.d_star = a.h * a.qg_density / e_h;
    return table;
}

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct TheoremReport {
    std::vector<CheckResult> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
    }

    std::optional<CheckResult> first_failure() const {
        for (const auto& c : checks)
            if (!c.passed) return c;
        return std::nullopt;
    }
};

/// Verifies, on the enlarged tree:
///   mass        P and Q_G both have total mass one
///   (a) independence   Q_G(path, g) = Q_G(path) Q_G(g)
///   (b) marginals      Q_G = Q_F on F_T and Q_G = P on sigma(G)
///   (c) Z^F/p^G is a P-martingale for the enlarged filtration
///   (d) S is a Q_G-martingale for the enlarged filtration and a Q_F-martingale on the plain tree
///   (e) E_P[D | G = g] = 1 for every g
template <class Scalar>
TheoremReport verify_theorems(const AtomTable<Scalar>& table) {
    TheoremReport report;
    const auto& m = table.market;
    const int T = m.hedge_horizon;
    const std::size_t G = table.signal_values.size();
    const std::uint32_t paths = m.paths_at(T);
    auto at = [](std::uint32_t path, int t, int g) {
        return " at node " + path_name(path, t) + " (t=" + std::to_string(t) + "), G=" + std::to_string(g);
    };

    {
        CheckResult c{"mass", true, ""};
        Scalar p_total(0), qg_total(0);
        for (const auto& a : table.atoms) {
            p_total += a.prob;
            qg_total += table.q_g(a);
        }
        if (!same(p_total, Scalar(1)))
            c = {"mass", false, "sum of P atoms = " + scalar_text(p_total)};
        else if (!same(qg_total, Scalar(1)))
            c = {"mass", false, "sum of Q_G atoms = " + scalar_text(qg_total)};
        report.checks.push_back(c);
    }

    std::vector<Scalar> qg_path(paths, Scalar(0));
    std::vector<Scalar> qg_signal(G, Scalar(0));
    for (std::size_t i = 0; i < table.atoms.size(); ++i) {
        qg_path[i / G] += table.q_g(table.atoms[i]);
        qg_signal[i % G] += table.q_g(table.atoms[i]);
    }

    {
        CheckResult c{"independence", true, ""};
        for (std::size_t i = 0; i < table.atoms.size() && c.passed; ++i) {
            const auto& a = table.atoms[i];
            if (!same(table.q_g(a), qg_path[i / G] * qg_signal[i % G]))
                c = {"independence", false, "Q_G(path, g) != Q_G(path) Q_G(g)" + at(a.path, T, a.g)};
        }
        report.checks.push_back(c);
    }

    {
        CheckResult c{"marginals", true, ""};
        for (std::uint32_t path = 0; path < paths && c.passed; ++path)
            if (!same(qg_path[path], table.q_f[path]))
                c = {"marginals", false, "Q_G != Q_F on F_T at node " + path_name(path, T)};
        for (std::size_t j = 0; j < G && c.passed; ++j)
            if (!same(qg_signal[j], table.signal_prob[j]))
                c = {"marginals", false, "Q_G(G=" + std::to_string(table.signal_values[j]) + ") != P(G=g)"};
        report.checks.push_back(c);
    }

    // One-step transitions on the enlarged tree given (prefix, g).
    CheckResult density_mart{"density_martingale", true, ""};
    CheckResult price_mart{"price_martingale", true, ""};
    const Scalar qq = m.q();
    for (int t = 0; t < T; ++t) {
        for (std::uint32_t path = 0; path < m.paths_at(t); ++path) {
            const Scalar s_now = m.price(path, t);
            if (!same(qq * s_now * m.u + (Scalar(1) - qq) * s_now * m.d, s_now) && price_mart.passed)
                price_mart = {"price_martingale", false, "S is not a Q_F-martingale" + at(path, t, 0)};
            for (int g : table.signal_values) {
                const Scalar cond_now = m.cond_signal_prob(path, t, g);
                const Scalar dens_now = m.z_f(path, t) / m.p_density(path, t, g);
                Scalar dens_next(0), s_next(0), qg_mass(0);
                for (std::uint32_t step = 0; step < 2; ++step) {
                    const std::uint32_t child = path | (step << t);
                    const Scalar p_step = step ? m.p_up : Scalar(1) - m.p_up;
                    const Scalar p_cond = p_step * m.cond_signal_prob(child, t + 1, g) / cond_now;
                    const Scalar dens_child = m.z_f(child, t + 1) / m.p_density(child, t + 1, g);
                    const Scalar qg_cond = p_cond * dens_child / dens_now;
                    dens_next += p_cond * dens_child;
                    s_next += qg_cond * m.price(child, t + 1);
                    qg_mass += qg_cond;
                }
                if (density_mart.passed && !same(dens_next, dens_now))
                    density_mart = {"density_martingale", false, "E_P[Z_{t+1}/p_{t+1} | G_t] != Z_t/p_t" + at(path, t, g)};
                if (price_mart.passed && (!same(qg_mass, Scalar(1)) || !same(s_next, s_now)))
                    price_mart = {"price_martingale", false, "E_QG[S_{t+1} | G_t] != S_t" + at(path, t, g)};
            }
        }
    }
    report.checks.push_back(density_mart);
    report.checks.push_back(price_mart);

    {
        CheckResult c{"unit_mass_qstar", true, ""};
        for (std::size_t j = 0; j < G && c.passed; ++j) {
            Scalar mean(0);
            for (std::size_t i = j; i < table.atoms.size(); i += G) mean += table.atoms[i].prob * table.atoms[i].d_star;
            mean /= table.signal_prob[j];
            if (!same(mean, Scalar(1)))
                c = {"unit_mass_qstar", false,
                     "E_P[D | G=" + std::to_string(table.signal_values[j]) + "] = " + scalar_text(mean)};
        }
        report.checks.push_back(c);
    }
    return report;
}

/// Law of D given G = g over the hedge-horizon paths.
template <class Scalar>
struct ConditionalLaw {
    std::vector<std::uint32_t> paths;
    std::vector<Scalar> prob;  // P(path | G=g)
    std::vector<Scalar> d;     // D on (path, g)
};

template <class Scalar>
ConditionalLaw<Scalar> conditional_law(const AtomTable<Scalar>& table, int g) {
    ConditionalLaw<Scalar> law;
    const Scalar pg = table.signal_prob.at(table.signal_index(g));
    for (const auto& a : table.atoms) {
        if (a.g != g) continue;
        law.paths.push_back(a.path);
        law.prob.push_back(a.prob / pg);
        law.d.push_back(a.d_star);
    }
    return law;
}

/// One attainable (success probability, capital fraction) pair of threshold sets {D <= k}.
template <class Scalar>
struct Level {
    Scalar k;
    Scalar success_prob;
    Scalar alpha;
};

/// Distinct D values in ascending order with cumulative P- and Q*-mass. Level 0 with
/// an empty success set is included when every D is positive.
template <class Scalar>
std::vector<Level<Scalar>> threshold_levels(const ConditionalLaw<Scalar>& law) {
    std::vector<std::size_t> order(law.d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return law.d[a] < law.d[b]; });
    std::vector<Level<Scalar>> levels;
    if (!order.empty() && law.d[order.front()] > Scalar(0)) levels.push_back({Scalar(0), Scalar(0), Scalar(0)});
    Scalar cum_p(0), cum_a(0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t j = order[i];
        cum_p += law.prob[j];
        cum_a += law.prob[j] * law.d[j];
        const bool group_ends = i + 1 == order.size() || !same(law.d[order[i + 1]], law.d[j]);
        if (group_ends) levels.push_back({law.d[j], cum_p, cum_a});
    }
    return levels;
}

template <class Scalar>
struct ExactHedge {
    Scalar k;
    Scalar alpha;
    Scalar success_prob;
    std::vector<std::uint32_t> success_set;  // hedge-horizon paths with D <= k
    bool exact = true;                       // false: no k attains the target, conservative pair returned
};

enum class TargetKind { Epsilon, Alpha };

/// Threshold solution of Problem 1 (target alpha) or Problem 2 (target epsilon)
/// for the realized signal g.
template <class Scalar>
ExactHedge<Scalar> exact_quantile_hedge(const AtomTable<Scalar>& table, int g, TargetKind kind, const Scalar& target) {
    const bool in_range = (target > Scalar(0) || same(target, Scalar(0))) && (target < Scalar(1) || same(target, Scalar(1)));
    if (!in_range) throw std::invalid_argument("exact_quantile_hedge: target not in [0,1]");
    const auto law = conditional_law(table, g);
    const auto levels = threshold_levels(law);
    std::size_t pick = 0;
    bool exact = false;
    if (kind == TargetKind::Epsilon) {
        const Scalar need = Scalar(1) - target;
        pick = levels.size() - 1;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (same(levels[i].success_prob, need)) {
                pick = i;
                exact = true;
                break;
            }
            if (levels[i].success_prob > need) {
                pick = i;
                break;
            }
        }
    } else {
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (levels[i].alpha < target || same(levels[i].alpha, target)) pick = i;
        }
        exact = same(levels[pick].alpha, target);
    }
    ExactHedge<Scalar> out{levels[pick].k, levels[pick].alpha, levels[pick].success_prob, {}, exact};
    for (std::size_t i = 0; i < law.d.size(); ++i)
        if (law.d[i] < out.k || same(law.d[i], out.k)) out.success_set.push_back(law.paths[i]);
    std::sort(out.success_set.begin(), out.success_set.end());
    return out;
}

/// Q*(A | G = g) computed from Q_G directly, without the P-representation.
template <class Scalar>
Scalar qstar_conditional(const AtomTable<Scalar>& table, int g, const std::vector<std::uint32_t>& set) {
    Scalar num(0);
    for (auto path : set) {
        const auto& a = table.atom(path, g);
        num += table.q_g(a) * a.h;
    }
    return num / (table.signal_prob.at(table.signal_index(g)) * table.e_qg_h);
}

namespace detail {

template <class Scalar, class Visit>
void for_each_subset(const ConditionalLaw<Scalar>& law, Visit&& visit) {
    if (law.d.size() > kMaxEnumerationAtoms)
        throw std::invalid_argument("exhaustive enumeration limited to " + std::to_string(kMaxEnumerationAtoms) + " atoms");
    const std::uint32_t count = 1u << law.d.size();
    for (std::uint32_t mask = 0; mask < count; ++mask) {
        Scalar prob(0), cost(0);
        for (std::size_t i = 0; i < law.d.size(); ++i)
            if ((mask >> i) & 1u) {
                prob += law.prob[i];
                cost += law.prob[i] * law.d[i];
            }
        visit(mask, prob, cost);
    }
}

template <class Scalar>
bool leq(const Scalar& a, const Scalar& b) {
    return a < b || same(a, b);
}

}  // namespace detail

/// Largest P(A | G=g) over every success set A with E_P[D 1_A | G=g] <= alpha.
template <class Scalar>
Scalar exhaustive_max_success(const AtomTable<Scalar>& table, int g, const Scalar& alpha) {
    Scalar best(0);
    detail::for_each_subset(conditional_law(table, g), [&](std::uint32_t, const Scalar& prob, const Scalar& cost) {
        if (detail::leq(cost, alpha) && prob > best) best = prob;
    });
    return best;
}

/// Smallest E_P[D 1_A | G=g] over every A with P(A | G=g) >= 1 - epsilon.
template <class Scalar>
Scalar exhaustive_min_capital(const AtomTable<Scalar>& table, int g, const Scalar& epsilon) {
    std::optional<Scalar> best;
    const Scalar need = Scalar(1) - epsilon;
    detail::for_each_subset(conditional_law(table, g), [&](std::uint32_t, const Scalar& prob, const Scalar& cost) {
        if (detail::leq(need, prob) && (!best || cost < *best)) best = cost;
    });
    return *best;
}

/// True iff no success set within budget alpha beats the threshold set.
template <class Scalar>
bool exhaustive_optimality_check(const AtomTable<Scalar>& table, int g, const Scalar& alpha) {
    const auto plan = exact_quantile_hedge(table, g, TargetKind::Alpha, alpha);
    return detail::leq(exhaustive_max_success(table, g, alpha), plan.success_prob);
}

/// True iff no set with success probability >= 1-epsilon is cheaper than the threshold set.
template <class Scalar>
bool exhaustive_min_capital_check(const AtomTable<Scalar>& table, int g, const Scalar& epsilon) {
    const auto plan = exact_quantile_hedge(table, g, TargetKind::Epsilon, epsilon);
    return detail::leq(plan.alpha, exhaustive_min_capital(table, g, epsilon));
}

template <class Scalar>
struct TreeStrategy {
    std::vector<std::vector<Scalar>> value;    // value[t][path], t = 0..T
    std::vector<std::vector<Scalar>> holding;  // holding[t][path], t = 0..T-1, stock held over (t, t+1]

    const Scalar& initial_capital() const { return value.at(0).at(0); }
};

/// Replicates a claim given per hedge-horizon path by backward induction under
/// Q_F. For a fixed signal value this is also the insider's hedge, since Q_G
/// conditioned on G = g coincides with Q_F on F_T.
template <class Scalar>
TreeStrategy<Scalar> replicate_on_tree(const TreeMarket<Scalar>& m, const std::vector<Scalar>& target) {
    const int T = m.hedge_horizon;
    if (target.size() != m.paths_at(T)) throw std::invalid_argument("replicate_on_tree: one target value per path");
    for (const auto& v : target)
        if (v < Scalar(0)) throw std::invalid_argument("replicate_on_tree: target must be nonnegative");
    const Scalar qq = m.q();
    TreeStrategy<Scalar> s;
    s.value.resize(T + 1);
    s.holding.resize(T);
    s.value[T] = target;
    for (int t = T - 1; t >= 0; --t) {
        s.value[t].resize(m.paths_at(t));
        s.holding[t].resize(m.paths_at(t));
        for (std::uint32_t path = 0; path < m.paths_at(t); ++path) {
            const std::uint32_t up = path | (1u << t);
            const Scalar& v_up = s.value[t + 1][up];
            const Scalar& v_dn = s.value[t + 1][path];
            s.value[t][path] = qq * v_up + (Scalar(1) - qq) * v_dn;
            s.holding[t][path] = (v_up - v_dn) / (m.price(up, t + 1) - m.price(path, t + 1));
        }
    }
    return s;
}

/// Self-financing along every edge, admissibility, and terminal match.
template <class Scalar>
std::optional<std::string> check_strategy(const TreeMarket<Scalar>& m, const TreeStrategy<Scalar>& s,
                                          const std::vector<Scalar>& target) {
    const int T = m.hedge_horizon;
    for (std::uint32_t path = 0; path < m.paths_at(T); ++path)
        if (!same(s.value[T][path], target[path])) return "terminal value differs at " + path_name(path, T);
    for (int t = 0; t <= T; ++t)
        for (const auto& v : s.value[t])
            if (v < Scalar(0) && !same(v, Scalar(0))) return "negative value at t=" + std::to_string(t);
    for (int t = 0; t < T; ++t)
        for (std::uint32_t path = 0; path < m.paths_at(t); ++path)
            for (std::uint32_t step = 0; step < 2; ++step) {
                const std::uint32_t child = path | (step << t);
                const Scalar gain = s.holding[t][path] * (m.price(child, t + 1) - m.price(path, t));
                if (!same(s.value[t + 1][child] - s.value[t][path], gain))
                    return "self-financing violated on edge " + path_name(path, t) + " -> " + path_name(child, t + 1);
            }
    return std::nullopt;
}

/// H on every hedge-horizon path.
template <class Scalar>
std::vector<Scalar> payoff_target(const TreeMarket<Scalar>& m) {
    std::vector<Scalar> out(m.paths_at(m.hedge_horizon));
    for (std::uint32_t path = 0; path < out.size(); ++path) out[path] = m.payoff_at(path);
    return out;
}

/// Knockout claim H 1{D <= k} for the realized signal g.
template <class Scalar>
std::vector<Scalar> knockout_target(const AtomTable<Scalar>& table, int g, const Scalar& k) {
    std::vector<Scalar> out(table.market.paths_at(table.market.hedge_horizon));
    for (std::uint32_t path = 0; path < out.size(); ++path) {
        const auto& a = table.atom(path, g);
        out[path] = detail::leq(a.d_star, k) ? a.h : Scalar(0);
    }
    return out;
}

}  // namespace qhedge::tree
