#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qhedge/model.hpp"
#include "qhedge/parallel.hpp"
#include "qhedge/random.hpp"

namespace qhedge {

enum class SignalKind { PointValue, IntervalIndicator };

/// The insider's extra information G, expressed in Brownian units of W_{T+delta}.
/// Either the point value G = W_{T+delta} = g_w, or the indicator
/// G = 1{W_{T+delta} in [a_w, b_w]} with its observed value.
struct SignalSpec {
    SignalKind kind = SignalKind::PointValue;
    double g_w = 0;
    double a_w = 0;
    double b_w = 0;
    int observed = 1;
    // Stock-price labels when the signal was built from S_{T+delta} levels.
    std::optional<double> level;
    std::optional<double> level_lo;
    std::optional<double> level_hi;

    static SignalSpec point(double g_w) {
        if (!std::isfinite(g_w)) throw std::invalid_argument("SignalSpec: g_w must be finite");
        SignalSpec s;
        s.kind = SignalKind::PointValue;
        s.g_w = g_w;
        return s;
    }

    static SignalSpec interval(double a_w, double b_w, int observed = 1) {
        if (!(a_w < b_w)) throw std::invalid_argument("SignalSpec: interval requires a < b");
        if (observed != 0 && observed != 1)
            throw std::invalid_argument("SignalSpec: observed must be 0 or 1");
        SignalSpec s;
        s.kind = SignalKind::IntervalIndicator;
        s.a_w = a_w;
        s.b_w = b_w;
        s.observed = observed;
        return s;
    }

    /// Point signal S_{T+delta} = level.
    static SignalSpec point_at_price(double level, const ModelParams& p) {
        auto s = point(brownian_from_price(level, p.horizon(), p));
        s.level = level;
        return s;
    }

    /// Indicator of S_{T+delta} in [lo, hi].
    static SignalSpec interval_at_prices(double lo, double hi, int observed, const ModelParams& p) {
        if (!(lo > 0 && lo < hi)) throw std::invalid_argument("SignalSpec: price interval requires 0 < lo < hi");
        auto s = interval(brownian_from_price(lo, p.horizon(), p), brownian_from_price(hi, p.horizon(), p),
                          observed);
        s.level_lo = lo;
        s.level_hi = hi;
        return s;
    }

    std::string describe() const {
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", v);
            return std::string(buf);
        };
        if (kind == SignalKind::PointValue)
            return level ? "S=" + num(*level) : "W=" + num(g_w);
        const std::string range = level_lo ? "S in " + num(*level_lo) + ".." + num(*level_hi)
                                           : "W in " + num(a_w) + ".." + num(b_w);
        return range + " G=" + std::to_string(observed);
    }
};

enum class ConditioningMode { BridgeExact, PaperShift };

inline const char* to_string(ConditioningMode m) {
    return m == ConditioningMode::BridgeExact ? "bridge_exact" : "paper_shift";
}

inline ConditioningMode parse_mode(const std::string& s) {
    if (s == "bridge_exact") return ConditioningMode::BridgeExact;
    if (s == "paper_shift") return ConditioningMode::PaperShift;
    throw std::invalid_argument("unknown conditioning mode '" + s + "'");
}

struct RejectionStats {
    std::uint64_t candidates = 0;  // candidates drawn up to and including the last accepted one
    std::uint64_t accepted = 0;
    double rate() const { return candidates ? static_cast<double>(accepted) / candidates : 0.0; }
};

class AcceptanceRateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// P(lo <= Z <= hi) for standard normal Z, evaluated on the side that avoids cancellation.
inline double normal_interval_prob(double lo, double hi) {
    if (lo > 0) return std_normal_cdf(-lo) - std_normal_cdf(-hi);
    return std_normal_cdf(hi) - std_normal_cdf(lo);
}

inline void check_time(double t, const ModelParams& p, const char* who) {
    if (!(t >= 0 && t < p.horizon()))
        throw std::invalid_argument(std::string(who) + ": requires 0 <= t < T + delta");
}

}  // namespace detail

/// p_t^z: density of P(W_{T+delta} in dz | F_t) against the law of W_{T+delta}.
inline double density_point(double z, double w_t, double t, const ModelParams& p) {
    detail::check_time(t, p, "density_point");
    const double full = p.horizon();
    const double rest = full - t;
    const double dz = z - w_t;
    return std::sqrt(full / rest) * std::exp(-dz * dz / (2 * rest) + z * z / (2 * full));
}

/// P(G = observed) before any market information.
inline double signal_probability(const SignalSpec& s, const ModelParams& p) {
    if (s.kind != SignalKind::IntervalIndicator) throw std::invalid_argument("signal_probability: indicator only");
    const double sd = std::sqrt(p.horizon());
    const double in = detail::normal_interval_prob(s.a_w / sd, s.b_w / sd);
    return s.observed == 1 ? in : std_normal_cdf(s.a_w / sd) + std_normal_cdf(-s.b_w / sd);
}

/// p_t^1 or p_t^0 for the interval indicator.
inline double density_indicator(int value, double w_t, double t, const SignalSpec& s, const ModelParams& p) {
    if (s.kind != SignalKind::IntervalIndicator)
        throw std::invalid_argument("density_indicator: signal is not an interval indicator");
    if (value != 0 && value != 1) throw std::invalid_argument("density_indicator: value must be 0 or 1");
    detail::check_time(t, p, "density_indicator");
    const double sd_t = std::sqrt(p.horizon() - t);
    const double lo = (s.a_w - w_t) / sd_t;
    const double hi = (s.b_w - w_t) / sd_t;
    const double sd0 = std::sqrt(p.horizon());
    if (value == 1)
        return detail::normal_interval_prob(lo, hi) / detail::normal_interval_prob(s.a_w / sd0, s.b_w / sd0);
    return (std_normal_cdf(lo) + std_normal_cdf(-hi)) /
           (std_normal_cdf(s.a_w / sd0) + std_normal_cdf(-s.b_w / sd0));
}

/// W_T draws under P given W_{T+delta} = g_w.
/// BridgeExact: N(g T/(T+delta), T delta/(T+delta)). PaperShift: g - W(delta).
inline std::vector<double> sample_point_conditional(double g_w, std::size_t n, ConditioningMode mode,
                                                    const ModelParams& p, std::uint64_t seed,
                                                    const Parallelism& par = {}) {
    if (n == 0) throw std::invalid_argument("sample_point_conditional: n must be >= 1");
    double mean = g_w;
    double sd = std::sqrt(p.delta);
    if (mode == ConditioningMode::BridgeExact) {
        mean = g_w * p.t_expiry / p.horizon();
        sd = std::sqrt(p.t_expiry * p.delta / p.horizon());
    }
    // Shift draws g - sqrt(delta) Z; the sign is irrelevant in law but kept literal.
    const double sign = mode == ConditioningMode::PaperShift ? -1.0 : 1.0;
    std::vector<double> out(n);
    const CounterStream rng(seed);
    parallel_chunks(n, par, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out[i] = mean + sign * sd * rng.normal(i);
    });
    return out;
}

/// Rejection sampler for (W_T, W_{T+delta}) given G = observed. Returns the
/// first n accepted candidates in candidate-index order.
inline std::vector<BrownianPair> sample_indicator_conditional(const SignalSpec& s, std::size_t n,
                                                              const ModelParams& p, std::uint64_t seed,
                                                              const Parallelism& par = {},
                                                              double acceptance_floor = 1e-4,
                                                              RejectionStats* stats = nullptr) {
    if (s.kind != SignalKind::IntervalIndicator)
        throw std::invalid_argument("sample_indicator_conditional: signal is not an interval indicator");
    if (n == 0) throw std::invalid_argument("sample_indicator_conditional: n must be >= 1");
    const double accept_prob = signal_probability(s, p);
    if (!(accept_prob >= acceptance_floor))
        throw AcceptanceRateError("acceptance probability " + std::to_string(accept_prob) +
                                  " is below the floor " + std::to_string(acceptance_floor));

    const CounterStream rng(seed);
    const double sd_T = std::sqrt(p.t_expiry);
    const double sd_d = std::sqrt(p.delta);
    auto accepted = [&](const BrownianPair& b) {
        const bool in = b.w_Tdelta >= s.a_w && b.w_Tdelta <= s.b_w;
        return in == (s.observed == 1);
    };

    const double max_candidates = 10.0 * static_cast<double>(n) / acceptance_floor + 1e7;
    std::vector<BrownianPair> out;
    out.reserve(n);
    std::uint64_t next_block = 0;
    std::uint64_t last_index = 0;
    while (out.size() < n) {
        const double missing = static_cast<double>(n - out.size());
        const std::size_t blocks =
            static_cast<std::size_t>(std::ceil(1.1 * missing / (accept_prob * kChunkSize))) + 1;
        struct Hit {
            BrownianPair pair;
            std::uint64_t index;
        };
        std::vector<std::vector<Hit>> found(blocks);
        parallel_chunks(blocks * kChunkSize, par, [&](std::size_t begin, std::size_t end) {
            auto& bucket = found[begin / kChunkSize];
            for (std::size_t j = begin; j < end; ++j) {
                const std::uint64_t index = next_block * kChunkSize + j;
                const auto [z1, z2] = rng.normal_pair(index);
                BrownianPair b{sd_T * z1, 0.0};
                b.w_Tdelta = b.w_T + sd_d * z2;
                if (accepted(b)) bucket.push_back({b, index});
            }
        });
        for (const auto& bucket : found)
            for (const auto& hit : bucket) {
                if (out.size() == n) break;
                out.push_back(hit.pair);
                last_index = hit.index;
            }
        next_block += blocks;
        if (static_cast<double>(next_block * kChunkSize) > max_candidates && out.size() < n)
            throw AcceptanceRateError("rejection sampler exhausted its candidate budget");
    }
    if (stats) *stats = {last_index + 1, out.size()};
    return out;
}

}  // namespace qhedge
