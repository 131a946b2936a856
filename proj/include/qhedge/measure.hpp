#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qhedge/model.hpp"
#include "qhedge/parallel.hpp"
#include "qhedge/signal.hpp"

namespace qhedge {

/// One draw under P given the realized signal, with every density along the
/// way: z_f = dQ_F/dP on F_T, p_g = p_T^G, qg_density = dQ_G/dP on G_T,
/// d_star = dQ*/dP on G_T.
struct ConditionalSample {
    double w_T = 0;
    double s_T = 0;
    double h = 0;
    double z_f = 0;
    double p_g = 0;
    double qg_density = 0;
    double d_star = 0;
};

struct ConditionalBatch {
    SignalSpec signal;
    ConditioningMode mode = ConditioningMode::BridgeExact;
    std::vector<ConditionalSample> samples;
    double e_qg_h = 0;  // E_{Q_G} H, the closed-form price
    std::uint64_t seed = 0;
    std::size_t n = 0;

    std::vector<double> d_star() const {
        std::vector<double> out(samples.size());
        std::transform(samples.begin(), samples.end(), out.begin(),
                       [](const ConditionalSample& s) { return s.d_star; });
        return out;
    }
};

inline double payoff_call(double s_T, double strike) { return std::max(s_T - strike, 0.0); }

/// dQ_G/dP on G_T for G = W_{T+delta} = g_w, in closed form.
inline double qg_density_point(double w_T, double g_w, const ModelParams& p) {
    const double th = p.theta();
    const double T = p.t_expiry;
    const double incr = g_w - w_T;
    return std::sqrt(p.delta / p.horizon()) *
           std::exp(-th * w_T - 0.5 * th * th * T + incr * incr / (2 * p.delta) - g_w * g_w / (2 * p.horizon()));
}

/// dQ_G/dP on G_T for the interval indicator, at its observed value.
inline double qg_density_indicator(double w_T, const SignalSpec& s, const ModelParams& p) {
    return rn_density(w_T, p) / density_indicator(s.observed, w_T, p.t_expiry, s, p);
}

namespace detail {

inline ConditionalSample make_sample(double w_T, double p_g, double e_qg_h, const ModelParams& p) {
    ConditionalSample c;
    c.w_T = w_T;
    c.s_T = price_from_brownian(w_T, p.t_expiry, p);
    c.h = payoff_call(c.s_T, p.strike);
    c.z_f = rn_density(w_T, p);
    c.p_g = p_g;
    c.qg_density = c.z_f / c.p_g;
    c.d_star = c.h * c.qg_density / e_qg_h;
    return c;
}

}  // namespace detail

inline ConditionalBatch build_batch(const SignalSpec& signal, ConditioningMode mode, std::size_t n,
                                    const ModelParams& p, std::uint64_t seed, const Parallelism& par = {},
                                    double acceptance_floor = 1e-4) {
    p.validate();
    if (n == 0) throw std::invalid_argument("build_batch: n must be >= 1");
    ConditionalBatch batch;
    batch.signal = signal;
    batch.mode = mode;
    batch.seed = seed;
    batch.n = n;
    batch.e_qg_h = bs_call_price(p);
    if (!(batch.e_qg_h > 0)) throw std::invalid_argument("build_batch: claim has zero price");
    batch.samples.resize(n);
    const double T = p.t_expiry;

    if (signal.kind == SignalKind::PointValue) {
        const auto w = sample_point_conditional(signal.g_w, n, mode, p, seed, par);
        parallel_chunks(n, par, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
                batch.samples[i] =
                    detail::make_sample(w[i], density_point(signal.g_w, w[i], T, p), batch.e_qg_h, p);
        });
    } else {
        if (mode != ConditioningMode::BridgeExact)
            throw std::invalid_argument("build_batch: paper_shift applies to point signals only");
        const auto pairs = sample_indicator_conditional(signal, n, p, seed, par, acceptance_floor);
        parallel_chunks(n, par, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double w = pairs[i].w_T;
                batch.samples[i] =
                    detail::make_sample(w, density_indicator(signal.observed, w, T, signal, p), batch.e_qg_h, p);
            }
        });
    }
    return batch;
}

}  // namespace qhedge
