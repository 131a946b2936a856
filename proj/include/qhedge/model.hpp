#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qhedge/parallel.hpp"
#include "qhedge/random.hpp"

namespace qhedge {

/// Black-Scholes market with zero interest rate and a call struck at `strike`
/// expiring at `t_expiry`. `delta` is how far past expiry the insider's
/// information reaches.
struct ModelParams {
    double mu = 0.08;
    double sigma = 0.25;
    double s0 = 100.0;
    double strike = 110.0;
    double t_expiry = 0.25;
    double delta = 0.02;

    /// Market price of risk mu/sigma.
    double theta() const { return mu / sigma; }
    double horizon() const { return t_expiry + delta; }

    void validate() const {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("ModelParams: ") + what);
        };
        require(std::isfinite(mu), "mu must be finite");
        require(std::isfinite(sigma) && sigma > 0, "sigma must be > 0");
        require(std::isfinite(s0) && s0 > 0, "s0 must be > 0");
        require(std::isfinite(strike) && strike >= 0, "strike must be >= 0");
        require(std::isfinite(t_expiry) && t_expiry > 0, "t_expiry must be > 0");
        require(std::isfinite(delta) && delta > 0, "delta must be > 0");
        require(std::isfinite(theta()), "mu/sigma must be finite");
    }
};

struct BrownianPair {
    double w_T = 0;
    double w_Tdelta = 0;
};

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// S_t = S0 exp(sigma w + (mu - sigma^2/2) t).
inline double price_from_brownian(double w, double t, const ModelParams& p) {
    return p.s0 * std::exp(p.sigma * w + (p.mu - 0.5 * p.sigma * p.sigma) * t);
}

inline double brownian_from_price(double s, double t, const ModelParams& p) {
    if (!(s > 0)) throw std::invalid_argument("brownian_from_price: price must be > 0");
    return (std::log(s / p.s0) - (p.mu - 0.5 * p.sigma * p.sigma) * t) / p.sigma;
}

/// Density of the risk-neutral measure against P on F_t.
inline double rn_density_at(double w_t, double t, const ModelParams& p) {
    const double th = p.theta();
    return std::exp(-th * w_t - 0.5 * th * th * t);
}

inline double rn_density(double w_T, const ModelParams& p) { return rn_density_at(w_T, p.t_expiry, p); }

inline double bs_call_price(const ModelParams& p) {
    if (p.strike <= 0) return p.s0;
    const double vol = p.sigma * std::sqrt(p.t_expiry);
    if (!(vol > 0)) return std::max(p.s0 - p.strike, 0.0);
    const double d1 = (std::log(p.s0 / p.strike) + 0.5 * vol * vol) / vol;
    const double d2 = d1 - vol;
    return p.s0 * std_normal_cdf(d1) - p.strike * std_normal_cdf(d2);
}

/// n unconditional draws of (W_T, W_{T+delta}); pair i depends only on (seed, i).
inline std::vector<BrownianPair> sample_brownian_pairs(std::size_t n, const ModelParams& p,
                                                       std::uint64_t seed,
                                                       const Parallelism& par = {}) {
    if (n == 0) throw std::invalid_argument("sample_brownian_pairs: n must be >= 1");
    std::vector<BrownianPair> out(n);
    const CounterStream rng(seed);
    const double sd_T = std::sqrt(p.t_expiry);
    const double sd_d = std::sqrt(p.delta);
    parallel_chunks(n, par, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto [z1, z2] = rng.normal_pair(i);
            out[i].w_T = sd_T * z1;
            out[i].w_Tdelta = out[i].w_T + sd_d * z2;
        }
    });
    return out;
}

}  // namespace qhedge
