#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qhedge/tree.hpp"

namespace qhedge::tree {

template <class Scalar>
std::string format_scalar(const Scalar& x) {
    return scalar_text(x);
}

/// Accepts decimals and "num/den" fractions for either scalar type.
template <class Scalar>
Scalar parse_scalar(const std::string& text) {
    const auto slash = text.find('/');
    if constexpr (std::is_floating_point_v<Scalar>) {
        if (slash != std::string::npos)
            return std::stod(text.substr(0, slash)) / std::stod(text.substr(slash + 1));
        return std::stod(text);
    } else {
        if (slash != std::string::npos) return Rational(text);
        // Exact decimal: "0.6" -> 3/5.
        const auto dot = text.find('.');
        if (dot == std::string::npos) return Rational(text);
        const std::string frac = text.substr(dot + 1);
        boost::multiprecision::cpp_int den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        const bool negative = !text.empty() && text[0] == '-';
        std::string digits = text.substr(0, dot) + frac;
        if (negative) digits = digits.substr(1);
        Rational r(boost::multiprecision::cpp_int(digits.empty() ? "0" : digits), den);
        return negative ? Rational(-r) : r;
    }
}

// Format, one item per line:
//   periods N / hedge_horizon T / u .. / d .. / p_up .. / s0 ..
//   payoff <ups> <value>        one per hedge-horizon node
//   signal <path> <g>           one per terminal path, path as a u/d string
template <class Scalar>
void write_market(std::ostream& os, const TreeMarket<Scalar>& m) {
    os << "periods " << m.periods << '\n'
       << "hedge_horizon " << m.hedge_horizon << '\n'
       << "u " << format_scalar(m.u) << '\n'
       << "d " << format_scalar(m.d) << '\n'
       << "p_up " << format_scalar(m.p_up) << '\n'
       << "s0 " << format_scalar(m.s0) << '\n';
    for (std::size_t j = 0; j < m.payoff.size(); ++j) os << "payoff " << j << ' ' << format_scalar(m.payoff[j]) << '\n';
    for (std::uint32_t path = 0; path < m.signal.size(); ++path)
        os << "signal " << path_name(path, m.periods) << ' ' << m.signal[path] << '\n';
}

template <class Scalar>
TreeMarket<Scalar> read_market(std::istream& is) {
    TreeMarket<Scalar> m;
    m.payoff.clear();
    m.signal.clear();
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw std::invalid_argument("tree market line " + std::to_string(line_no) + ": " + msg);
    };
    bool have_periods = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, a, b;
        ls >> key >> a;
        if (a.empty()) fail("missing value");
        if (key == "periods") {
            m.periods = std::stoi(a);
            if (m.periods < 1 || m.periods > kMaxPeriods) fail("periods out of range");
            m.signal.assign(1u << m.periods, 0);
            have_periods = true;
        } else if (key == "hedge_horizon") {
            m.hedge_horizon = std::stoi(a);
        } else if (key == "u") {
            m.u = parse_scalar<Scalar>(a);
        } else if (key == "d") {
            m.d = parse_scalar<Scalar>(a);
        } else if (key == "p_up") {
            m.p_up = parse_scalar<Scalar>(a);
        } else if (key == "s0") {
            m.s0 = parse_scalar<Scalar>(a);
        } else if (key == "payoff") {
            ls >> b;
            const auto j = static_cast<std::size_t>(std::stoul(a));
            if (m.payoff.size() <= j) m.payoff.resize(j + 1, Scalar(0));
            m.payoff[j] = parse_scalar<Scalar>(b);
        } else if (key == "signal") {
            ls >> b;
            if (!have_periods) fail("signal before periods");
            if (static_cast<int>(a.size()) != m.periods) fail("path length differs from periods");
            std::uint32_t path = 0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i] == 'u')
                    path |= 1u << i;
                else if (a[i] != 'd')
                    fail("path must use u/d");
            }
            m.signal[path] = std::stoi(b);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    m.validate();
    return m;
}

/// Random market with exact rational parameters: u = m/100 in (1.1, 3),
/// d = 1/u, p_up = j/100 in (0.2, 0.8), 2-4 periods, and a binary signal
/// 1{ups at the end in B} with B redrawn until equivalence holds.
inline TreeMarket<Rational> random_market(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return lo + rng() % (hi - lo + 1); };
    TreeMarket<Rational> m;
    m.periods = static_cast<int>(pick(2, 4));
    m.hedge_horizon = static_cast<int>(pick(1, m.periods - 1));
    m.u = Rational(static_cast<long>(pick(111, 299)), 100);
    m.d = Rational(1) / m.u;
    m.p_up = Rational(static_cast<long>(pick(21, 79)), 100);
    m.s0 = Rational(1);

    if (rng() % 4 == 0) {
        // Arbitrary nonnegative node payoff, positive on the top node.
        m.payoff.resize(m.hedge_horizon + 1);
        for (auto& h : m.payoff) h = Rational(static_cast<long>(pick(0, 5)), static_cast<long>(pick(1, 4)));
        m.payoff.back() += 1;
    } else {
        const int strike_node = static_cast<int>(pick(0, m.hedge_horizon - 1));
        m.payoff = call_payoff(m, m.s0 * power(m.u, strike_node) * power(m.d, m.hedge_horizon - strike_node));
    }

    const int window = m.periods - m.hedge_horizon;
    for (;;) {
        std::vector<int> ups;
        for (int j = 0; j <= m.periods; ++j)
            if (rng() % 2) ups.push_back(j);
        bool ok = true;
        for (int start = 0; start <= m.hedge_horizon && ok; ++start) {
            int hits = 0;
            for (int j = start; j <= start + window; ++j) hits += std::count(ups.begin(), ups.end(), j) ? 1 : 0;
            ok = hits > 0 && hits <= window;
        }
        if (ok) {
            m.signal = terminal_set_signal<Rational>(m.periods, ups);
            break;
        }
    }
    m.validate();
    return m;
}

/// Same market in floating point.
inline TreeMarket<double> to_double_market(const TreeMarket<Rational>& m) {
    TreeMarket<double> out;
    out.periods = m.periods;
    out.hedge_horizon = m.hedge_horizon;
    out.u = to_double(m.u);
    out.d = to_double(m.d);
    out.p_up = to_double(m.p_up);
    out.s0 = to_double(m.s0);
    for (const auto& h : m.payoff) out.payoff.push_back(to_double(h));
    out.signal = m.signal;
    return out;
}

}  // namespace qhedge::tree
