#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qhedge/measure.hpp"
#include "qhedge/solver.hpp"
#include "qhedge/tree.hpp"
#include "qhedge/tree_io.hpp"

namespace qhedge {

/// Everything a table or hedge run needs. Signal levels and intervals are in
/// stock-price units of S_{T+delta}.
struct RunConfig {
    ModelParams model;
    SignalKind kind = SignalKind::PointValue;
    std::vector<double> levels{105, 106, 107, 108, 109, 110, 111, 112, 113, 114, 115};
    std::vector<std::pair<double, double>> intervals{{109, 111}, {108, 112}, {107, 113}, {112, 114}, {106, 108}};
    int observed = 1;
    std::vector<double> epsilons{0.01, 0.05, 0.10, 0.15, 0.20, 0.25};
    std::optional<double> alpha;  // hedge command: budget target instead of epsilon
    ConditioningMode mode = ConditioningMode::BridgeExact;
    std::size_t n_paths = 1'000'000;
    std::uint64_t seed = 42;
    std::string output_path;
    std::string output_format = "csv";
    unsigned threads = 0;
    double acceptance_floor = 1e-4;

    std::vector<SignalSpec> signal_grid() const {
        std::vector<SignalSpec> grid;
        if (kind == SignalKind::PointValue)
            for (double level : levels) grid.push_back(SignalSpec::point_at_price(level, model));
        else
            for (const auto& [lo, hi] : intervals) grid.push_back(SignalSpec::interval_at_prices(lo, hi, observed, model));
        return grid;
    }

    void validate() const {
        model.validate();
        if (n_paths < 1000) throw std::invalid_argument("n_paths must be >= 1000");
        if (kind == SignalKind::PointValue && levels.empty()) throw std::invalid_argument("signal.levels is empty");
        if (kind == SignalKind::IntervalIndicator && intervals.empty())
            throw std::invalid_argument("signal.intervals is empty");
        if (epsilons.empty()) throw std::invalid_argument("epsilons is empty");
        for (double e : epsilons)
            if (!(e >= 0 && e <= 1)) throw std::invalid_argument("epsilon outside [0,1]");
        if (alpha && !(*alpha >= 0 && *alpha <= 1)) throw std::invalid_argument("alpha outside [0,1]");
        if (output_format != "csv" && output_format != "json") throw std::invalid_argument("format must be csv or json");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep))
        if (!trim(item).empty()) out.push_back(trim(item));
    return out;
}

inline double to_number(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
    return x;
}

inline std::vector<double> to_numbers(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split(v, ',')) out.push_back(to_number(key, item));
    return out;
}

}  // namespace detail

/// Applies one `key = value` setting. Shared by config files and CLI flags.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = detail::trim(raw);
    auto num = [&] { return detail::to_number(key, v); };
    if (key == "mu") c.model.mu = num();
    else if (key == "sigma") c.model.sigma = num();
    else if (key == "s0") c.model.s0 = num();
    else if (key == "strike") c.model.strike = num();
    else if (key == "t_expiry") c.model.t_expiry = num();
    else if (key == "delta") c.model.delta = num();
    else if (key == "signal.kind") {
        if (v == "point") c.kind = SignalKind::PointValue;
        else if (v == "interval") c.kind = SignalKind::IntervalIndicator;
        else throw std::invalid_argument("signal.kind must be point or interval");
    } else if (key == "signal.levels") c.levels = detail::to_numbers(key, v);
    else if (key == "signal.intervals") {
        // "109:111, 108:112"
        c.intervals.clear();
        for (const auto& item : detail::split(v, ',')) {
            const auto parts = detail::split(item, ':');
            if (parts.size() != 2) throw std::invalid_argument("signal.intervals entries look like lo:hi");
            c.intervals.emplace_back(detail::to_number(key, parts[0]), detail::to_number(key, parts[1]));
        }
    } else if (key == "signal.observed") {
        const double o = num();
        if (o != 0 && o != 1) throw std::invalid_argument("signal.observed must be 0 or 1");
        c.observed = static_cast<int>(o);
    } else if (key == "epsilons") c.epsilons = detail::to_numbers(key, v);
    else if (key == "alpha") c.alpha = num();
    else if (key == "mode") c.mode = parse_mode(v);
    else if (key == "n_paths") c.n_paths = static_cast<std::size_t>(num());
    else if (key == "seed") c.seed = std::stoull(v);
    else if (key == "output") c.output_path = v;
    else if (key == "format") c.output_format = v;
    else if (key == "threads") c.threads = static_cast<unsigned>(num());
    else if (key == "acceptance_floor") c.acceptance_floor = num();
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

/// Flat `key = value` text; '#' starts a comment.
inline void load_config(RunConfig& c, std::istream& is) {
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        apply_setting(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    load_config(c, in);
}

struct CellResult {
    std::string signal;
    double epsilon = 0;
    double alpha = 0;
    double alpha_stderr = 0;
    double success_prob = 0;
    double k = 0;
    std::size_t n_paths = 0;
    ConditioningMode mode = ConditioningMode::BridgeExact;
    std::vector<std::string> flags;
    double runtime_ms = 0;  // diagnostic only, never serialized

    bool has_flag(const std::string& f) const {
        return std::find(flags.begin(), flags.end(), f) != flags.end();
    }
};

namespace detail {

inline std::uint64_t cell_seed(std::uint64_t seed, std::size_t signal_index) {
    return CounterStream::mix(seed ^ CounterStream::mix(0xC0FFEEull + signal_index));
}

inline std::vector<CellResult> solve_cells(const ConditionalBatch& batch, const RunConfig& c, double build_ms) {
    std::vector<CellResult> cells;
    const auto start = std::chrono::steady_clock::now();
    const SortedLaw law(batch);
    for (double eps : c.epsilons) {
        const auto plan = make_hedge_plan(law, batch.e_qg_h, HedgeTarget::epsilon(eps));
        CellResult r;
        r.signal = batch.signal.describe();
        r.epsilon = eps;
        r.alpha = plan.alpha;
        r.alpha_stderr = plan.mc_stderr_alpha;
        r.success_prob = plan.success_prob;
        r.k = plan.k;
        r.n_paths = batch.n;
        r.mode = batch.mode;
        if (plan.below_se_floor()) r.flags.push_back("below_se_floor");
        if (!plan.target_attained_exactly) r.flags.push_back("atom_at_target");
        r.runtime_ms = build_ms + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        cells.push_back(std::move(r));
    }
    return cells;
}

inline std::vector<CellResult> failed_cells(const SignalSpec& s, const RunConfig& c, ConditioningMode mode,
                                            const std::string& flag) {
    std::vector<CellResult> cells;
    for (double eps : c.epsilons) {
        CellResult r;
        r.signal = s.describe();
        r.epsilon = eps;
        r.alpha = r.alpha_stderr = r.success_prob = r.k = std::nan("");
        r.n_paths = 0;
        r.mode = mode;
        r.flags.push_back(flag);
        cells.push_back(std::move(r));
    }
    return cells;
}

}  // namespace detail

/// Point-signal table, one batch per (level, mode) reused across the epsilon
/// grid. Both conditioning modes are run; cells come out level-major, then
/// mode (bridge_exact first), then epsilon.
inline std::vector<CellResult> run_table_point(const RunConfig& c) {
    c.validate();
    if (c.kind != SignalKind::PointValue) throw std::invalid_argument("run_table_point: config is not a point signal grid");
    const Parallelism par{c.threads};
    std::vector<CellResult> out;
    const auto grid = c.signal_grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (auto mode : {ConditioningMode::BridgeExact, ConditioningMode::PaperShift}) {
            const auto start = std::chrono::steady_clock::now();
            const auto batch = build_batch(grid[i], mode, c.n_paths, c.model, detail::cell_seed(c.seed, i), par);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            for (auto& cell : detail::solve_cells(batch, c, ms)) out.push_back(std::move(cell));
        }
    }
    return out;
}

/// Interval-indicator table by rejection sampling to n accepted paths per interval.
inline std::vector<CellResult> run_table_indicator(const RunConfig& c) {
    c.validate();
    if (c.kind != SignalKind::IntervalIndicator)
        throw std::invalid_argument("run_table_indicator: config is not an interval grid");
    const Parallelism par{c.threads};
    std::vector<CellResult> out;
    const auto grid = c.signal_grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::vector<CellResult> cells;
        try {
            const auto start = std::chrono::steady_clock::now();
            const auto batch = build_batch(grid[i], ConditioningMode::BridgeExact, c.n_paths, c.model,
                                           detail::cell_seed(c.seed, i), par, c.acceptance_floor);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            cells = detail::solve_cells(batch, c, ms);
        } catch (const AcceptanceRateError&) {
            cells = detail::failed_cells(grid[i], c, ConditioningMode::BridgeExact, "acceptance_below_floor");
        }
        for (auto& cell : cells) out.push_back(std::move(cell));
    }
    return out;
}

/// Cells whose bridge_exact and paper_shift alphas differ by more than
/// `sigmas` combined standard errors.
struct ModeDisagreement {
    std::string signal;
    double epsilon = 0;
    double alpha_bridge = 0;
    double alpha_shift = 0;
    double combined_stderr = 0;
};

inline std::vector<ModeDisagreement> mode_disagreements(const std::vector<CellResult>& cells, double sigmas = 3.0) {
    std::vector<ModeDisagreement> out;
    std::map<std::pair<std::string, double>, const CellResult*> bridge;
    for (const auto& c : cells)
        if (c.mode == ConditioningMode::BridgeExact) bridge[{c.signal, c.epsilon}] = &c;
    for (const auto& c : cells) {
        if (c.mode != ConditioningMode::PaperShift) continue;
        const auto it = bridge.find({c.signal, c.epsilon});
        if (it == bridge.end()) continue;
        const auto& b = *it->second;
        const double se = std::hypot(b.alpha_stderr, c.alpha_stderr);
        if (std::abs(b.alpha - c.alpha) > sigmas * se) out.push_back({c.signal, c.epsilon, b.alpha, c.alpha, se});
    }
    return out;
}

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

namespace detail {

inline std::string join_flags(const std::vector<std::string>& flags) {
    std::string s;
    for (const auto& f : flags) s += (s.empty() ? "" : ";") + f;
    return s;
}

inline nlohmann::json json_number(double x) {
    if (!std::isfinite(x)) return nullptr;
    return std::stod(format_number(x));
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<CellResult>& cells) {
    os << "signal,epsilon,alpha,alpha_stderr,success_prob,k,n_paths,mode,flags\n";
    for (const auto& c : cells)
        os << c.signal << ',' << format_number(c.epsilon) << ',' << format_number(c.alpha) << ','
           << format_number(c.alpha_stderr) << ',' << format_number(c.success_prob) << ',' << format_number(c.k)
           << ',' << c.n_paths << ',' << to_string(c.mode) << ',' << detail::join_flags(c.flags) << '\n';
}

inline void write_json(std::ostream& os, const std::vector<CellResult>& cells) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cells) {
        arr.push_back({{"signal", c.signal},
                       {"epsilon", detail::json_number(c.epsilon)},
                       {"alpha", detail::json_number(c.alpha)},
                       {"alpha_stderr", detail::json_number(c.alpha_stderr)},
                       {"success_prob", detail::json_number(c.success_prob)},
                       {"k", detail::json_number(c.k)},
                       {"n_paths", c.n_paths},
                       {"mode", to_string(c.mode)},
                       {"flags", c.flags}});
    }
    os << arr.dump(2) << '\n';
}

inline void write_cells(std::ostream& os, const std::vector<CellResult>& cells, const std::string& format) {
    if (format == "json")
        write_json(os, cells);
    else
        write_csv(os, cells);
}

/// Human-readable grid for one mode: rows epsilon, columns signal. Cells at
/// or below two standard errors print as "<x".
inline void print_grid(std::ostream& os, const std::vector<CellResult>& cells, ConditioningMode mode) {
    std::vector<std::string> signals;
    std::vector<double> eps;
    std::map<std::pair<std::string, double>, const CellResult*> at;
    for (const auto& c : cells) {
        if (c.mode != mode) continue;
        if (std::find(signals.begin(), signals.end(), c.signal) == signals.end()) signals.push_back(c.signal);
        if (std::find(eps.begin(), eps.end(), c.epsilon) == eps.end()) eps.push_back(c.epsilon);
        at[{c.signal, c.epsilon}] = &c;
    }
    if (signals.empty()) return;
    char buf[64];
    os << "alpha (" << to_string(mode) << ")\n";
    std::snprintf(buf, sizeof buf, "%-6s", "eps");
    os << buf;
    for (const auto& s : signals) {
        std::snprintf(buf, sizeof buf, " %16s", s.c_str());
        os << buf;
    }
    os << '\n';
    for (double e : eps) {
        std::snprintf(buf, sizeof buf, "%-6.2f", e);
        os << buf;
        for (const auto& s : signals) {
            const auto it = at.find({s, e});
            std::string cell = "-";
            if (it != at.end()) {
                const auto& c = *it->second;
                if (std::isnan(c.alpha))
                    cell = "n/a";
                else if (c.has_flag("below_se_floor")) {
                    std::snprintf(buf, sizeof buf, "<%.4f", std::max(2 * c.alpha_stderr, 1.0 / c.n_paths));
                    cell = buf;
                } else {
                    std::snprintf(buf, sizeof buf, "%.4f", c.alpha);
                    cell = buf;
                }
            }
            std::snprintf(buf, sizeof buf, " %16s", cell.c_str());
            os << buf;
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Tree oracle suite

struct OracleInstanceResult {
    std::string name;
    bool passed = true;
    std::vector<std::string> failures;
};

struct OracleReport {
    std::vector<OracleInstanceResult> instances;
    bool negative_control_detected = false;
    std::string negative_control_detail;
    bool nonexistence_flagged = false;

    bool passed() const {
        return negative_control_detected && nonexistence_flagged &&
               std::all_of(instances.begin(), instances.end(), [](const auto& r) { return r.passed; });
    }
};

/// Every exact check on one market: theorem identities, the Q*/P
/// representation of alpha, exhaustive optimality in both problem
/// directions at every attainable level, and replication of H and of each
/// knockout claim.
template <class Scalar>
OracleInstanceResult check_market(const std::string& name, const tree::TreeMarket<Scalar>& market) {
    using namespace tree;
    OracleInstanceResult r{name, true, {}};
    auto fail = [&](const std::string& what) {
        r.passed = false;
        r.failures.push_back(what);
    };
    const auto table = build_atom_table(market);
    const auto report = verify_theorems(table);
    for (const auto& c : report.checks)
        if (!c.passed) fail(c.name + ": " + c.detail);

    const auto strategy = replicate_on_tree(market, payoff_target(market));
    if (auto err = check_strategy(market, strategy, payoff_target(market))) fail("replicate H: " + *err);
    Scalar e_qf(0);
    for (std::uint32_t path = 0; path < table.q_f.size(); ++path) e_qf += table.q_f[path] * market.payoff_at(path);
    if (!same(strategy.initial_capital(), e_qf) || !same(e_qf, table.e_qg_h)) fail("perfect hedge cost != E_QF H");

    for (int g : table.signal_values) {
        const auto gs = std::to_string(g);
        const auto law = conditional_law(table, g);
        for (const auto& level : threshold_levels(law)) {
            const auto by_alpha = exact_quantile_hedge(table, g, TargetKind::Alpha, level.alpha);
            if (!by_alpha.exact) fail("G=" + gs + ": attainable alpha level not solved exactly");
            if (!same(exhaustive_max_success(table, g, level.alpha), by_alpha.success_prob))
                fail("G=" + gs + ": threshold success probability is not the enumerated maximum");
            const Scalar eps = Scalar(1) - level.success_prob;
            const auto by_eps = exact_quantile_hedge(table, g, TargetKind::Epsilon, eps);
            if (!by_eps.exact) fail("G=" + gs + ": attainable epsilon level not solved exactly");
            if (!same(exhaustive_min_capital(table, g, eps), by_eps.alpha))
                fail("G=" + gs + ": threshold alpha is not the enumerated minimum");
            if (!same(qstar_conditional(table, g, by_eps.success_set), by_eps.alpha))
                fail("G=" + gs + ": Q*(D<=k|G) != E_P[D 1{D<=k}|G]");

            const auto target = knockout_target(table, g, by_eps.k);
            const auto ko = replicate_on_tree(market, target);
            if (auto err = check_strategy(market, ko, target)) fail("G=" + gs + ": knockout replication: " + *err);
            if (!same(ko.initial_capital(), by_eps.alpha * table.e_qg_h))
                fail("G=" + gs + ": knockout hedge cost != alpha E_QG H");
        }
    }
    return r;
}

inline OracleReport run_oracle_suite(std::uint64_t seed, std::size_t instance_count) {
    using namespace tree;
    if (instance_count < 1) throw std::invalid_argument("run_oracle_suite: instance_count must be >= 1");
    OracleReport report;
    const auto ref = reference_market<Rational>();
    report.instances.push_back(check_market("reference", ref));
    report.instances.push_back(check_market("reference(double)", reference_market<double>()));
    for (std::size_t i = 0; i < instance_count; ++i) {
        const auto m = random_market(seed + i);
        report.instances.push_back(check_market("random#" + std::to_string(i), m));
    }

    auto mutated = build_atom_table(ref);
    mutated.atoms.front().qg_density += Rational(1, 1000000);
    if (const auto failure = verify_theorems(mutated).first_failure()) {
        report.negative_control_detected = true;
        report.negative_control_detail = failure->name + ": " + failure->detail;
    }

    const auto table = build_atom_table(ref);
    report.nonexistence_flagged = !exact_quantile_hedge(table, 1, TargetKind::Epsilon, Rational(1, 4)).exact;
    return report;
}

inline void print_oracle_report(std::ostream& os, const OracleReport& r) {
    for (const auto& inst : r.instances) {
        os << (inst.passed ? "PASS " : "FAIL ") << inst.name << '\n';
        for (const auto& f : inst.failures) os << "     " << f << '\n';
    }
    os << (r.negative_control_detected ? "PASS " : "FAIL ") << "negative control detected"
       << (r.negative_control_detected ? " (" + r.negative_control_detail + ")" : "") << '\n';
    os << (r.nonexistence_flagged ? "PASS " : "FAIL ") << "reference G=1 eps=1/4 flagged as having no exact threshold\n";
    os << (r.passed() ? "oracle suite passed" : "oracle suite FAILED") << '\n';
}

}  // namespace qhedge
