// qhedge: quantile hedging for an insider in the Black-Scholes model.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qhedge/qhedge.hpp"

namespace {

constexpr const char* kConfigEnv = "QHEDGE_CONFIG";

// Config keys that can be given as --flags; the flag name is the key with '.' -> '-'.
const std::vector<std::string> kKeys = {"mu",          "sigma",           "s0",       "strike",   "t_expiry",
                                        "delta",       "signal.kind",     "signal.levels",        "signal.intervals",
                                        "signal.observed", "epsilons",    "alpha",    "mode",     "n_paths",
                                        "seed",        "output",          "format",   "threads",  "acceptance_floor"};

struct Settings {
    std::string config_path;
    std::map<std::string, std::string> flags;
    std::vector<std::string> sets;  // key=value
};

void add_settings(CLI::App* cmd, Settings& s) {
    cmd->add_option("-c,--config", s.config_path, std::string("config file (default: $") + kConfigEnv + ")");
    for (const auto& key : kKeys) {
        std::string flag = "--" + key;
        for (auto& ch : flag)
            if (ch == '.' || ch == '_') ch = '-';
        cmd->add_option(flag, s.flags[key], "overrides config key " + key);
    }
    cmd->add_option("--set", s.sets, "key=value config override (repeatable)");
}

qhedge::RunConfig resolve(const Settings& s, qhedge::RunConfig c = {}) {
    std::string path = s.config_path;
    if (path.empty())
        if (const char* env = std::getenv(kConfigEnv)) path = env;
    if (!path.empty()) qhedge::load_config_file(c, path);
    for (const auto& key : kKeys) {
        const auto it = s.flags.find(key);
        if (it != s.flags.end() && !it->second.empty()) qhedge::apply_setting(c, key, it->second);
    }
    for (const auto& kv : s.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        qhedge::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

template <class Write>
void emit(const qhedge::RunConfig& c, Write&& write) {
    if (c.output_path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(c.output_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + c.output_path + "'");
    write(out);
}

int run_table(const qhedge::RunConfig& c, bool point) {
    const auto cells = point ? qhedge::run_table_point(c) : qhedge::run_table_indicator(c);
    emit(c, [&](std::ostream& os) { qhedge::write_cells(os, cells, c.output_format); });
    if (point) {
        qhedge::print_grid(std::cerr, cells, qhedge::ConditioningMode::BridgeExact);
        qhedge::print_grid(std::cerr, cells, qhedge::ConditioningMode::PaperShift);
        const auto diff = qhedge::mode_disagreements(cells);
        std::cerr << diff.size() << " cells where bridge_exact and paper_shift differ by > 3 combined stderr\n";
        for (const auto& d : diff)
            std::cerr << "  " << d.signal << " eps=" << qhedge::format_number(d.epsilon)
                      << " bridge=" << qhedge::format_number(d.alpha_bridge)
                      << " shift=" << qhedge::format_number(d.alpha_shift)
                      << " se=" << qhedge::format_number(d.combined_stderr) << '\n';
    } else {
        qhedge::print_grid(std::cerr, cells, qhedge::ConditioningMode::BridgeExact);
    }
    return 0;
}

int run_hedge(qhedge::RunConfig c, const std::string& level, const std::string& interval, const std::string& epsilon) {
    if (!level.empty()) qhedge::apply_setting(c, "signal.kind", "point"), qhedge::apply_setting(c, "signal.levels", level);
    if (!interval.empty())
        qhedge::apply_setting(c, "signal.kind", "interval"), qhedge::apply_setting(c, "signal.intervals", interval);
    if (!epsilon.empty()) qhedge::apply_setting(c, "epsilons", epsilon);
    c.validate();
    const auto signal = c.signal_grid().front();
    const auto target = c.alpha ? qhedge::HedgeTarget::alpha(*c.alpha) : qhedge::HedgeTarget::epsilon(c.epsilons.front());
    const auto batch = qhedge::build_batch(signal, c.mode, c.n_paths, c.model, qhedge::detail::cell_seed(c.seed, 0),
                                           qhedge::Parallelism{c.threads}, c.acceptance_floor);
    const auto plan = qhedge::make_hedge_plan(batch, target);
    using qhedge::detail::json_number;
    nlohmann::json j = {{"signal", signal.describe()},
                        {"mode", qhedge::to_string(c.mode)},
                        {"n_paths", c.n_paths},
                        {"k", json_number(plan.k)},
                        {"alpha", json_number(plan.alpha)},
                        {"alpha_stderr", json_number(plan.mc_stderr_alpha)},
                        {"success_prob", json_number(plan.success_prob)},
                        {"success_stderr", json_number(plan.mc_stderr_success)},
                        {"perfect_hedge_price", json_number(batch.e_qg_h)},
                        {"initial_capital", json_number(plan.initial_capital)},
                        {"knockout_payoff", plan.knockout_payoff},
                        {"target_attained_exactly", plan.target_attained_exactly},
                        {"warnings", plan.warnings}};
    if (plan.epsilon_target) j["epsilon_target"] = json_number(*plan.epsilon_target);
    if (plan.alpha_target) j["alpha_target"] = json_number(*plan.alpha_target);
    emit(c, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile hedging for an insider in the Black-Scholes model"};
    app.require_subcommand(1);

    Settings price_s, hedge_s, point_s, ind_s;
    auto* price = app.add_subcommand("price", "closed-form call price (zero rate)");
    add_settings(price, price_s);

    auto* hedge = app.add_subcommand("hedge", "quantile hedge for one signal and one epsilon or alpha target");
    add_settings(hedge, hedge_s);
    std::string level, interval, epsilon;
    hedge->add_option("--level", level, "point signal: S_{T+delta} level");
    hedge->add_option("--interval", interval, "indicator signal: lo:hi for S_{T+delta}");
    hedge->add_option("--epsilon", epsilon, "shortfall probability target");

    auto* point = app.add_subcommand("table-point", "alpha table for point signals, both conditioning modes");
    add_settings(point, point_s);
    auto* ind = app.add_subcommand("table-indicator", "alpha table for interval-indicator signals");
    add_settings(ind, ind_s);

    auto* oracle = app.add_subcommand("oracle", "exact verification suite on binomial trees");
    std::uint64_t oracle_seed = 1;
    std::size_t instances = 100;
    bool quiet = false;
    oracle->add_option("--seed", oracle_seed, "first random-market seed");
    oracle->add_option("--instances", instances, "number of random markets")->check(CLI::PositiveNumber);
    oracle->add_flag("-q,--quiet", quiet, "print the summary only");
    std::string dump_market;
    oracle->add_option("--dump-market", dump_market, "write random market #0 in text form and exit");

    app.add_subcommand("version", "print version");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("version")) {
            std::cout << "qhedge " << QHEDGE_VERSION << '\n';
            return 0;
        }
        if (app.got_subcommand(price)) {
            auto c = resolve(price_s);
            c.model.validate();
            emit(c, [&](std::ostream& os) { os << qhedge::format_number(qhedge::bs_call_price(c.model)) << '\n'; });
            return 0;
        }
        if (app.got_subcommand(hedge)) return run_hedge(resolve(hedge_s), level, interval, epsilon);
        if (app.got_subcommand(point)) return run_table(resolve(point_s), true);
        if (app.got_subcommand(ind)) {
            qhedge::RunConfig base;
            base.kind = qhedge::SignalKind::IntervalIndicator;
            return run_table(resolve(ind_s, base), false);
        }
        if (app.got_subcommand(oracle)) {
            if (!dump_market.empty()) {
                std::ofstream out(dump_market);
                qhedge::tree::write_market(out, qhedge::tree::random_market(oracle_seed));
                return out ? 0 : 1;
            }
            const auto report = qhedge::run_oracle_suite(oracle_seed, instances);
            if (quiet)
                std::cout << (report.passed() ? "oracle suite passed" : "oracle suite FAILED") << '\n';
            else
                qhedge::print_oracle_report(std::cout, report);
            return report.passed() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
