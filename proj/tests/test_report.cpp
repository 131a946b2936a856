#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "qhedge/report.hpp"

using namespace qhedge;

namespace {

RunConfig small_point_config() {
    RunConfig c;
    c.levels = {108, 110, 112};
    c.epsilons = {0.01, 0.10, 0.25};
    c.n_paths = 20000;
    c.seed = 3;
    return c;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
    RunConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.signal_grid().size(), 11u);
    c.kind = SignalKind::IntervalIndicator;
    EXPECT_EQ(c.signal_grid().size(), 5u);
}

TEST(Config, ParsesFlatFile) {
    RunConfig c;
    std::istringstream in(
        "# comment\n"
        "sigma = 0.3\n"
        "signal.kind = interval   # trailing comment\n"
        "signal.intervals = 109:111, 112:114\n"
        "signal.observed = 0\n"
        "epsilons = 0.05,0.2\n"
        "mode = paper_shift\n"
        "n_paths = 5000\n"
        "seed = 99\n"
        "threads = 2\n"
        "format = json\n");
    load_config(c, in);
    EXPECT_DOUBLE_EQ(c.model.sigma, 0.3);
    EXPECT_EQ(c.kind, SignalKind::IntervalIndicator);
    ASSERT_EQ(c.intervals.size(), 2u);
    EXPECT_EQ(c.intervals[1].first, 112);
    EXPECT_EQ(c.observed, 0);
    EXPECT_EQ(c.epsilons, (std::vector<double>{0.05, 0.2}));
    EXPECT_EQ(c.mode, ConditioningMode::PaperShift);
    EXPECT_EQ(c.n_paths, 5000u);
    EXPECT_EQ(c.seed, 99u);
    EXPECT_EQ(c.threads, 2u);
    EXPECT_EQ(c.output_format, "json");
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBadInput) {
    RunConfig c;
    EXPECT_THROW(apply_setting(c, "nonsense", "1"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "sigma", "abc"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "signal.kind", "box"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "signal.intervals", "109-111"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "signal.observed", "2"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "mode", "sideways"), std::invalid_argument);
    std::istringstream no_eq("sigma 0.3\n");
    EXPECT_THROW(load_config(c, no_eq), std::invalid_argument);
    EXPECT_THROW(load_config_file(c, "/nonexistent/qhedge.cfg"), std::runtime_error);

    RunConfig v;
    v.n_paths = 10;
    EXPECT_THROW(v.validate(), std::invalid_argument);
    v = RunConfig{};
    v.epsilons = {1.5};
    EXPECT_THROW(v.validate(), std::invalid_argument);
    v = RunConfig{};
    v.output_format = "xml";
    EXPECT_THROW(v.validate(), std::invalid_argument);
    v = RunConfig{};
    v.model.sigma = -1;
    EXPECT_THROW(v.validate(), std::invalid_argument);
}

TEST(TablePoint, LayoutAndDeterminism) {
    auto c = small_point_config();
    c.threads = 1;
    const auto a = run_table_point(c);
    ASSERT_EQ(a.size(), 3u * 2u * 3u);
    EXPECT_EQ(a[0].mode, ConditioningMode::BridgeExact);
    EXPECT_EQ(a[3].mode, ConditioningMode::PaperShift);
    EXPECT_EQ(a[0].signal, a[3].signal);
    EXPECT_NE(a[0].signal, a[6].signal);
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        if (a[i].signal == a[i + 1].signal && a[i].mode == a[i + 1].mode) {
            EXPECT_GE(a[i].alpha, a[i + 1].alpha);
        }
    }
    for (const auto& cell : a) {
        EXPECT_EQ(cell.n_paths, 20000u);
        EXPECT_GE(cell.alpha, 0.0);
        EXPECT_LE(cell.alpha, 1.0);
    }

    c.threads = 3;
    std::ostringstream x, y;
    write_csv(x, a);
    write_csv(y, run_table_point(c));
    EXPECT_EQ(x.str(), y.str());
}

TEST(TableIndicator, ObservedZeroAndOne) {
    RunConfig c;
    c.kind = SignalKind::IntervalIndicator;
    c.intervals = {{109, 111}, {112, 114}};
    c.epsilons = {0.05};
    c.n_paths = 5000;
    const auto ones = run_table_indicator(c);
    ASSERT_EQ(ones.size(), 2u);
    EXPECT_EQ(ones[0].mode, ConditioningMode::BridgeExact);
    EXPECT_NE(ones[0].signal.find("G=1"), std::string::npos);
    c.observed = 0;
    const auto zeros = run_table_indicator(c);
    EXPECT_NE(zeros[0].signal.find("G=0"), std::string::npos);
}

TEST(TableIndicator, RareSignalIsFlaggedNotFatal) {
    RunConfig c;
    c.kind = SignalKind::IntervalIndicator;
    c.intervals = {{160, 161}};
    c.epsilons = {0.05, 0.1};
    c.n_paths = 1000;
    const auto cells = run_table_indicator(c);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_TRUE(cells[0].has_flag("acceptance_below_floor"));
    EXPECT_TRUE(std::isnan(cells[0].alpha));
    std::ostringstream json;
    write_json(json, cells);
    const auto parsed = nlohmann::json::parse(json.str());
    EXPECT_TRUE(parsed[0]["alpha"].is_null());
}

TEST(Output, CsvFormat) {
    CellResult r;
    r.signal = "S=110";
    r.epsilon = 0.05;
    r.alpha = 0.1834567891;
    r.alpha_stderr = 0.0012;
    r.success_prob = 0.95;
    r.k = 1.25;
    r.n_paths = 1000000;
    r.mode = ConditioningMode::PaperShift;
    r.flags = {"below_se_floor", "atom_at_target"};
    r.runtime_ms = 123;
    std::ostringstream os;
    write_csv(os, {r});
    EXPECT_EQ(os.str(),
              "signal,epsilon,alpha,alpha_stderr,success_prob,k,n_paths,mode,flags\n"
              "S=110,0.05,0.183457,0.0012,0.95,1.25,1000000,paper_shift,below_se_floor;atom_at_target\n");
}

TEST(Output, JsonFormat) {
    CellResult r;
    r.signal = "S in 109..111 G=1";
    r.epsilon = 0.1;
    r.alpha = 0.0873219;
    r.n_paths = 5000;
    std::ostringstream os;
    write_cells(os, {r}, "json");
    const auto j = nlohmann::json::parse(os.str());
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(j[0]["signal"], "S in 109..111 G=1");
    EXPECT_DOUBLE_EQ(j[0]["alpha"].get<double>(), 0.0873219);
    EXPECT_EQ(j[0]["mode"], "bridge_exact");
    EXPECT_FALSE(j[0].contains("runtime_ms"));
}

TEST(Output, GridRendersFloorCells) {
    CellResult a;
    a.signal = "S=105";
    a.epsilon = 0.25;
    a.alpha = 0.0001;
    a.alpha_stderr = 0.0002;
    a.n_paths = 1000;
    a.flags = {"below_se_floor"};
    CellResult b = a;
    b.signal = "S=110";
    b.alpha = 0.25;
    b.flags.clear();
    std::ostringstream os;
    print_grid(os, {a, b}, ConditioningMode::BridgeExact);
    EXPECT_NE(os.str().find("<0.0010"), std::string::npos);
    EXPECT_NE(os.str().find("0.2500"), std::string::npos);
    EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(ModeDisagreementTest, FlagsOnlySignificantGaps) {
    CellResult b;
    b.signal = "S=110";
    b.epsilon = 0.01;
    b.alpha = 0.27;
    b.alpha_stderr = 0.001;
    CellResult s = b;
    s.mode = ConditioningMode::PaperShift;
    s.alpha = 0.46;
    CellResult b2 = b, s2 = s;
    b2.epsilon = s2.epsilon = 0.05;
    s2.alpha = b2.alpha + 0.002;
    const auto d = mode_disagreements({b, s, b2, s2});
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].epsilon, 0.01);
    EXPECT_DOUBLE_EQ(d[0].alpha_shift, 0.46);
}

TEST(OracleSuite, PassesWithNegativeControl) {
    const auto report = run_oracle_suite(1, 10);
    EXPECT_EQ(report.instances.size(), 12u);
    EXPECT_TRUE(report.passed());
    EXPECT_TRUE(report.negative_control_detected);
    EXPECT_TRUE(report.nonexistence_flagged);
    std::ostringstream os;
    print_oracle_report(os, report);
    EXPECT_NE(os.str().find("oracle suite passed"), std::string::npos);
}
