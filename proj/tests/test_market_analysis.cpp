#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "json.hpp"

#include "emx/market_analysis.hpp"
#include "emx/record_io.hpp"
#include "support.hpp"

using namespace emx;
using testsupport::error_code_of;

namespace {

DiagramsByDay real_diagrams(const MonthRecord& rec) {
    DiagramsByDay d;
    const Scaling s = month_standard_scaling(rec);
    for (int day = 2; day <= static_cast<int>(rec.days.size()); ++day)
        d[day] = compute_persistence(cech_filtration(build_point_cloud(rec, day, s)));
    return d;
}

PersistencePair cavity(double robustness) {
    PersistencePair p;
    p.dim = 1;
    p.birth = 0.1;
    p.death = 0.1 + robustness;
    p.robustness = robustness;
    return p;
}

std::map<TokenKind, Hypergraph> graphs_of(const MonthRecord& rec) {
    std::map<TokenKind, Hypergraph> graphs;
    for (TokenKind k : kTokenKinds) {
        std::vector<ClearingResult> results;
        for (const DayRecord& d : rec.days) results.push_back(d.results.at(k));
        graphs[k] = build_hypergraph(results, k);
    }
    return graphs;
}

ContingencyTable table_from(std::int64_t tx_nocav, std::int64_t notx_nocav, std::int64_t tx_cav,
                            std::int64_t notx_cav) {
    // route through label counting rather than struct fields, so the
    // bucketing logic is covered too
    std::vector<DayLabel> labels;
    auto add = [&](std::int64_t n, bool tx, bool cav) {
        for (std::int64_t i = 0; i < n; ++i)
            labels.push_back(DayLabel{static_cast<int>(labels.size() + 2), tx, cav});
    };
    add(tx_nocav, true, false);
    add(notx_nocav, false, false);
    add(tx_cav, true, true);
    add(notx_cav, false, true);
    return contingency(labels);
}

} // namespace

TEST_CASE("days are labeled by trade volume and robust cavities") {
    MonthRecord rec = testsupport::scripted_month();
    DiagramsByDay diagrams = real_diagrams(rec);

    auto labels = label_days(rec, diagrams, 0.25);
    REQUIRE(labels.size() == 3); // days 2..4
    CHECK(labels[0].day == 2);
    CHECK(labels[0].has_transactions);  // 5 UPX traded
    CHECK(labels[1].has_transactions);  // 2 SPX traded
    CHECK(!labels[2].has_transactions); // day 4 saw no volume
    // two-point clouds cannot hold a cavity
    for (const DayLabel& l : labels) CHECK(!l.has_robust_cavity);

    // planting a robust cavity in one diagram flips exactly that label
    diagrams[3].push_back(cavity(0.5));
    auto relabeled = label_days(rec, diagrams, 0.25);
    CHECK(!relabeled[0].has_robust_cavity);
    CHECK(relabeled[1].has_robust_cavity);
    CHECK(!relabeled[2].has_robust_cavity);
    // the same diagram does not count once theta exceeds its robustness
    auto strict = label_days(rec, diagrams, 0.75);
    CHECK(!strict[1].has_robust_cavity);

    diagrams.erase(3);
    CHECK(error_code_of([&] { label_days(rec, diagrams, 0.25); }) == Errc::MissingDiagram);
}

TEST_CASE("the contingency table counts each label bucket") {
    ContingencyTable t = table_from(4, 2, 8, 5);
    CHECK(t.n_tx_nocav == 4);
    CHECK(t.n_notx_nocav == 2);
    CHECK(t.n_tx_cav == 8);
    CHECK(t.n_notx_cav == 5);
    CHECK(t.total() == 19);

    ActivityRatios r = activity_ratios(t);
    REQUIRE(r.with_tx.has_value());
    REQUIRE(r.without_tx.has_value());
    CHECK(*r.with_tx == doctest::Approx(2.0));
    CHECK(*r.without_tx == doctest::Approx(2.5));

    Association a = association(t);
    REQUIRE(a.odds_ratio.has_value());
    CHECK(*a.odds_ratio == doctest::Approx(0.8).epsilon(1e-12));
    REQUIRE(a.fisher_p.has_value());
    // the observed table is the modal one, so every table counts
    CHECK(*a.fisher_p == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fisher p-values match externally computed references") {
    // perfectly separated 10/10: p = 2 / C(20,10)
    Association sep = association(table_from(0, 10, 10, 0));
    REQUIRE(sep.fisher_p.has_value());
    CHECK(*sep.fisher_p == doctest::Approx(1.082508822446903e-05).epsilon(1e-9));
    CHECK(!sep.odds_ratio.has_value()); // division by zero

    // the classic 3/1/1/3 tea-tasting table: p = 17/35
    Association tea = association(table_from(1, 3, 3, 1));
    REQUIRE(tea.fisher_p.has_value());
    CHECK(*tea.fisher_p == doctest::Approx(17.0 / 35.0).epsilon(1e-9));
    REQUIRE(tea.odds_ratio.has_value());
    CHECK(*tea.odds_ratio == doctest::Approx(9.0).epsilon(1e-12));

    // p is a probability on any table
    std::uint64_t state = 5;
    for (int trial = 0; trial < 50; ++trial) {
        ContingencyTable t = table_from(static_cast<std::int64_t>(splitmix64(state) % 8),
                                        static_cast<std::int64_t>(splitmix64(state) % 8),
                                        static_cast<std::int64_t>(splitmix64(state) % 8),
                                        static_cast<std::int64_t>(splitmix64(state) % 8));
        Association a = association(t);
        if (t.total() == 0) {
            CHECK(!a.fisher_p.has_value());
            continue;
        }
        REQUIRE(a.fisher_p.has_value());
        CHECK(*a.fisher_p > 0.0);
        CHECK(*a.fisher_p <= 1.0);
        // swapping the table's rows leaves the two-sided p unchanged
        Association rows = association(ContingencyTable{t.n_notx_nocav, t.n_tx_nocav, t.n_notx_cav, t.n_tx_cav});
        CHECK(*rows.fisher_p == doctest::Approx(*a.fisher_p).epsilon(1e-9));
    }
}

TEST_CASE("empty margins disable the affected statistics") {
    ContingencyTable empty;
    ActivityRatios r = activity_ratios(empty);
    CHECK(!r.with_tx.has_value());
    CHECK(!r.without_tx.has_value());
    Association a = association(empty);
    CHECK(!a.odds_ratio.has_value());
    CHECK(!a.fisher_p.has_value());

    // zero cavities with trades: ratio defined (0), odds undefined
    ContingencyTable nocav = table_from(3, 2, 0, 0);
    ActivityRatios r2 = activity_ratios(nocav);
    REQUIRE(r2.with_tx.has_value());
    CHECK(*r2.with_tx == 0.0);
    CHECK(!association(nocav).odds_ratio.has_value());
    REQUIRE(association(nocav).fisher_p.has_value());
    CHECK(*association(nocav).fisher_p == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the report aggregates a full run into json, text and curves") {
    MonthRecord rec = testsupport::scripted_month();
    auto graphs = graphs_of(rec);
    DiagramsByDay diagrams = real_diagrams(rec);

    Report report = build_report(rec, graphs, diagrams, 0.25);

    const auto j = nlohmann::json::parse(report.json);
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("generator") == "emx 1.0.0");
    CHECK(j.at("run").at("seed") == 77);
    CHECK(j.at("run").at("days") == 4);
    CHECK(j.at("run").at("students") == 2);
    CHECK(j.at("run").at("theta") == doctest::Approx(0.25));
    CHECK(j.at("run").at("config_hash").get<std::string>().size() == 16);

    // market section mirrors the scripted trades
    const auto& market = j.at("market");
    REQUIRE(market.at("days").size() == 4);
    CHECK(market.at("days")[1].at("UPX").at("volume") == 5);
    CHECK(market.at("days")[1].at("UPX").at("price") == 10);
    CHECK(market.at("days")[2].at("SPX").at("volume") == 2);
    CHECK(market.at("days")[2].at("SPX").at("price") == 14);
    CHECK(market.at("days")[0].at("UPX").at("price").is_null());
    CHECK(market.at("totals").at("UPX") == 5);
    CHECK(market.at("totals").at("SPX") == 2);
    CHECK(market.at("totals").at("trading_days") == 2);

    // hypergraph section
    CHECK(j.at("hypergraphs").at("UPX").at("nodes") == 2);
    CHECK(j.at("hypergraphs").at("UPX").at("edges") == 1);
    CHECK(j.at("hypergraphs").at("UPX").at("admin_degree") == 0);
    CHECK(j.at("hypergraphs").at("UPX").at("cardinality_histogram").at("2") == 1);
    CHECK(j.at("hypergraphs").at("SPX").at("edges") == 1);

    // persistence and contingency
    CHECK(j.at("persistence").at("days").size() == 3);
    CHECK(j.at("persistence").at("robust_cavity_days") == 0);
    const auto& cont = j.at("contingency");
    CHECK(cont.at("theta") == doctest::Approx(0.25));
    CHECK(cont.at("tx_nocav") == 2);
    CHECK(cont.at("notx_nocav") == 1);
    CHECK(cont.at("tx_cav") == 0);
    CHECK(cont.at("notx_cav") == 0);
    CHECK(cont.at("coverage").at("labeled_days") == 3);
    CHECK(cont.at("coverage").at("eligible_days") == 3);
    CHECK(cont.at("coverage").at("first_day") == 2);
    CHECK(cont.at("coverage").at("last_day") == 4);

    REQUIRE(j.at("theta_sensitivity").size() == 3);
    CHECK(j.at("theta_sensitivity")[0].at("theta") == doctest::Approx(0.125));
    CHECK(j.at("theta_sensitivity")[2].at("theta") == doctest::Approx(0.5));

    // settlement passthrough
    CHECK(j.at("settlement").at("surplus_total") == rec.settlement.surplus_total);
    CHECK(j.at("settlement").at("residue") == rec.settlement.residue);
    CHECK(j.at("allocation_trims") == 0);

    // text report carries the headline sections
    CHECK(report.text.find("ENERGY TOKEN MARKET REPORT") != std::string::npos);
    CHECK(report.text.find("MARKET ACTIVITY") != std::string::npos);
    CHECK(report.text.find("CONTINGENCY") != std::string::npos);
    CHECK(report.text.find("SETTLEMENT") != std::string::npos);

    // curves: header plus five comma-separated fields per row, and the
    // scripted day-2 book contributes both sides
    std::istringstream curves(report.curves_csv);
    std::string line;
    REQUIRE(std::getline(curves, line));
    CHECK(line == "day,token,side,price,cumulative_qty");
    bool saw_demand = false, saw_supply = false;
    while (std::getline(curves, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
        if (line.rfind("2,UPX,demand,", 0) == 0) saw_demand = true;
        if (line.rfind("2,UPX,supply,", 0) == 0) saw_supply = true;
    }
    CHECK(saw_demand);
    CHECK(saw_supply);
}

TEST_CASE("theta sensitivity sweeps shrink as the threshold grows") {
    MonthRecord rec = testsupport::scripted_month();
    auto graphs = graphs_of(rec);
    DiagramsByDay diagrams = real_diagrams(rec);
    // cavities of graded robustness on the trading days (2, 3) and the quiet day (4)
    diagrams[2].push_back(cavity(0.2));
    diagrams[3].push_back(cavity(0.4));
    diagrams[4].push_back(cavity(0.6));

    Report report = build_report(rec, graphs, diagrams, 0.25);
    const auto j = nlohmann::json::parse(report.json);
    const auto& sens = j.at("theta_sensitivity");
    REQUIRE(sens.size() == 3);

    // theta 0.125 catches all three, 0.25 drops the 0.2 one, 0.5 keeps 0.6 only
    CHECK(sens[0].at("tx_cav") == 2);
    CHECK(sens[0].at("notx_cav") == 1);
    CHECK(sens[1].at("tx_cav") == 1);
    CHECK(sens[1].at("notx_cav") == 1);
    CHECK(sens[2].at("tx_cav") == 0);
    CHECK(sens[2].at("notx_cav") == 1);

    std::int64_t prev = -1;
    for (int i = 2; i >= 0; --i) {
        const std::int64_t cav = sens[i].at("tx_cav").get<std::int64_t>() +
                                 sens[i].at("notx_cav").get<std::int64_t>();
        CHECK(cav >= prev);
        prev = cav;
    }
}

TEST_CASE("inputs that cannot belong to the record are rejected") {
    MonthRecord rec = testsupport::scripted_month();
    auto graphs = graphs_of(rec);
    DiagramsByDay diagrams = real_diagrams(rec);

    // baseline is fine
    CHECK(!build_report(rec, graphs, diagrams, 0.25).json.empty());

    // diagram outside 2..last
    {
        DiagramsByDay bad = diagrams;
        bad[1] = {};
        CHECK(error_code_of([&] { build_report(rec, graphs, bad, 0.25); }) == Errc::InputMismatch);
        bad.erase(1);
        bad[5] = {};
        CHECK(error_code_of([&] { build_report(rec, graphs, bad, 0.25); }) == Errc::InputMismatch);
    }
    // hypergraph filed under the wrong token
    {
        auto bad = graphs;
        bad[TokenKind::SPX] = graphs.at(TokenKind::UPX);
        CHECK(error_code_of([&] { build_report(rec, bad, diagrams, 0.25); }) == Errc::InputMismatch);
    }
    // node that no account explains
    {
        auto bad = graphs;
        Hypergraph g;
        g.token = TokenKind::UPX;
        g.nodes = {"ghost"};
        bad[TokenKind::UPX] = g;
        CHECK(error_code_of([&] { build_report(rec, bad, diagrams, 0.25); }) == Errc::InputMismatch);
    }
    // edge on a day the record shows no trade for that token
    {
        auto bad = graphs;
        Hyperedge e;
        e.day = 4;
        e.members = {"s01", "s02"};
        e.contracted_order_count = 2;
        bad[TokenKind::UPX].edges.push_back(e);
        CHECK(error_code_of([&] { build_report(rec, bad, diagrams, 0.25); }) == Errc::InputMismatch);
    }
    // edge day outside the month entirely
    {
        auto bad = graphs;
        Hyperedge e;
        e.day = 9;
        e.members = {"s01"};
        bad[TokenKind::UPX].edges.push_back(e);
        CHECK(error_code_of([&] { build_report(rec, bad, diagrams, 0.25); }) == Errc::InputMismatch);
    }
}
