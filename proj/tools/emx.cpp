#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "emx/hypergraph.hpp"
#include "emx/market_analysis.hpp"
#include "emx/record_io.hpp"
#include "emx/simulator.hpp"
#include "emx/tda.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace emx;

namespace {

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::ParseError:
        case Errc::IoError:
        case Errc::MissingDiagram:
        case Errc::InputMismatch:
        case Errc::FixtureShapeMismatch:
        case Errc::DayOutOfRange:
            return 2;
        case Errc::InvalidOrder:
        case Errc::MixedTokenBook:
        case Errc::MixedTokens:
        case Errc::InsufficientTokens:
        case Errc::InsufficientCurrency:
        case Errc::InsufficientBalance:
        case Errc::UnknownAccount:
        case Errc::UnknownNode:
        case Errc::DuplicateAccount:
            return 4;
        default:
            return 3;
    }
}

ordered_json fill_json(const Fill& f) {
    ordered_json j;
    j["order_id"] = f.order_id;
    j["account"] = f.account;
    j["side"] = to_string(f.side);
    j["qty"] = f.qty;
    return j;
}

ordered_json result_json(const ClearingResult& r) {
    ordered_json j;
    j["token"] = to_string(r.token);
    j["day"] = r.day;
    j["price"] = r.price ? ordered_json(*r.price) : ordered_json(nullptr);
    j["volume"] = r.volume;
    ordered_json fills = ordered_json::array();
    for (const Fill& f : r.fills) fills.push_back(fill_json(f));
    j["fills"] = fills;
    j["rejected"] = r.rejected;
    return j;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
    Scenario scenario = load_scenario(config_path);
    MonthRecord record = simulate_month(scenario, seed);
    save_month_record(record, out_dir);
    std::cout << "run " << run_id(scenario, seed) << ": " << record.days.size() << " days, "
              << record.students.size() << " students -> " << out_dir << "\n";
    return 0;
}

int cmd_clear(const std::string& orders_path, const std::string& ledger_path, const std::string& out_path) {
    Ledger ledger;
    {
        std::istringstream in(read_text_file(ledger_path));
        ledger = load_ledger_log(in);
    }
    std::vector<Order> orders = parse_orders_jsonl(read_text_file(orders_path));

    int day = orders.empty() ? 1 : orders.front().day;
    for (const Order& o : orders)
        if (o.day != day)
            fail(Errc::ParseError, "orders span several days (" + std::to_string(day) + " and " +
                                       std::to_string(o.day) + "); clear handles one day");

    std::map<TokenKind, OrderBook> books;
    EscrowTracker escrow(ledger);
    for (const Order& o : orders) {
        auto [it, fresh] = books.try_emplace(o.token);
        if (fresh) {
            it->second.day = day;
            it->second.token = o.token;
        }
        escrow.validate_and_escrow(o);
        it->second.add(o);
    }

    ordered_json doc;
    doc["day"] = day;
    ordered_json results = ordered_json::array();
    for (const auto& [token, book] : books) {
        (void)token;
        results.push_back(result_json(clear(book)));
    }
    doc["results"] = results;
    std::string text = doc.dump(2) + "\n";
    if (!out_path.empty())
        write_text_file(out_path, text);
    else
        std::cout << text;
    return 0;
}

struct DayAnalysis {
    int day = 0;
    PointCloud cloud;
    std::vector<PersistencePair> pairs;
};

std::vector<DayAnalysis> analyze_days(const MonthRecord& record, int jobs) {
    const int last = static_cast<int>(record.days.size());
    std::vector<int> days;
    for (int d = 2; d <= last; ++d) days.push_back(d);
    std::vector<DayAnalysis> out(days.size());
    if (days.empty()) return out;

    Scaling scaling = month_standard_scaling(record);
    jobs = std::max(1, jobs);
    jobs = std::min<int>(jobs, static_cast<int>(days.size()));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= days.size() || failed.load()) break;
            try {
                DayAnalysis a;
                a.day = days[i];
                a.cloud = build_point_cloud(record, a.day, scaling);
                a.pairs = compute_persistence(cech_filtration(a.cloud));
                out[i] = std::move(a);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = std::current_exception();
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failed.load()) std::rethrow_exception(first_error);
    return out;
}

std::map<TokenKind, Hypergraph> build_graphs(const MonthRecord& record) {
    std::map<TokenKind, Hypergraph> graphs;
    for (TokenKind k : {TokenKind::UPX, TokenKind::SPX}) {
        std::vector<ClearingResult> results;
        for (const DayRecord& d : record.days) {
            auto it = d.results.find(k);
            if (it != d.results.end()) results.push_back(it->second);
        }
        graphs.emplace(k, build_hypergraph(results, k));
    }
    return graphs;
}

ordered_json contingency_json(const ContingencyTable& t, double theta) {
    ActivityRatios r = activity_ratios(t);
    Association assoc = association(t);
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json j;
    j["theta"] = theta;
    j["tx_cav"] = t.n_tx_cav;
    j["tx_nocav"] = t.n_tx_nocav;
    j["notx_cav"] = t.n_notx_cav;
    j["notx_nocav"] = t.n_notx_nocav;
    j["total"] = t.total();
    j["ratio_with_tx"] = opt(r.with_tx);
    j["ratio_without_tx"] = opt(r.without_tx);
    j["odds_ratio"] = opt(assoc.odds_ratio);
    j["fisher_p"] = opt(assoc.fisher_p);
    return j;
}

int run_analysis(const std::string& record_dir, double theta_flag, bool theta_set, const std::string& which,
                 int jobs, const std::string& out_flag) {
    MonthRecord record = load_month_record(record_dir);
    double theta = theta_set ? theta_flag : record.scenario.month.theta;
    std::string out_dir = out_flag.empty() ? (fs::path(record_dir) / "analysis").string() : out_flag;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(Errc::IoError, "cannot create " + out_dir + ": " + ec.message());

    bool want_hg = which == "hypergraph" || which == "all";
    bool want_tda = which == "tda" || which == "all";
    bool want_table = which == "table" || which == "all";
    bool want_report = which == "all" || which == "report";

    std::map<TokenKind, Hypergraph> graphs;
    if (want_hg || want_report) graphs = build_graphs(record);
    if (want_hg) {
        write_text_file((fs::path(out_dir) / "hypergraph_upx.json").string(),
                        hypergraph_to_json(graphs.at(TokenKind::UPX)));
        write_text_file((fs::path(out_dir) / "hypergraph_spx.json").string(),
                        hypergraph_to_json(graphs.at(TokenKind::SPX)));
    }

    DiagramsByDay diagrams;
    if (want_tda || want_table || want_report) {
        std::vector<DayAnalysis> per_day = analyze_days(record, jobs);
        for (const DayAnalysis& a : per_day) diagrams[a.day] = a.pairs;
        if (want_tda) {
            std::string diagram_csv = diagram_csv_header();
            std::string cloud_csv = cloud_csv_header();
            for (const DayAnalysis& a : per_day) {
                diagram_csv += diagram_rows(a.pairs, a.day);
                cloud_csv += cloud_rows(a.cloud);
            }
            write_text_file((fs::path(out_dir) / "diagrams.csv").string(), diagram_csv);
            write_text_file((fs::path(out_dir) / "pointclouds.csv").string(), cloud_csv);
        }
    }

    if (want_table) {
        ordered_json doc = contingency_json(contingency(label_days(record, diagrams, theta)), theta);
        ordered_json sweep = ordered_json::array();
        for (double t : {theta / 2, theta, theta * 2})
            sweep.push_back(contingency_json(contingency(label_days(record, diagrams, t)), t));
        doc["theta_sensitivity"] = sweep;
        write_text_file((fs::path(out_dir) / "contingency.json").string(), doc.dump(2) + "\n");
    }

    if (want_report) {
        Report report = build_report(record, graphs, diagrams, theta);
        write_text_file((fs::path(out_dir) / "report.json").string(), report.json);
        write_text_file((fs::path(out_dir) / "report.txt").string(), report.text);
        write_text_file((fs::path(out_dir) / "curves.csv").string(), report.curves_csv);
    }

    std::cout << "analysis (" << which << ", theta " << theta << ") -> " << out_dir << "\n";
    return 0;
}

int cmd_ingest(const std::string& meter_path, const std::string& orders_path, const std::string& out_dir) {
    if (meter_path.empty() && orders_path.empty())
        fail(Errc::ParseError, "ingest needs --meter and/or --orders");

    ordered_json summary;
    std::string meter_out, orders_out;

    if (!meter_path.empty()) {
        MeterData data = load_meter_csv(meter_path);
        std::vector<MeterRow> rows = data.rows;
        std::sort(rows.begin(), rows.end(), [](const MeterRow& a, const MeterRow& b) {
            return a.date != b.date ? a.date < b.date : a.user < b.user;
        });
        meter_out = "date,user_id,kwh\n";
        char buf[64];
        for (const MeterRow& r : rows) {
            std::snprintf(buf, sizeof buf, "%.6f", r.kwh);
            meter_out += r.date + "," + r.user + "," + buf + "\n";
        }
        ordered_json mj;
        mj["accepted"] = rows.size();
        ordered_json rej = ordered_json::array();
        for (const auto& [line, reason] : data.rejected) {
            ordered_json rj;
            rj["line"] = line;
            rj["reason"] = reason;
            rej.push_back(rj);
        }
        mj["rejected"] = rej;
        summary["meter"] = mj;
    }

    if (!orders_path.empty()) {
        std::vector<Order> orders = parse_orders_jsonl(read_text_file(orders_path));
        orders_out = orders_to_jsonl(orders);
        ordered_json oj;
        oj["accepted"] = orders.size();
        oj["rejected"] = ordered_json::array();
        summary["orders"] = oj;
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(Errc::IoError, "cannot create " + out_dir + ": " + ec.message());
    if (!meter_path.empty())
        write_text_file((fs::path(out_dir) / "meter_normalized.csv").string(), meter_out);
    if (!orders_path.empty())
        write_text_file((fs::path(out_dir) / "orders_normalized.jsonl").string(), orders_out);
    write_text_file((fs::path(out_dir) / "ingest_summary.json").string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic dormitory energy-token market: simulator and analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir, record_dir, orders_path, ledger_path, meter_path, which = "all";
    std::string out_path;
    std::uint64_t seed = 0;
    double theta = 0.25;
    int jobs = 1;

    CLI::App* sim = app.add_subcommand("simulate", "run a seeded month and write the record");
    sim->add_option("--config", config_path, "scenario config file")->required();
    sim->add_option("--seed", seed, "RNG seed (required: runs must be reproducible)")->required();
    sim->add_option("--out", out_dir, "record output directory")->required();

    CLI::App* clr = app.add_subcommand("clear", "clear one day's order file against a ledger");
    clr->add_option("--orders", orders_path, "orders JSONL")->required();
    clr->add_option("--ledger", ledger_path, "ledger log JSONL")->required();
    clr->add_option("--out", out_path, "write the clearing JSON here instead of stdout");

    CLI::App* ana = app.add_subcommand("analyze", "run analyses over a saved record");
    ana->add_option("--record", record_dir, "record directory")->required();
    CLI::Option* theta_opt = ana->add_option("--theta", theta, "cavity robustness threshold");
    ana->add_option("--which", which, "hypergraph|tda|table|all")
        ->check(CLI::IsMember({"hypergraph", "tda", "table", "all"}));
    ana->add_option("--jobs", jobs, "parallel workers for per-day analysis")->check(CLI::PositiveNumber);
    ana->add_option("--out", out_dir, "analysis output directory (default RECORD/analysis)");

    CLI::App* rep = app.add_subcommand("report", "build the full report for a saved record");
    rep->add_option("--record", record_dir, "record directory")->required();
    CLI::Option* rep_theta_opt = rep->add_option("--theta", theta, "cavity robustness threshold");
    rep->add_option("--jobs", jobs, "parallel workers for per-day analysis")->check(CLI::PositiveNumber);
    rep->add_option("--out", out_dir, "report output directory (default RECORD/analysis)");

    CLI::App* ing = app.add_subcommand("ingest", "validate and normalize external inputs");
    ing->add_option("--meter", meter_path, "meter CSV (date,user_id,kwh)");
    ing->add_option("--orders", orders_path, "orders JSONL");
    ing->add_option("--out", out_dir, "normalized output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, seed, out_dir);
        if (clr->parsed()) return cmd_clear(orders_path, ledger_path, out_path);
        if (ana->parsed())
            return run_analysis(record_dir, theta, theta_opt->count() > 0, which, jobs, out_dir);
        if (rep->parsed())
            return run_analysis(record_dir, theta, rep_theta_opt->count() > 0, "report", jobs, out_dir);
        if (ing->parsed()) return cmd_ingest(meter_path, orders_path, out_dir);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal fault: " << e.what() << "\n";
        return 3;
    }
}
