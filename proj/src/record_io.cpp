#include "emx/record_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace emx {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string run_id(const Scenario& scenario, std::uint64_t seed) {
    return fnv1a_hex(fnv1a_hex(dump_scenario(scenario)) + ":" + std::to_string(seed) + ":" + kToolVersion);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) fail(Errc::IoError, "read failed for " + path);
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) fail(Errc::IoError, "write failed for " + path);
}

namespace {

std::string day_file_name(int day) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "day_%02d.json", day);
    return buf;
}

ordered_json order_to_json(const Order& o) {
    ordered_json j;
    j["id"] = o.id;
    j["account"] = o.account;
    j["token"] = to_string(o.token);
    j["side"] = to_string(o.side);
    j["price"] = o.price;
    j["qty"] = o.qty;
    j["day"] = o.day;
    j["arrival"] = o.arrival;
    return j;
}

Order order_from_json(const ordered_json& j) {
    Order o;
    o.id = j.at("id").get<std::string>();
    o.account = j.at("account").get<std::string>();
    o.token = token_from_string(j.at("token").get<std::string>());
    o.side = side_from_string(j.at("side").get<std::string>());
    o.price = j.at("price").get<std::int64_t>();
    o.qty = j.at("qty").get<std::int64_t>();
    o.day = j.at("day").get<int>();
    o.arrival = j.at("arrival").get<int>();
    return o;
}

ordered_json result_to_json(const ClearingResult& r) {
    ordered_json j;
    j["token"] = to_string(r.token);
    j["day"] = r.day;
    j["price"] = r.price ? ordered_json(*r.price) : ordered_json(nullptr);
    j["volume"] = r.volume;
    ordered_json fills = ordered_json::array();
    for (const Fill& f : r.fills) {
        ordered_json fj;
        fj["order_id"] = f.order_id;
        fj["account"] = f.account;
        fj["side"] = to_string(f.side);
        fj["qty"] = f.qty;
        fills.push_back(fj);
    }
    j["fills"] = fills;
    j["rejected"] = r.rejected;
    return j;
}

ClearingResult result_from_json(const ordered_json& j) {
    ClearingResult r;
    r.token = token_from_string(j.at("token").get<std::string>());
    r.day = j.at("day").get<int>();
    if (!j.at("price").is_null()) r.price = j.at("price").get<std::int64_t>();
    r.volume = j.at("volume").get<std::int64_t>();
    for (const ordered_json& fj : j.at("fills")) {
        Fill f;
        f.order_id = fj.at("order_id").get<std::string>();
        f.account = fj.at("account").get<std::string>();
        f.side = side_from_string(fj.at("side").get<std::string>());
        f.qty = fj.at("qty").get<std::int64_t>();
        r.fills.push_back(std::move(f));
    }
    r.rejected = j.at("rejected").get<std::vector<std::string>>();
    return r;
}

ordered_json day_to_json(const DayRecord& d) {
    ordered_json j;
    j["day"] = d.day;
    j["usage_kwh"] = d.usage_kwh;
    ordered_json lp;
    lp["UPX"] = d.last_price.upx;
    lp["SPX"] = d.last_price.spx;
    j["last_price"] = lp;
    ordered_json books = ordered_json::array();
    for (const auto& [token, book] : d.books) {
        (void)token;
        ordered_json bj;
        bj["token"] = to_string(book.token);
        bj["day"] = book.day;
        ordered_json bids = ordered_json::array(), asks = ordered_json::array();
        for (const Order& o : book.bids) bids.push_back(order_to_json(o));
        for (const Order& o : book.asks) asks.push_back(order_to_json(o));
        bj["bids"] = bids;
        bj["asks"] = asks;
        books.push_back(bj);
    }
    j["books"] = books;
    ordered_json results = ordered_json::array();
    for (const auto& [token, r] : d.results) {
        (void)token;
        results.push_back(result_to_json(r));
    }
    j["results"] = results;
    return j;
}

DayRecord day_from_json(const ordered_json& j) {
    DayRecord d;
    d.day = j.at("day").get<int>();
    d.usage_kwh = j.at("usage_kwh").get<std::vector<double>>();
    d.last_price.upx = j.at("last_price").at("UPX").get<std::int64_t>();
    d.last_price.spx = j.at("last_price").at("SPX").get<std::int64_t>();
    for (const ordered_json& bj : j.at("books")) {
        OrderBook book;
        book.token = token_from_string(bj.at("token").get<std::string>());
        book.day = bj.at("day").get<int>();
        for (const ordered_json& oj : bj.at("bids")) book.bids.push_back(order_from_json(oj));
        for (const ordered_json& oj : bj.at("asks")) book.asks.push_back(order_from_json(oj));
        d.books.emplace(book.token, std::move(book));
    }
    for (const ordered_json& rj : j.at("results")) {
        ClearingResult r = result_from_json(rj);
        d.results.emplace(r.token, std::move(r));
    }
    return d;
}

ordered_json parse_json_file(const std::string& path) {
    std::string text = read_text_file(path);
    try {
        return ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(Errc::ParseError, path + ": " + e.what());
    }
}

} // namespace

std::vector<Order> parse_orders_jsonl(const std::string& text) {
    std::vector<Order> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            ordered_json j = ordered_json::parse(line);
            Order o;
            o.account = j.at("account").get<std::string>();
            o.token = token_from_string(j.at("token").get<std::string>());
            o.side = side_from_string(j.at("side").get<std::string>());
            o.price = j.at("price").get<std::int64_t>();
            o.qty = j.at("qty").get<std::int64_t>();
            o.day = j.contains("day") ? j.at("day").get<int>() : 1;
            o.arrival = j.contains("arrival") ? j.at("arrival").get<int>() : lineno;
            o.id = j.contains("id") ? j.at("id").get<std::string>() : make_order_id(o.day, o.arrival);
            out.push_back(std::move(o));
        } catch (const Error& e) {
            fail(Errc::ParseError, "orders line " + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception& e) {
            fail(Errc::ParseError, "orders line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string orders_to_jsonl(const std::vector<Order>& orders) {
    std::string out;
    for (const Order& o : orders) out += order_to_json(o).dump() + "\n";
    return out;
}

void save_month_record(const MonthRecord& record, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "days", ec);
    if (ec) fail(Errc::IoError, "cannot create " + dir + ": " + ec.message());

    ordered_json manifest;
    manifest["schema_version"] = 1;
    manifest["tool"] = kToolName;
    manifest["version"] = kToolVersion;
    manifest["run_id"] = run_id(record.scenario, record.seed);
    manifest["config_hash"] = fnv1a_hex(dump_scenario(record.scenario));
    manifest["seed"] = record.seed;
    manifest["days"] = record.days.size();
    manifest["students"] = record.students.size();
    ordered_json layout;
    layout["config"] = "config.toml";
    layout["ledger"] = "ledger.jsonl";
    layout["summary"] = "summary.json";
    layout["days_dir"] = "days";
    manifest["layout"] = layout;
    write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");

    write_text_file((fs::path(dir) / "config.toml").string(), dump_scenario(record.scenario));

    {
        std::ostringstream log;
        save_ledger_log(record.ledger, log);
        write_text_file((fs::path(dir) / "ledger.jsonl").string(), log.str());
    }

    ordered_json summary;
    summary["students"] = record.students;
    ordered_json trims = ordered_json::array();
    for (const AllocationNote& n : record.reduced_allocations) {
        ordered_json tj;
        tj["account"] = n.account;
        tj["token"] = to_string(n.token);
        tj["requested"] = n.requested;
        tj["granted"] = n.granted;
        trims.push_back(tj);
    }
    summary["reduced_allocations"] = trims;
    {
        const SettlementSummary& s = record.settlement;
        ordered_json sj;
        sj["surplus_total"] = s.surplus_total;
        sj["deficit_total"] = s.deficit_total;
        sj["buy_price"] = s.buy_price;
        sj["sell_price"] = s.sell_price;
        sj["reserve_before"] = s.reserve_before;
        sj["reserve_after"] = s.reserve_after;
        sj["residue"] = s.residue;
        ordered_json debts = ordered_json::array();
        for (const auto& [account, amount] : s.debts) {
            ordered_json dj;
            dj["account"] = account;
            dj["amount"] = amount;
            debts.push_back(dj);
        }
        sj["debts"] = debts;
        summary["settlement"] = sj;
    }
    write_text_file((fs::path(dir) / "summary.json").string(), summary.dump(2) + "\n");

    for (const DayRecord& d : record.days)
        write_text_file((fs::path(dir) / "days" / day_file_name(d.day)).string(),
                        day_to_json(d).dump(2) + "\n");
}

MonthRecord load_month_record(const std::string& dir) {
    ordered_json manifest = parse_json_file((fs::path(dir) / "manifest.json").string());
    try {
        if (manifest.at("schema_version").get<int>() != 1)
            fail(Errc::ParseError, "unsupported record schema version");
        if (manifest.at("tool").get<std::string>() != kToolName)
            fail(Errc::ParseError, "manifest written by a different tool");

        MonthRecord record;
        record.seed = manifest.at("seed").get<std::uint64_t>();
        record.scenario = load_scenario((fs::path(dir) / "config.toml").string());
        if (fnv1a_hex(dump_scenario(record.scenario)) != manifest.at("config_hash").get<std::string>())
            fail(Errc::ParseError, "config.toml does not match the manifest hash");

        {
            std::istringstream log(read_text_file((fs::path(dir) / "ledger.jsonl").string()));
            record.ledger = load_ledger_log(log);
        }

        ordered_json summary = parse_json_file((fs::path(dir) / "summary.json").string());
        record.students = summary.at("students").get<std::vector<std::string>>();
        for (const ordered_json& tj : summary.at("reduced_allocations")) {
            AllocationNote n;
            n.account = tj.at("account").get<std::string>();
            n.token = token_from_string(tj.at("token").get<std::string>());
            n.requested = tj.at("requested").get<std::int64_t>();
            n.granted = tj.at("granted").get<std::int64_t>();
            record.reduced_allocations.push_back(std::move(n));
        }
        {
            const ordered_json& sj = summary.at("settlement");
            SettlementSummary& s = record.settlement;
            s.surplus_total = sj.at("surplus_total").get<std::int64_t>();
            s.deficit_total = sj.at("deficit_total").get<std::int64_t>();
            s.buy_price = sj.at("buy_price").get<std::int64_t>();
            s.sell_price = sj.at("sell_price").get<std::int64_t>();
            s.reserve_before = sj.at("reserve_before").get<std::int64_t>();
            s.reserve_after = sj.at("reserve_after").get<std::int64_t>();
            s.residue = sj.at("residue").get<std::int64_t>();
            for (const ordered_json& dj : sj.at("debts"))
                s.debts.emplace_back(dj.at("account").get<std::string>(), dj.at("amount").get<std::int64_t>());
        }

        int days = manifest.at("days").get<int>();
        for (int day = 1; day <= days; ++day) {
            ordered_json dj = parse_json_file((fs::path(dir) / "days" / day_file_name(day)).string());
            DayRecord d = day_from_json(dj);
            if (d.day != day) fail(Errc::ParseError, day_file_name(day) + " carries day " + std::to_string(d.day));
            record.days.push_back(std::move(d));
        }
        if (static_cast<std::size_t>(manifest.at("students").get<int>()) != record.students.size())
            fail(Errc::ParseError, "manifest student count does not match summary.json");
        return record;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(Errc::ParseError, "record at " + dir + " is corrupt: " + e.what());
    }
}

} // namespace emx
