#include "emx/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "emx/rng.hpp"

namespace emx {

namespace {

// sub-stream tags
constexpr std::uint64_t kTagMeans = 0x6d65616eULL;  // per-student mean draw
constexpr std::uint64_t kTagUsage = 0x75736167ULL;  // daily consumption
constexpr std::uint64_t kTagOrder = 0x6f726472ULL;  // order generation

std::int64_t round_half_up(double v) { return static_cast<std::int64_t>(std::floor(v + 0.5)); }

} // namespace

bool is_weekend(int day) {
    const int dow = (day - 1) % 7; // day 1 = Monday
    return dow == 5 || dow == 6;
}

ConsumptionModel make_consumption_model(const Scenario& scenario, std::uint64_t seed) {
    ConsumptionModel m;
    m.mode = scenario.consumption_mode;
    m.dispersion = scenario.usage_dispersion;
    m.weekday_factor = scenario.weekday_factor;
    m.weekend_factor = scenario.weekend_factor;
    m.seed = seed;
    m.days = scenario.month.days_in_month;
    const int n = scenario.active_students;

    if (m.mode == "fixture") {
        MeterData data = load_meter_csv(scenario.fixture_csv);
        m.fixture = fixture_from_meter(data, m.days, n);
        m.mean_kwh.assign(static_cast<std::size_t>(n), 0.0);
        for (const auto& row : m.fixture)
            for (int i = 0; i < n; ++i) m.mean_kwh[static_cast<std::size_t>(i)] += row[static_cast<std::size_t>(i)];
        for (double& mu : m.mean_kwh) mu /= std::max(1, m.days);
    } else {
        for (int i = 0; i < n; ++i) {
            Rng rng = Rng::derive(seed, {kTagMeans, static_cast<std::uint64_t>(i)});
            m.mean_kwh.push_back(scenario.usage_mean_min +
                                 (scenario.usage_mean_max - scenario.usage_mean_min) * rng.uniform01());
        }
    }
    return m;
}

std::vector<double> gen_usage(const ConsumptionModel& model, int day) {
    if (day < 1 || day > model.days) fail(Errc::DayOutOfRange, "usage day " + std::to_string(day));
    if (model.mode == "fixture") return model.fixture.at(static_cast<std::size_t>(day - 1));

    std::vector<double> usage;
    usage.reserve(model.mean_kwh.size());
    const double factor = is_weekend(day) ? model.weekend_factor : model.weekday_factor;
    for (std::size_t i = 0; i < model.mean_kwh.size(); ++i) {
        Rng rng = Rng::derive(model.seed, {kTagUsage, i, static_cast<std::uint64_t>(day)});
        const double mean = model.mean_kwh[i] * factor;
        usage.push_back(std::max(0.0, rng.normal(mean, model.dispersion * mean)));
    }
    return usage;
}

std::vector<Order> gen_orders(const AgentPolicy& policy, const MonthConfig& cfg, const Ledger& ledger,
                              const std::vector<std::string>& students,
                              const std::vector<double>& projected_daily_kwh, const PerToken& last_price,
                              int day) {
    if (projected_daily_kwh.size() != students.size())
        fail(Errc::FixtureShapeMismatch, "projected usage size does not match student count");

    std::vector<Order> orders;
    EscrowTracker escrow(ledger); // mirror of the day's admission checks
    int arrival = 1;

    for (std::size_t i = 0; i < students.size(); ++i) {
        const std::string& id = students[i];
        const double mu = projected_daily_kwh[i];
        const std::int64_t target = static_cast<std::int64_t>(std::ceil(policy.buffer_days * mu - 1e-9));
        const std::int64_t held = ledger.balance_of(id, TokenKind::UPX) + ledger.balance_of(id, TokenKind::SPX);
        if (held == target) continue;

        Rng rng = Rng::derive(policy.seed, {kTagOrder, i, static_cast<std::uint64_t>(day)});
        if (!rng.bernoulli(policy.participation)) continue;

        Order o;
        o.day = day;
        o.account = id;

        if (held < target) {
            o.side = Side::Buy;
            o.token = rng.bernoulli(policy.spx_bid_share) ? TokenKind::SPX : TokenKind::UPX;
            std::int64_t price =
                round_half_up(static_cast<double>(last_price.of(o.token)) * (1.0 + policy.aggressiveness * rng.uniform_pm1()));
            price = std::max<std::int64_t>(1, price);
            // about to run dry: lift to the system's shortage ask
            if (static_cast<double>(held) < mu) price = std::max(price, shortage_ask_price(cfg, o.token));
            o.price = price;
            const std::int64_t free_cash = ledger.currency_of(id) - escrow.escrowed_currency(id);
            o.qty = std::min(target - held, free_cash / price);
        } else {
            o.side = Side::Sell;
            const std::int64_t upx = ledger.balance_of(id, TokenKind::UPX);
            const std::int64_t spx = ledger.balance_of(id, TokenKind::SPX);
            o.token = spx > upx ? TokenKind::SPX : TokenKind::UPX;
            std::int64_t price =
                round_half_up(static_cast<double>(last_price.of(o.token)) * (1.0 + policy.aggressiveness * rng.uniform_pm1()));
            o.price = std::max<std::int64_t>(1, price);
            const std::int64_t free_tokens =
                ledger.balance_of(id, o.token) - escrow.escrowed_tokens(id, o.token);
            o.qty = std::min(held - target, free_tokens);
        }
        if (o.qty <= 0) continue;
        o.arrival = arrival++;
        o.id = make_order_id(day, o.arrival);
        escrow.validate_and_escrow(o); // by construction this cannot throw
        orders.push_back(std::move(o));
    }
    return orders;
}

MonthRecord simulate_month(const Scenario& scenario, std::uint64_t seed) {
    const ConsumptionModel model = make_consumption_model(scenario, seed);
    AgentPolicy policy;
    policy.buffer_days = scenario.buffer_days;
    policy.aggressiveness = scenario.aggressiveness;
    policy.participation = scenario.participation;
    policy.spx_bid_share = scenario.spx_bid_share;
    policy.seed = seed;

    const std::vector<std::string> students = make_student_ids(scenario.active_students);

    DaySource source = [&](int day, const Ledger& ledger, const PerToken& last_price) {
        DayInputs inputs;
        inputs.usage_kwh = gen_usage(model, day);
        inputs.orders =
            gen_orders(policy, scenario.month, ledger, students, model.mean_kwh, last_price, day);
        return inputs;
    };
    return run_month(scenario, seed, source);
}

namespace {

bool valid_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    const int month = std::stoi(s.substr(5, 2));
    const int dom = std::stoi(s.substr(8, 2));
    return month >= 1 && month <= 12 && dom >= 1 && dom <= 31;
}

} // namespace

MeterData parse_meter_csv(std::istream& in) {
    MeterData data;
    std::string line;
    int lineno = 0;

    if (!std::getline(in, line)) fail(Errc::ParseError, "meter CSV: empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,user_id,kwh")
        fail(Errc::ParseError, "meter CSV line 1: expected header 'date,user_id,kwh'");

    std::set<std::pair<std::string, std::string>> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::istringstream row(line);
        std::string date, user, kwh_text;
        if (!std::getline(row, date, ',') || !std::getline(row, user, ',') || !std::getline(row, kwh_text))
            fail(Errc::ParseError, "meter CSV line " + std::to_string(lineno) + ": expected 3 fields");
        if (!valid_iso_date(date))
            fail(Errc::ParseError, "meter CSV line " + std::to_string(lineno) + ": bad ISO date '" + date + "'");
        if (user.empty())
            fail(Errc::ParseError, "meter CSV line " + std::to_string(lineno) + ": empty user_id");
        double kwh = 0;
        try {
            std::size_t pos = 0;
            kwh = std::stod(kwh_text, &pos);
            if (pos != kwh_text.size()) throw std::invalid_argument("trailing");
        } catch (...) {
            fail(Errc::ParseError, "meter CSV line " + std::to_string(lineno) + ": bad kwh '" + kwh_text + "'");
        }

        if (kwh < 0) {
            data.rejected.emplace_back(lineno, "negative kwh");
            continue;
        }
        if (!seen.insert({date, user}).second) {
            data.rejected.emplace_back(lineno, "duplicate date+user_id");
            continue;
        }
        data.rows.push_back({date, user, kwh, lineno});
    }
    return data;
}

MeterData load_meter_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open meter CSV: " + path);
    return parse_meter_csv(in);
}

std::vector<std::vector<double>> fixture_from_meter(const MeterData& data, int days, int students) {
    std::set<std::string> dates, users;
    for (const MeterRow& r : data.rows) {
        dates.insert(r.date);
        users.insert(r.user);
    }
    if (static_cast<int>(dates.size()) != days || static_cast<int>(users.size()) != students)
        fail(Errc::FixtureShapeMismatch, "meter data covers " + std::to_string(dates.size()) + " days x " +
                                             std::to_string(users.size()) + " users, expected " +
                                             std::to_string(days) + " x " + std::to_string(students));

    std::map<std::string, std::size_t> day_of, col_of;
    for (const std::string& d : dates) day_of.emplace(d, day_of.size());
    for (const std::string& u : users) col_of.emplace(u, col_of.size());

    std::vector<std::vector<double>> fixture(static_cast<std::size_t>(days),
                                             std::vector<double>(static_cast<std::size_t>(students), -1.0));
    for (const MeterRow& r : data.rows) fixture[day_of[r.date]][col_of[r.user]] = r.kwh;
    for (const auto& row : fixture)
        for (double v : row)
            if (v < 0) fail(Errc::FixtureShapeMismatch, "meter data has missing date+user cells");
    return fixture;
}

} // namespace emx
