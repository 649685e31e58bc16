#include "emx/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace emx {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t ceil_tokens(double kwh) {
    if (kwh <= 0) return 0;
    return static_cast<std::int64_t>(std::ceil(kwh - 1e-9));
}

} // namespace

std::int64_t MonthRecord::consumed_tokens(std::size_t student_index) const {
    std::int64_t sum = 0;
    for (const DayRecord& d : days) sum += ceil_tokens(d.usage_kwh.at(student_index));
    return sum;
}

double MonthRecord::usage_kwh_on(int day, std::size_t student_index) const {
    return day_record(day).usage_kwh.at(student_index);
}

const DayRecord& MonthRecord::day_record(int day) const {
    if (day < 1 || day > static_cast<int>(days.size()))
        fail(Errc::DayOutOfRange, "day " + std::to_string(day) + " outside recorded month");
    return days[static_cast<std::size_t>(day - 1)];
}

std::vector<std::string> make_student_ids(int n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    const int width = n < 100 ? 2 : 3;
    for (int i = 1; i <= n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%0*d", width, i);
        ids.emplace_back(buf);
    }
    return ids;
}

std::vector<AllocationNote> issue_monthly(const MonthConfig& cfg, Ledger& ledger) {
    std::vector<AllocationNote> notes;
    std::vector<std::string> students;
    for (const auto& [id, bal] : ledger.accounts()) {
        (void)bal;
        if (ledger.role_of(id) == Role::Student) students.push_back(id);
    }

    for (TokenKind kind : kTokenKinds) {
        const std::int64_t total = cfg.prev_year_usage(kind);
        if (total > 0) ledger.mint(to_asset(kind), ledger.system_account(), total, 0, "monthly_issue");
        const std::int64_t alloc = total / cfg.num_students;
        if (alloc == 0) continue;
        const std::int64_t price = cfg.base_price(kind);
        for (const std::string& id : students) {
            const std::int64_t affordable = ledger.currency_of(id) / price;
            const std::int64_t granted = std::min(alloc, affordable);
            if (granted > 0) {
                ledger.transfer(kind, ledger.system_account(), id, granted, 0, "allocation");
                ledger.pay(id, ledger.system_account(), granted * price, 0, "allocation_pay");
            }
            if (granted < alloc) notes.push_back({id, kind, alloc, granted});
        }
    }
    return notes;
}

PerToken forecast_remaining(const MonthConfig& cfg, const std::vector<std::int64_t>& consumed_total_by_day,
                            int day) {
    if (day < 1 || day > cfg.days_in_month)
        fail(Errc::DayOutOfRange, "forecast day " + std::to_string(day) + " outside the month");
    const std::int64_t remaining = cfg.days_in_month - day + 1;

    PerToken f;
    const std::int64_t elapsed = static_cast<std::int64_t>(consumed_total_by_day.size());
    if (elapsed == 0) {
        // no usage data yet: last year's daily mean, per kind
        for (TokenKind kind : kTokenKinds)
            f.of(kind) = ceil_div(cfg.prev_year_usage(kind) * remaining, cfg.days_in_month);
        return f;
    }
    std::int64_t month_to_date = 0;
    for (std::int64_t t : consumed_total_by_day) month_to_date += t;
    const std::int64_t total = ceil_div(month_to_date * remaining, elapsed);
    f.spx = static_cast<std::int64_t>(std::ceil(static_cast<double>(total) * cfg.pv_share - 1e-9));
    f.upx = total - f.spx;
    return f;
}

std::int64_t shortage_ask_price(const MonthConfig& cfg, TokenKind kind) {
    const std::int64_t base = cfg.base_price(kind);
    return std::max<std::int64_t>(
        base + 1, static_cast<std::int64_t>(std::llround(static_cast<double>(base) * cfg.shortage_premium_factor)));
}

std::vector<Order> shortage_issue(const MonthConfig& cfg, Ledger& ledger, const PerToken& forecast, int day) {
    std::vector<Order> orders;
    const std::string& sys = ledger.system_account();
    for (TokenKind kind : kTokenKinds) {
        const std::int64_t remaining = ledger.aggregate_remaining(kind);
        if (remaining >= forecast.of(kind)) continue;
        const std::int64_t shortfall = forecast.of(kind) - remaining;
        const std::int64_t price = shortage_ask_price(cfg, kind);

        const std::int64_t held = ledger.balance_of(sys, kind);
        if (held < shortfall) ledger.mint(to_asset(kind), sys, shortfall - held, day, "shortage_mint");

        Order o;
        o.id = "d" + std::to_string(day) + "#sys" + (kind == TokenKind::UPX ? "U" : "S");
        o.account = sys;
        o.token = kind;
        o.side = Side::Sell;
        o.price = price;
        o.qty = shortfall;
        o.day = day;
        o.arrival = 0;
        orders.push_back(std::move(o));
    }
    return orders;
}

SettlementSummary settle_month(const MonthConfig& cfg, Ledger& ledger,
                               const std::map<std::string, std::int64_t>& consumed_tokens) {
    SettlementSummary sum;
    const std::string& sys = ledger.system_account();
    const int day = cfg.days_in_month;
    sum.reserve_before = ledger.reserve();

    struct Position {
        std::string id;
        std::int64_t surplus = 0;
        std::int64_t deficit = 0;
    };
    std::vector<Position> positions;
    for (const auto& [id, consumed] : consumed_tokens) {
        if (ledger.role_of(id) != Role::Student)
            fail(Errc::InvalidOrder, "settlement usage for non-student account " + id);
        if (consumed < 0) fail(Errc::InvalidOrder, "negative consumption for " + id);
        const std::int64_t held =
            ledger.balance_of(id, TokenKind::UPX) + ledger.balance_of(id, TokenKind::SPX);
        Position p{id, 0, 0};
        if (held >= consumed) p.surplus = held - consumed;
        else p.deficit = consumed - held;
        sum.surplus_total += p.surplus;
        sum.deficit_total += p.deficit;
        positions.push_back(std::move(p));
    }

    const std::int64_t b = cfg.anchor_price();
    sum.buy_price = b;
    std::int64_t s = 0;
    if (sum.deficit_total > 0) {
        if (sum.surplus_total > 0) {
            // zero-net: revenue D*s tracks cost S*b within rounding (half-up)
            s = (2 * sum.surplus_total * b + sum.deficit_total) / (2 * sum.deficit_total);
        } else {
            s = b; // one-sided leg executes at the anchor
        }
    }
    sum.sell_price = s;

    // buy back surpluses first so deliveries can reuse the returned tokens
    for (const Position& p : positions) {
        if (p.surplus == 0) continue;
        std::int64_t left = p.surplus;
        for (TokenKind kind : kTokenKinds) {
            const std::int64_t q = std::min(left, ledger.balance_of(p.id, kind));
            if (q > 0) ledger.transfer(kind, p.id, sys, q, day, "settlement_buyback");
            left -= q;
        }
        ledger.pay(sys, p.id, p.surplus * b, day, "settlement_buyback_pay");
    }

    for (const Position& p : positions) {
        if (p.deficit == 0) continue;
        std::int64_t left = p.deficit;
        for (TokenKind kind : kTokenKinds) {
            const std::int64_t q = std::min(left, ledger.balance_of(sys, kind));
            if (q > 0) ledger.transfer(kind, sys, p.id, q, day, "settlement_sale");
            left -= q;
        }
        if (left > 0) {
            ledger.mint(Asset::UPX, sys, left, day, "settlement_mint");
            ledger.transfer(TokenKind::UPX, sys, p.id, left, day, "settlement_sale");
        }
        const std::int64_t cost = p.deficit * s;
        const std::int64_t paid = std::min(cost, ledger.currency_of(p.id));
        if (paid > 0) ledger.pay(p.id, sys, paid, day, "settlement_sale_pay");
        if (paid < cost) sum.debts.emplace_back(p.id, cost - paid);
    }

    sum.reserve_after = ledger.reserve();
    sum.residue = sum.reserve_after - sum.reserve_before;
    return sum;
}

MonthRecord run_month(const Scenario& scenario, std::uint64_t seed, const DaySource& source) {
    const MonthConfig& cfg = scenario.month;
    cfg.validate();

    MonthRecord rec;
    rec.scenario = scenario;
    rec.seed = seed;
    rec.students = make_student_ids(scenario.active_students);

    Ledger& ledger = rec.ledger;
    ledger.create_account("admin", Role::System);
    for (const std::string& id : rec.students) ledger.create_account(id, Role::Student);
    // endowment mints always run, so every account appears in the log
    for (const std::string& id : rec.students) ledger.mint(Asset::CUR, id, cfg.initial_currency, 0, "endowment");

    rec.reduced_allocations = issue_monthly(cfg, ledger);

    PerToken last_price{cfg.base_price_upx, cfg.base_price_spx};
    std::vector<std::int64_t> consumed_total_by_day;

    for (int day = 1; day <= cfg.days_in_month; ++day) {
        try {
            const PerToken forecast = forecast_remaining(cfg, consumed_total_by_day, day);
            std::vector<Order> sys_orders = shortage_issue(cfg, ledger, forecast, day);

            DayInputs inputs = source(day, ledger, last_price);
            if (inputs.usage_kwh.size() != rec.students.size())
                fail(Errc::FixtureShapeMismatch, "day source returned " + std::to_string(inputs.usage_kwh.size()) +
                                                     " usage entries for " + std::to_string(rec.students.size()) +
                                                     " students");

            DayRecord dr;
            dr.day = day;
            for (TokenKind kind : kTokenKinds) {
                OrderBook book;
                book.day = day;
                book.token = kind;
                dr.books.emplace(kind, std::move(book));
            }

            EscrowTracker escrow(ledger);
            auto admit = [&](const Order& o) {
                escrow.validate_and_escrow(o);
                dr.books.at(o.token).add(o);
            };
            for (const Order& o : sys_orders) admit(o);
            for (const Order& o : inputs.orders) admit(o);

            for (TokenKind kind : kTokenKinds) {
                ClearingResult res = clear(dr.books.at(kind));
                settle(ledger, res);
                if (res.price) last_price.of(kind) = *res.price;
                dr.results.emplace(kind, std::move(res));
            }

            std::int64_t day_tokens = 0;
            for (double kwh : inputs.usage_kwh) day_tokens += ceil_tokens(kwh);
            consumed_total_by_day.push_back(day_tokens);

            dr.usage_kwh = std::move(inputs.usage_kwh);
            dr.last_price = last_price;
            rec.days.push_back(std::move(dr));
        } catch (Error& e) {
            throw Error(e.code(), "day " + std::to_string(day) + ": " + e.what());
        }
    }

    std::map<std::string, std::int64_t> consumed;
    for (std::size_t i = 0; i < rec.students.size(); ++i) consumed[rec.students[i]] = rec.consumed_tokens(i);
    rec.settlement = settle_month(cfg, ledger, consumed);
    return rec;
}

} // namespace emx
