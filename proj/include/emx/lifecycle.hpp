#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "emx/auction.hpp"
#include "emx/config.hpp"
#include "emx/ledger.hpp"

namespace emx {

struct PerToken {
    std::int64_t upx = 0;
    std::int64_t spx = 0;
    std::int64_t& of(TokenKind k) { return k == TokenKind::UPX ? upx : spx; }
    std::int64_t of(TokenKind k) const { return k == TokenKind::UPX ? upx : spx; }
    bool operator==(const PerToken&) const = default;
};

// Allocation trimmed because the student could not pay for all of it.
struct AllocationNote {
    std::string account;
    TokenKind token = TokenKind::UPX;
    std::int64_t requested = 0;
    std::int64_t granted = 0;
};

struct SettlementSummary {
    std::int64_t surplus_total = 0;   // S: tokens bought back
    std::int64_t deficit_total = 0;   // D: tokens sold to cover overdraws
    std::int64_t buy_price = 0;       // b, the anchor
    std::int64_t sell_price = 0;      // s; 0 when no deficit leg ran
    std::int64_t reserve_before = 0;
    std::int64_t reserve_after = 0;
    std::int64_t residue = 0;         // reserve_after - reserve_before
    std::vector<std::pair<std::string, std::int64_t>> debts; // unpaid settlement bills
};

struct DayRecord {
    int day = 0;
    std::map<TokenKind, OrderBook> books;         // post-admission books
    std::map<TokenKind, ClearingResult> results;
    std::vector<double> usage_kwh;                // by student index
    PerToken last_price;                          // after this day's clear
};

struct MonthRecord {
    Scenario scenario;
    std::uint64_t seed = 0;
    std::vector<std::string> students;            // account ids, index-aligned with usage
    std::vector<DayRecord> days;
    Ledger ledger;                                // final state
    std::vector<AllocationNote> reduced_allocations;
    SettlementSummary settlement;

    std::int64_t consumed_tokens(std::size_t student_index) const; // sum of daily ceils
    double usage_kwh_on(int day, std::size_t student_index) const;
    const DayRecord& day_record(int day) const;   // throws DayOutOfRange
};

std::vector<std::string> make_student_ids(int n);

// Mints last year's usage to the system, then sells each student
// floor(prev_year_usage / num_students) tokens of each kind at base price.
// A student short on currency gets what they can afford; returns the trims.
std::vector<AllocationNote> issue_monthly(const MonthConfig& cfg, Ledger& ledger);

// Forecast token demand for days day..D. Uses the month-to-date mean daily
// consumption once data exists, last year's daily mean before that; the
// total splits across kinds by pv_share.
PerToken forecast_remaining(const MonthConfig& cfg, const std::vector<std::int64_t>& consumed_total_by_day, int day);

// The shortage ask price: strictly above base even for premium factors
// barely above 1.
std::int64_t shortage_ask_price(const MonthConfig& cfg, TokenKind kind);

// One system ask per token whose student-held supply falls short of the
// forecast, priced strictly above base. Mints only what the system does not
// already hold. Arrival 0: the system posts before order collection.
std::vector<Order> shortage_issue(const MonthConfig& cfg, Ledger& ledger, const PerToken& forecast, int day);

// Month-end true-up over combined token kinds: surplus (holdings above
// consumption) is bought back at the anchor b; deficits are covered at s,
// chosen so revenue matches cost within rounding when both sides exist.
// The rounding residue lands in the system reserve.
SettlementSummary settle_month(const MonthConfig& cfg, Ledger& ledger,
                               const std::map<std::string, std::int64_t>& consumed_tokens);

// Per-day inputs supplied by a simulator or a fixture: raw kWh per student
// (index-aligned) plus that day's student orders (arrivals start at 1).
struct DayInputs {
    std::vector<double> usage_kwh;
    std::vector<Order> orders;
};
using DaySource = std::function<DayInputs(int day, const Ledger& ledger, const PerToken& last_price)>;

// Full month: genesis endowment, issuance, then per day shortage -> admit ->
// clear -> settle, and finally the month-end settlement. Deterministic for
// a fixed (scenario, seed, source).
MonthRecord run_month(const Scenario& scenario, std::uint64_t seed, const DaySource& source);

} // namespace emx
