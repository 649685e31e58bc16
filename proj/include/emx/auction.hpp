#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emx/ledger.hpp"

namespace emx {

enum class Side { Buy, Sell };

const char* to_string(Side s);
Side side_from_string(const std::string& s);

struct Order {
    std::string id;       // unique within a day, e.g. "d7#3"
    std::string account;
    TokenKind token = TokenKind::UPX;
    Side side = Side::Buy;
    std::int64_t price = 0; // positive integer, currency minor units per token
    std::int64_t qty = 0;   // positive integer tokens
    int day = 0;
    int arrival = 0;        // time priority within the day; lower = earlier
};

std::string make_order_id(int day, int arrival);

// One trading day, one token kind, both sides.
struct OrderBook {
    int day = 0;
    TokenKind token = TokenKind::UPX;
    std::vector<Order> bids;
    std::vector<Order> asks;

    // Rejects orders whose day/token disagree with the book or whose
    // price/qty are non-positive.
    void add(const Order& order);
    std::size_t size() const { return bids.size() + asks.size(); }
};

struct CurvePoint {
    std::int64_t price = 0;
    std::int64_t cumulative_qty = 0;
};

// Total bid quantity willing to pay at least `price`.
std::int64_t demand_at(const OrderBook& book, std::int64_t price);
// Total ask quantity willing to sell at or below `price`.
std::int64_t supply_at(const OrderBook& book, std::int64_t price);

// Step curves sampled at every distinct order price, ascending.
std::vector<CurvePoint> demand_curve(const OrderBook& book);
std::vector<CurvePoint> supply_curve(const OrderBook& book);

struct Fill {
    std::string order_id;
    std::string account;
    Side side = Side::Buy;
    std::int64_t qty = 0;
};

struct ClearingResult {
    int day = 0;
    TokenKind token = TokenKind::UPX;
    std::optional<std::int64_t> price; // empty when nothing crossed
    std::int64_t volume = 0;
    std::vector<Fill> fills;            // buys first, then sells, each in priority order
    std::vector<std::string> rejected;  // order ids with zero fill

    std::int64_t filled(Side s) const;
};

/* Single-price batch clear.
 *
 * Maximizes executed volume, then prices at the midpoint (rounded down) of
 * the equilibrium interval: the sub-range of volume-maximizing prices at
 * which every strictly-better order can fill in full and only at-price
 * orders need rationing. Strict orders fill first; at-price orders fill by
 * arrival. The same book always produces the same result.
 */
ClearingResult clear(const OrderBook& book);

/* Order admission with escrow.
 *
 * One tracker per trading day. A sell is admitted if the account's token
 * balance covers it on top of its other open asks; a buy if the account's
 * currency covers price*qty on top of its other open bids. Admitted orders
 * are escrowed immediately; escrow vanishes with the tracker once the day
 * is settled.
 */
class EscrowTracker {
public:
    explicit EscrowTracker(const Ledger& ledger) : ledger_(&ledger) {}

    // Throws Error(InsufficientTokens/InsufficientCurrency/...); no state
    // changes on failure.
    void validate_and_escrow(const Order& order);

    std::int64_t escrowed_tokens(const std::string& account, TokenKind k) const;
    std::int64_t escrowed_currency(const std::string& account) const;

private:
    const Ledger* ledger_;
    std::map<std::pair<std::string, TokenKind>, std::int64_t> token_escrow_;
    std::map<std::string, std::int64_t> currency_escrow_;
};

// Moves tokens seller->buyer and currency buyer->seller for every fill, all
// at the clearing price. No-op when the result carries no volume.
void settle(Ledger& ledger, const ClearingResult& result);

} // namespace emx
