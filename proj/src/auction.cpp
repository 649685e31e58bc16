#include "emx/auction.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <set>

namespace emx {

const char* to_string(Side s) { return s == Side::Buy ? "buy" : "sell"; }

Side side_from_string(const std::string& s) {
    if (s == "buy") return Side::Buy;
    if (s == "sell") return Side::Sell;
    fail(Errc::ParseError, "unknown side: " + s);
}

std::string make_order_id(int day, int arrival) {
    return "d" + std::to_string(day) + "#" + std::to_string(arrival);
}

void OrderBook::add(const Order& order) {
    if (order.price <= 0 || order.qty <= 0)
        fail(Errc::InvalidOrder, "order " + order.id + ": price and qty must be positive");
    if (order.qty > std::numeric_limits<std::int64_t>::max() / order.price)
        fail(Errc::InvalidOrder, "order " + order.id + ": price*qty overflows");
    if (order.day != day || order.token != token)
        fail(Errc::MixedTokenBook, "order " + order.id + " does not belong to this book");
    (order.side == Side::Buy ? bids : asks).push_back(order);
}

std::int64_t demand_at(const OrderBook& book, std::int64_t price) {
    std::int64_t q = 0;
    for (const Order& o : book.bids)
        if (o.price >= price) q += o.qty;
    return q;
}

std::int64_t supply_at(const OrderBook& book, std::int64_t price) {
    std::int64_t q = 0;
    for (const Order& o : book.asks)
        if (o.price <= price) q += o.qty;
    return q;
}

namespace {

std::vector<std::int64_t> distinct_prices(const OrderBook& book) {
    std::set<std::int64_t> prices;
    for (const Order& o : book.bids) prices.insert(o.price);
    for (const Order& o : book.asks) prices.insert(o.price);
    return {prices.begin(), prices.end()};
}

void check_book(const OrderBook& book) {
    for (const Order& o : book.bids) {
        if (o.token != book.token || o.day != book.day)
            fail(Errc::MixedTokenBook, "bid " + o.id + " does not match the book");
        if (o.side != Side::Buy) fail(Errc::MixedTokenBook, "sell order on the bid side: " + o.id);
        if (o.price <= 0 || o.qty <= 0) fail(Errc::InvalidOrder, "bad bid " + o.id);
    }
    for (const Order& o : book.asks) {
        if (o.token != book.token || o.day != book.day)
            fail(Errc::MixedTokenBook, "ask " + o.id + " does not match the book");
        if (o.side != Side::Sell) fail(Errc::MixedTokenBook, "buy order on the ask side: " + o.id);
        if (o.price <= 0 || o.qty <= 0) fail(Errc::InvalidOrder, "bad ask " + o.id);
    }
}

bool bid_before(const Order& a, const Order& b) {
    if (a.price != b.price) return a.price > b.price;
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.id < b.id;
}

bool ask_before(const Order& a, const Order& b) {
    if (a.price != b.price) return a.price < b.price;
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.id < b.id;
}

// Price of the k-th unit (1-based) down a priority-sorted list; nullopt past the end.
std::optional<std::int64_t> unit_price(const std::vector<Order>& sorted, std::int64_t k) {
    std::int64_t cum = 0;
    for (const Order& o : sorted) {
        cum += o.qty;
        if (cum >= k) return o.price;
    }
    return std::nullopt;
}

} // namespace

std::vector<CurvePoint> demand_curve(const OrderBook& book) {
    std::vector<CurvePoint> curve;
    for (std::int64_t p : distinct_prices(book)) curve.push_back({p, demand_at(book, p)});
    return curve;
}

std::vector<CurvePoint> supply_curve(const OrderBook& book) {
    std::vector<CurvePoint> curve;
    for (std::int64_t p : distinct_prices(book)) curve.push_back({p, supply_at(book, p)});
    return curve;
}

std::int64_t ClearingResult::filled(Side s) const {
    std::int64_t q = 0;
    for (const Fill& f : fills)
        if (f.side == s) q += f.qty;
    return q;
}

ClearingResult clear(const OrderBook& book) {
    check_book(book);

    ClearingResult res;
    res.day = book.day;
    res.token = book.token;

    std::vector<Order> bids = book.bids;
    std::vector<Order> asks = book.asks;
    std::sort(bids.begin(), bids.end(), bid_before);
    std::sort(asks.begin(), asks.end(), ask_before);

    // Maximum executable volume: match the best remaining bid unit against
    // the best remaining ask unit while the bid still pays the ask. This
    // equals max over p of min(demand_at(p), supply_at(p)).
    std::int64_t volume = 0;
    {
        std::size_t i = 0, j = 0;
        std::int64_t brem = bids.empty() ? 0 : bids[0].qty;
        std::int64_t arem = asks.empty() ? 0 : asks[0].qty;
        while (i < bids.size() && j < asks.size() && bids[i].price >= asks[j].price) {
            const std::int64_t q = std::min(brem, arem);
            volume += q;
            brem -= q;
            arem -= q;
            if (brem == 0 && ++i < bids.size()) brem = bids[i].qty;
            if (arem == 0 && ++j < asks.size()) arem = asks[j].qty;
        }
    }

    if (volume == 0) {
        for (const Order& o : bids) res.rejected.push_back(o.id);
        for (const Order& o : asks) res.rejected.push_back(o.id);
        return res;
    }

    /* Equilibrium price interval [lo, hi]: clearing anywhere inside lets all
     * strictly-better orders fill in full with only at-price orders
     * rationed. Bound below by the marginal executed ask and the first
     * unexecuted bid unit, above by the marginal executed bid and the first
     * unexecuted ask unit. Nonempty whenever volume > 0.
     */
    const std::int64_t bid_v = *unit_price(bids, volume);
    const std::int64_t ask_v = *unit_price(asks, volume);
    const std::optional<std::int64_t> bid_next = unit_price(bids, volume + 1);
    const std::optional<std::int64_t> ask_next = unit_price(asks, volume + 1);

    std::int64_t lo = ask_v;
    if (bid_next) lo = std::max(lo, *bid_next);
    std::int64_t hi = bid_v;
    if (ask_next) hi = std::min(hi, *ask_next);
    assert(lo <= hi);

    // midpoint; on a .5 tie take the lower (consumer-side) price
    const std::int64_t price = (lo + hi) / 2;
    res.price = price;
    res.volume = volume;

    // Greedy fills in priority order. Sorting guarantees strict orders come
    // first, so they complete before any at-price rationing begins.
    auto take = [&res](const std::vector<Order>& sorted, Side side) {
        std::int64_t left = res.volume;
        for (const Order& o : sorted) {
            const std::int64_t q = std::min(left, o.qty);
            if (q > 0) res.fills.push_back({o.id, o.account, side, q});
            else res.rejected.push_back(o.id);
            left -= q;
        }
    };
    take(bids, Side::Buy);
    take(asks, Side::Sell);

    assert(res.filled(Side::Buy) == volume && res.filled(Side::Sell) == volume);
    return res;
}

void EscrowTracker::validate_and_escrow(const Order& order) {
    if (order.price <= 0 || order.qty <= 0)
        fail(Errc::InvalidOrder, "order " + order.id + ": price and qty must be positive");
    if (order.qty > std::numeric_limits<std::int64_t>::max() / order.price)
        fail(Errc::InvalidOrder, "order " + order.id + ": price*qty overflows");

    if (order.side == Side::Sell) {
        const std::int64_t held = ledger_->balance_of(order.account, order.token);
        const std::int64_t open = escrowed_tokens(order.account, order.token);
        if (held - open < order.qty)
            fail(Errc::InsufficientTokens, "order " + order.id + ": " + order.account + " has " +
                                               std::to_string(held - open) + " free " + to_string(order.token) +
                                               ", needs " + std::to_string(order.qty));
        token_escrow_[{order.account, order.token}] = open + order.qty;
    } else {
        const std::int64_t cost = order.price * order.qty;
        const std::int64_t cash = ledger_->currency_of(order.account);
        const std::int64_t open = escrowed_currency(order.account);
        if (cash - open < cost)
            fail(Errc::InsufficientCurrency, "order " + order.id + ": " + order.account + " has " +
                                                 std::to_string(cash - open) + " free currency, needs " +
                                                 std::to_string(cost));
        currency_escrow_[order.account] = open + cost;
    }
}

std::int64_t EscrowTracker::escrowed_tokens(const std::string& account, TokenKind k) const {
    auto it = token_escrow_.find({account, k});
    return it == token_escrow_.end() ? 0 : it->second;
}

std::int64_t EscrowTracker::escrowed_currency(const std::string& account) const {
    auto it = currency_escrow_.find(account);
    return it == currency_escrow_.end() ? 0 : it->second;
}

void settle(Ledger& ledger, const ClearingResult& result) {
    if (result.volume == 0) return;
    assert(result.price.has_value());
    const std::int64_t price = *result.price;

    std::vector<const Fill*> buys, sells;
    for (const Fill& f : result.fills) (f.side == Side::Buy ? buys : sells).push_back(&f);

    // pair buy and sell fills in priority order; uniform price throughout
    std::size_t bi = 0, si = 0;
    std::int64_t brem = buys.empty() ? 0 : buys[0]->qty;
    std::int64_t srem = sells.empty() ? 0 : sells[0]->qty;
    while (bi < buys.size() && si < sells.size()) {
        const std::int64_t q = std::min(brem, srem);
        ledger.transfer(result.token, sells[si]->account, buys[bi]->account, q, result.day, "trade");
        ledger.pay(buys[bi]->account, sells[si]->account, q * price, result.day, "trade_pay");
        brem -= q;
        srem -= q;
        if (brem == 0 && ++bi < buys.size()) brem = buys[bi]->qty;
        if (srem == 0 && ++si < sells.size()) srem = sells[si]->qty;
    }
}

} // namespace emx
