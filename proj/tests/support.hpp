#pragma once

/* Shared helpers for the test suite.
 *
 * The reference computations here (unit-price clearing, GF(2) ranks) are
 * deliberately written from scratch rather than calling back into the
 * library, so they can serve as independent oracles.
 */

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emx/auction.hpp"
#include "emx/errors.hpp"
#include "emx/rng.hpp"
#include "emx/tda.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// error capture

template <typename F>
std::optional<emx::Errc> error_code_of(F&& f) {
    try {
        std::forward<F>(f)();
    } catch (const emx::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

template <typename F>
std::string error_message_of(F&& f) {
    try {
        std::forward<F>(f)();
    } catch (const emx::Error& e) {
        return e.what();
    }
    return "";
}

// ---------------------------------------------------------------------------
// scratch directories and subprocesses

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("emx_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string sub(const std::string& name) const { return (path_ / name).string(); }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

struct CmdResult {
    int status = -1;
    std::string output; // stdout and stderr interleaved
};

inline CmdResult run_cmd(const std::string& cmd) {
    CmdResult r;
    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    const int rc = ::pclose(pipe);
    if (WIFEXITED(rc)) r.status = WEXITSTATUS(rc);
    return r;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

// sorted relative paths of every regular file under root
inline std::vector<std::string> tree_files(const std::filesystem::path& root) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            files.push_back(std::filesystem::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
}

// empty string when the two trees hold byte-identical files; else a description
inline std::string tree_diff(const std::filesystem::path& a, const std::filesystem::path& b) {
    const std::vector<std::string> fa = tree_files(a), fb = tree_files(b);
    if (fa != fb) return "file sets differ";
    for (const std::string& rel : fa)
        if (slurp((a / rel).string()) != slurp((b / rel).string())) return "content differs: " + rel;
    return "";
}

// ---------------------------------------------------------------------------
// independent auction reference: unit-price expansion

struct ReferenceClearing {
    std::int64_t volume = 0;
    std::optional<std::int64_t> price;
    std::int64_t lo = 0, hi = 0; // equilibrium interval, meaningful when volume > 0
};

inline ReferenceClearing reference_clear(const emx::OrderBook& book) {
    std::vector<std::int64_t> bid_units, ask_units;
    for (const emx::Order& o : book.bids)
        for (std::int64_t i = 0; i < o.qty; ++i) bid_units.push_back(o.price);
    for (const emx::Order& o : book.asks)
        for (std::int64_t i = 0; i < o.qty; ++i) ask_units.push_back(o.price);
    std::sort(bid_units.begin(), bid_units.end(), std::greater<>());
    std::sort(ask_units.begin(), ask_units.end());

    std::size_t v = 0;
    while (v < bid_units.size() && v < ask_units.size() && bid_units[v] >= ask_units[v]) ++v;

    ReferenceClearing r;
    r.volume = static_cast<std::int64_t>(v);
    if (v == 0) return r;

    // every strictly-better order must fill completely: the first unexecuted
    // bid unit bounds the price from below, the first unexecuted ask from above
    std::int64_t lo = ask_units[v - 1];
    if (v < bid_units.size()) lo = std::max(lo, bid_units[v]);
    std::int64_t hi = bid_units[v - 1];
    if (v < ask_units.size()) hi = std::min(hi, ask_units[v]);
    r.lo = lo;
    r.hi = hi;
    r.price = (lo + hi) / 2;
    return r;
}

// max over integer prices of min(demand, supply), scanned exhaustively
inline std::int64_t scan_max_volume(const emx::OrderBook& book, std::int64_t price_cap) {
    std::int64_t best = 0;
    for (std::int64_t p = 1; p <= price_cap; ++p) {
        std::int64_t d = 0, s = 0;
        for (const emx::Order& o : book.bids)
            if (o.price >= p) d += o.qty;
        for (const emx::Order& o : book.asks)
            if (o.price <= p) s += o.qty;
        best = std::max(best, std::min(d, s));
    }
    return best;
}

/* Structural invariants any acceptable clearing must satisfy. Returns an
 * empty string on success, else a description of the first violation.
 */
inline std::string clearing_violation(const emx::OrderBook& book, const emx::ClearingResult& res) {
    if (res.day != book.day || res.token != book.token) return "day/token mismatch";

    std::map<std::string, const emx::Order*> orders;
    for (const emx::Order& o : book.bids) orders[o.id] = &o;
    for (const emx::Order& o : book.asks) orders[o.id] = &o;

    std::map<std::string, std::int64_t> fill_of;
    std::int64_t bought = 0, sold = 0;
    for (const emx::Fill& f : res.fills) {
        auto it = orders.find(f.order_id);
        if (it == orders.end()) return "fill for unknown order " + f.order_id;
        const emx::Order& o = *it->second;
        if (f.account != o.account) return "fill account mismatch for " + f.order_id;
        if (f.side != o.side) return "fill side mismatch for " + f.order_id;
        if (f.qty <= 0 || f.qty > o.qty) return "fill qty out of range for " + f.order_id;
        if (fill_of.count(f.order_id)) return "order filled twice: " + f.order_id;
        fill_of[f.order_id] = f.qty;
        (f.side == emx::Side::Buy ? bought : sold) += f.qty;
    }
    if (bought != res.volume || sold != res.volume) return "fills do not sum to the volume";

    std::set<std::string> rejected(res.rejected.begin(), res.rejected.end());
    if (rejected.size() != res.rejected.size()) return "duplicate rejected ids";
    for (const auto& [id, o] : orders) {
        (void)o;
        const bool filled = fill_of.count(id) > 0;
        if (filled == (rejected.count(id) > 0)) return "order " + id + " must be filled xor rejected";
    }
    for (const std::string& id : res.rejected)
        if (!orders.count(id)) return "rejected unknown order " + id;

    if (res.volume == 0) {
        if (res.price) return "price set on an empty clearing";
        return "";
    }
    if (!res.price) return "volume without a price";
    const std::int64_t p = *res.price;

    // executed volume must be feasible at the chosen price
    std::int64_t demand = 0, supply = 0;
    for (const emx::Order& o : book.bids)
        if (o.price >= p) demand += o.qty;
    for (const emx::Order& o : book.asks)
        if (o.price <= p) supply += o.qty;
    if (res.volume > std::min(demand, supply)) return "volume exceeds feasibility at the price";

    // strict orders fill in full; orders on the wrong side of the price not at all
    for (const auto& [id, o] : orders) {
        const std::int64_t got = fill_of.count(id) ? fill_of[id] : 0;
        if (o->side == emx::Side::Buy) {
            if (o->price > p && got != o->qty) return "strict bid " + id + " not fully filled";
            if (o->price < p && got != 0) return "bid " + id + " filled below the price";
        } else {
            if (o->price < p && got != o->qty) return "strict ask " + id + " not fully filled";
            if (o->price > p && got != 0) return "ask " + id + " filled above the price";
        }
    }

    // at-price rationing strictly by arrival: a greedy prefix
    auto check_prefix = [&](std::vector<const emx::Order*> at, const char* what) -> std::string {
        std::sort(at.begin(), at.end(), [](const emx::Order* a, const emx::Order* b) {
            if (a->arrival != b->arrival) return a->arrival < b->arrival;
            return a->id < b->id;
        });
        bool exhausted = false;
        for (const emx::Order* o : at) {
            const std::int64_t got = fill_of.count(o->id) ? fill_of[o->id] : 0;
            if (exhausted && got != 0) return std::string(what) + " " + o->id + " filled after an earlier partial";
            if (got < o->qty) exhausted = true;
        }
        return "";
    };
    std::vector<const emx::Order*> at_bids, at_asks;
    for (const emx::Order& o : book.bids)
        if (o.price == p) at_bids.push_back(&o);
    for (const emx::Order& o : book.asks)
        if (o.price == p) at_asks.push_back(&o);
    if (std::string err = check_prefix(at_bids, "at-price bid"); !err.empty()) return err;
    if (std::string err = check_prefix(at_asks, "at-price ask"); !err.empty()) return err;
    return "";
}

inline emx::OrderBook random_book(emx::Rng& rng, int day, int max_orders = 100, std::int64_t price_cap = 50,
                                  std::int64_t qty_cap = 20) {
    emx::OrderBook book;
    book.day = day;
    book.token = emx::TokenKind::UPX;
    const int n = static_cast<int>(rng.uniform_int(0, max_orders));
    for (int i = 0; i < n; ++i) {
        emx::Order o;
        o.day = day;
        o.token = book.token;
        o.side = rng.bernoulli(0.5) ? emx::Side::Buy : emx::Side::Sell;
        o.price = rng.uniform_int(1, price_cap);
        o.qty = rng.uniform_int(1, qty_cap);
        o.arrival = i + 1;
        o.id = emx::make_order_id(day, o.arrival);
        o.account = "s" + std::to_string(rng.uniform_int(1, 12));
        book.add(o);
    }
    return book;
}

// ---------------------------------------------------------------------------
// GF(2) ranks and Betti numbers, independent of the persistence reduction

inline int gf2_rank(const std::vector<std::vector<int>>& columns, int rows) {
    const int blocks = rows <= 0 ? 1 : (rows + 63) / 64;
    auto highest = [blocks](const std::vector<std::uint64_t>& b) {
        for (int blk = blocks - 1; blk >= 0; --blk)
            if (b[static_cast<std::size_t>(blk)])
                return blk * 64 + 63 - __builtin_clzll(b[static_cast<std::size_t>(blk)]);
        return -1;
    };
    std::vector<std::vector<std::uint64_t>> basis;
    std::vector<int> basis_high;
    int rank = 0;
    for (const std::vector<int>& c : columns) {
        std::vector<std::uint64_t> b(static_cast<std::size_t>(blocks), 0);
        for (int r : c) b[static_cast<std::size_t>(r / 64)] ^= 1ULL << (r % 64);
        int h = highest(b);
        while (h >= 0) {
            bool reduced = false;
            for (std::size_t k = 0; k < basis.size(); ++k)
                if (basis_high[k] == h) {
                    for (int blk = 0; blk < blocks; ++blk)
                        b[static_cast<std::size_t>(blk)] ^= basis[k][static_cast<std::size_t>(blk)];
                    h = highest(b);
                    reduced = true;
                    break;
                }
            if (!reduced) break;
        }
        if (h >= 0) {
            basis.push_back(std::move(b));
            basis_high.push_back(h);
            ++rank;
        }
    }
    return rank;
}

struct BettiNumbers {
    long b0 = 0, b1 = 0, b2 = 0;
    long vertices = 0, edges = 0, triangles = 0;
    long euler() const { return vertices - edges + triangles; }
};

// Betti numbers of the sublevel complex {value <= r} via boundary-matrix ranks.
inline BettiNumbers rank_betti(const std::vector<emx::FilteredSimplex>& filtration, double r) {
    std::map<std::array<int, 3>, int> vertex_index, edge_index;
    std::vector<std::vector<int>> d1, d2;
    for (const emx::FilteredSimplex& s : filtration) {
        if (s.value > r) continue;
        if (s.dim == 0) vertex_index.emplace(s.vertices, static_cast<int>(vertex_index.size()));
    }
    for (const emx::FilteredSimplex& s : filtration) {
        if (s.value > r || s.dim != 1) continue;
        edge_index.emplace(s.vertices, static_cast<int>(edge_index.size()));
        const std::array<int, 3> va{s.vertices[0], -1, -1}, vb{s.vertices[1], -1, -1};
        d1.push_back({vertex_index.at(va), vertex_index.at(vb)});
    }
    for (const emx::FilteredSimplex& s : filtration) {
        if (s.value > r || s.dim != 2) continue;
        const int a = s.vertices[0], b = s.vertices[1], c = s.vertices[2];
        d2.push_back({edge_index.at({a, b, -1}), edge_index.at({a, c, -1}), edge_index.at({b, c, -1})});
    }
    BettiNumbers out;
    out.vertices = static_cast<long>(vertex_index.size());
    out.edges = static_cast<long>(edge_index.size());
    out.triangles = static_cast<long>(d2.size());
    const int r1 = gf2_rank(d1, static_cast<int>(out.vertices));
    const int r2 = gf2_rank(d2, static_cast<int>(out.edges));
    out.b0 = out.vertices - r1;
    out.b1 = (out.edges - r1) - r2;
    out.b2 = out.triangles - r2;
    return out;
}

// classes of dimension `dim` alive at radius r, read off the diagram
inline long pairs_betti(const std::vector<emx::PersistencePair>& pairs, int dim, double r) {
    long n = 0;
    for (const emx::PersistencePair& p : pairs)
        if (p.dim == dim && p.birth <= r && r < p.death) ++n;
    return n;
}

// thresholds that probe every regime of the filtration: each distinct value
// and the midpoints between consecutive ones, plus one beyond the end
inline std::vector<double> probe_radii(const std::vector<emx::FilteredSimplex>& filtration) {
    std::set<double> values;
    for (const emx::FilteredSimplex& s : filtration) values.insert(s.value);
    std::vector<double> sorted(values.begin(), values.end());
    std::vector<double> probes;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        probes.push_back(sorted[i]);
        if (i + 1 < sorted.size()) probes.push_back((sorted[i] + sorted[i + 1]) / 2);
    }
    if (!sorted.empty()) probes.push_back(sorted.back() + 1.0);
    return probes;
}

inline emx::PointCloud random_cloud(emx::Rng& rng, int n, double span = 10.0) {
    std::vector<std::array<double, 2>> xy;
    xy.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) xy.push_back({rng.uniform01() * span, rng.uniform01() * span});
    return emx::cloud_from_xy(xy);
}

// brute-force minimal enclosing circle radius of up to a handful of points
inline double brute_mec_radius(const std::vector<std::array<double, 2>>& pts) {
    auto covers = [&](double cx, double cy, double r) {
        for (const auto& p : pts) {
            const double dx = p[0] - cx, dy = p[1] - cy;
            if (std::sqrt(dx * dx + dy * dy) > r * (1 + 1e-12)) return false;
        }
        return true;
    };
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double cx = (pts[i][0] + pts[j][0]) / 2, cy = (pts[i][1] + pts[j][1]) / 2;
            const double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1];
            const double r = std::sqrt(dx * dx + dy * dy) / 2;
            if (covers(cx, cy, r)) best = std::min(best, r);
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) {
                const double ax = pts[i][0], ay = pts[i][1], bx = pts[j][0], by = pts[j][1], cx = pts[k][0],
                             cy = pts[k][1];
                const double d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if (d == 0) continue;
                const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
                const double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                const double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                const double r = std::sqrt((ax - ux) * (ax - ux) + (ay - uy) * (ay - uy));
                if (covers(ux, uy, r)) best = std::min(best, r);
            }
    return best;
}

// ---------------------------------------------------------------------------
// a tiny fully scripted month, shared by the analysis-layer tests
//
// Two students over four days. Issuance grants each 30 UPX + 3 SPX (60/6
// previous-year kWh over 2 beds) and the forecasts stay under the holdings,
// so no system shortage asks interfere. Day 2 trades 5 UPX at 10, day 3
// trades 2 SPX at 14, days 1 and 4 see no volume; s02 consumes nothing on
// day 4, which keeps one student out of that day's point cloud.

inline emx::Scenario scripted_scenario() {
    emx::Scenario sc;
    sc.month.days_in_month = 4;
    sc.month.num_students = 2;
    sc.month.initial_currency = 2000;
    sc.month.prev_year_usage_upx_kwh = 60;
    sc.month.prev_year_usage_spx_kwh = 6;
    sc.active_students = 2;
    return sc;
}

inline emx::MonthRecord scripted_month() {
    auto order = [](std::string id, std::string account, emx::TokenKind token, emx::Side side,
                    std::int64_t price, std::int64_t qty, int day, int arrival) {
        emx::Order o;
        o.id = std::move(id);
        o.account = std::move(account);
        o.token = token;
        o.side = side;
        o.price = price;
        o.qty = qty;
        o.day = day;
        o.arrival = arrival;
        return o;
    };

    emx::DaySource source = [order](int day, const emx::Ledger&, const emx::PerToken&) {
        emx::DayInputs in;
        switch (day) {
            case 1: in.usage_kwh = {2.0, 1.0}; break;
            case 2:
                in.usage_kwh = {3.0, 2.5};
                in.orders = {order("d2#1", "s01", emx::TokenKind::UPX, emx::Side::Sell, 9, 5, 2, 1),
                             order("d2#2", "s02", emx::TokenKind::UPX, emx::Side::Buy, 11, 5, 2, 2)};
                break;
            case 3:
                in.usage_kwh = {1.0, 4.0};
                in.orders = {order("d3#1", "s01", emx::TokenKind::SPX, emx::Side::Sell, 13, 2, 3, 1),
                             order("d3#2", "s02", emx::TokenKind::SPX, emx::Side::Buy, 15, 2, 3, 2)};
                break;
            default: in.usage_kwh = {2.0, 0.0}; break;
        }
        return in;
    };
    return emx::run_month(scripted_scenario(), 77, source);
}

} // namespace testsupport
