#include "emx/market_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"

#include "emx/record_io.hpp"

namespace emx {

namespace {

bool day_traded(const DayRecord& d) {
    for (const auto& [token, result] : d.results) {
        (void)token;
        if (result.volume > 0) return true;
    }
    return false;
}

} // namespace

std::vector<DayLabel> label_days(const MonthRecord& record, const DiagramsByDay& diagrams, double theta) {
    std::vector<DayLabel> labels;
    for (int day = 2; day <= static_cast<int>(record.days.size()); ++day) {
        auto it = diagrams.find(day);
        if (it == diagrams.end())
            fail(Errc::MissingDiagram, "no persistence diagram for day " + std::to_string(day));
        DayLabel l;
        l.day = day;
        l.has_transactions = day_traded(record.days[static_cast<std::size_t>(day - 1)]);
        l.has_robust_cavity = !robust_cavities(it->second, theta).empty();
        labels.push_back(l);
    }
    return labels;
}

ContingencyTable contingency(const std::vector<DayLabel>& labels) {
    ContingencyTable t;
    for (const DayLabel& l : labels) {
        if (l.has_transactions)
            ++(l.has_robust_cavity ? t.n_tx_cav : t.n_tx_nocav);
        else
            ++(l.has_robust_cavity ? t.n_notx_cav : t.n_notx_nocav);
    }
    return t;
}

ActivityRatios activity_ratios(const ContingencyTable& t) {
    ActivityRatios r;
    if (t.n_tx_nocav > 0) r.with_tx = static_cast<double>(t.n_tx_cav) / static_cast<double>(t.n_tx_nocav);
    if (t.n_notx_nocav > 0) r.without_tx = static_cast<double>(t.n_notx_cav) / static_cast<double>(t.n_notx_nocav);
    return r;
}

namespace {

double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
           std::lgamma(static_cast<double>(n - k + 1));
}

// Two-sided Fisher exact test: sum the hypergeometric probabilities of all
// tables with the observed margins that are no more likely than the observed
// one.
double fisher_two_sided(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    std::int64_t row1 = a + b, row2 = c + d, col1 = a + c, n = a + b + c + d;
    double log_denom = log_choose(n, col1);
    auto log_p = [&](std::int64_t k) {
        return log_choose(row1, k) + log_choose(row2, col1 - k) - log_denom;
    };
    double observed = log_p(a);
    std::int64_t lo = std::max<std::int64_t>(0, col1 - row2);
    std::int64_t hi = std::min(row1, col1);
    double p = 0;
    for (std::int64_t k = lo; k <= hi; ++k) {
        double lp = log_p(k);
        if (lp <= observed + 1e-7) p += std::exp(lp);
    }
    return std::min(p, 1.0);
}

} // namespace

Association association(const ContingencyTable& t) {
    Association a;
    if (t.n_tx_nocav * t.n_notx_cav > 0)
        a.odds_ratio = static_cast<double>(t.n_tx_cav * t.n_notx_nocav) /
                       static_cast<double>(t.n_tx_nocav * t.n_notx_cav);
    if (t.total() > 0)
        a.fisher_p = fisher_two_sided(t.n_tx_cav, t.n_tx_nocav, t.n_notx_cav, t.n_notx_nocav);
    return a;
}

namespace {

using nlohmann::ordered_json;

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string opt2(const std::optional<double>& v) { return v ? fmt2(*v) : "n/a"; }

ordered_json opt_json(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json table_json(const ContingencyTable& t, double theta) {
    ActivityRatios r = activity_ratios(t);
    Association assoc = association(t);
    ordered_json j;
    j["theta"] = theta;
    j["tx_cav"] = t.n_tx_cav;
    j["tx_nocav"] = t.n_tx_nocav;
    j["notx_cav"] = t.n_notx_cav;
    j["notx_nocav"] = t.n_notx_nocav;
    j["total"] = t.total();
    j["ratio_with_tx"] = opt_json(r.with_tx);
    j["ratio_without_tx"] = opt_json(r.without_tx);
    j["odds_ratio"] = opt_json(assoc.odds_ratio);
    j["fisher_p"] = opt_json(assoc.fisher_p);
    return j;
}

void check_inputs(const MonthRecord& record, const std::map<TokenKind, Hypergraph>& graphs,
                  const DiagramsByDay& diagrams) {
    const int last = static_cast<int>(record.days.size());
    for (const auto& [day, pairs] : diagrams) {
        (void)pairs;
        if (day < 2 || day > last)
            fail(Errc::InputMismatch, "diagram for day " + std::to_string(day) + " outside this record");
    }
    std::set<std::string> known(record.students.begin(), record.students.end());
    for (const auto& [id, bal] : record.ledger.accounts()) {
        (void)bal;
        known.insert(id);
    }
    for (const auto& [token, g] : graphs) {
        if (g.token != token) fail(Errc::InputMismatch, "hypergraph filed under the wrong token");
        for (const std::string& n : g.nodes)
            if (!known.count(n)) fail(Errc::InputMismatch, "hypergraph node not in this record: " + n);
        for (const Hyperedge& e : g.edges) {
            if (e.day < 1 || e.day > last)
                fail(Errc::InputMismatch, "hyperedge day " + std::to_string(e.day) + " outside this record");
            const auto& results = record.days[static_cast<std::size_t>(e.day - 1)].results;
            auto it = results.find(token);
            if (it == results.end() || it->second.volume <= 0)
                fail(Errc::InputMismatch,
                     "hyperedge on day " + std::to_string(e.day) + " but the record shows no trade");
        }
    }
}

} // namespace

Report build_report(const MonthRecord& record, const std::map<TokenKind, Hypergraph>& graphs,
                    const DiagramsByDay& diagrams, double theta) {
    check_inputs(record, graphs, diagrams);

    const int last = static_cast<int>(record.days.size());
    const TokenKind kinds[2] = {TokenKind::UPX, TokenKind::SPX};

    ordered_json j;
    j["schema_version"] = 1;
    j["generator"] = std::string(kToolName) + " " + kToolVersion;
    {
        ordered_json run;
        run["seed"] = record.seed;
        run["config_hash"] = fnv1a_hex(dump_scenario(record.scenario));
        run["days"] = last;
        run["students"] = record.students.size();
        run["theta"] = theta;
        j["run"] = run;
    }

    std::string text;
    text += "ENERGY TOKEN MARKET REPORT\n";
    text += "==========================\n";
    text += "seed " + std::to_string(record.seed) + ", " + std::to_string(last) + " days, " +
            std::to_string(record.students.size()) + " students, theta " + fmt2(theta) + "\n\n";

    // --- market activity -------------------------------------------------
    ordered_json market_days = ordered_json::array();
    std::map<TokenKind, std::int64_t> volume_total;
    int trading_days = 0;
    std::string curves = "day,token,side,price,cumulative_qty\n";
    text += "MARKET ACTIVITY\n";
    text += "day token bids asks volume price\n";
    for (int day = 1; day <= last; ++day) {
        const DayRecord& d = record.days[static_cast<std::size_t>(day - 1)];
        if (day_traded(d)) ++trading_days;
        ordered_json dj;
        dj["day"] = day;
        for (TokenKind k : kinds) {
            ordered_json tj;
            std::size_t bids = 0, asks = 0;
            auto bit = d.books.find(k);
            if (bit != d.books.end()) {
                bids = bit->second.bids.size();
                asks = bit->second.asks.size();
                for (const CurvePoint& p : demand_curve(bit->second))
                    curves += std::to_string(day) + "," + to_string(k) + ",demand," + std::to_string(p.price) +
                              "," + std::to_string(p.cumulative_qty) + "\n";
                for (const CurvePoint& p : supply_curve(bit->second))
                    curves += std::to_string(day) + "," + to_string(k) + ",supply," + std::to_string(p.price) +
                              "," + std::to_string(p.cumulative_qty) + "\n";
            }
            tj["bids"] = bids;
            tj["asks"] = asks;
            std::int64_t volume = 0;
            ordered_json price(nullptr);
            auto rit = d.results.find(k);
            if (rit != d.results.end()) {
                volume = rit->second.volume;
                if (rit->second.price) price = *rit->second.price;
            }
            tj["volume"] = volume;
            tj["price"] = price;
            volume_total[k] += volume;
            dj[to_string(k)] = tj;

            std::string price_str = price.is_null() ? "-" : std::to_string(price.get<std::int64_t>());
            char line[96];
            std::snprintf(line, sizeof line, "%3d %-5s %4zu %4zu %6lld %5s\n", day, to_string(k), bids, asks,
                          static_cast<long long>(volume), price_str.c_str());
            text += line;
        }
        market_days.push_back(dj);
    }
    {
        ordered_json m;
        m["days"] = market_days;
        ordered_json totals;
        for (TokenKind k : kinds) totals[to_string(k)] = volume_total[k];
        totals["trading_days"] = trading_days;
        m["totals"] = totals;
        j["market"] = m;
    }
    text += "totals: UPX volume " + std::to_string(volume_total[TokenKind::UPX]) + ", SPX volume " +
            std::to_string(volume_total[TokenKind::SPX]) + ", trading days " + std::to_string(trading_days) +
            "\n\n";

    // --- hypergraphs ------------------------------------------------------
    text += "HYPERGRAPHS\n";
    {
        ordered_json hj;
        for (const auto& [token, g] : graphs) {
            ordered_json gj;
            gj["nodes"] = g.nodes.size();
            gj["edges"] = g.edges.size();
            bool has_admin =
                std::binary_search(g.nodes.begin(), g.nodes.end(), record.ledger.system_account());
            gj["admin_degree"] = has_admin ? degree(g, record.ledger.system_account()) : 0;
            ordered_json hist;
            std::string hist_text;
            for (const auto& [card, count] : cardinality_histogram(g)) {
                hist[std::to_string(card)] = count;
                hist_text += " " + std::to_string(card) + ":" + std::to_string(count);
            }
            gj["cardinality_histogram"] = hist;
            hj[to_string(token)] = gj;
            text += std::string(to_string(token)) + ": " + std::to_string(g.nodes.size()) + " nodes, " +
                    std::to_string(g.edges.size()) + " edges, admin degree " +
                    std::to_string(has_admin ? degree(g, record.ledger.system_account()) : 0) +
                    ", cardinalities" + (hist_text.empty() ? " none" : hist_text) + "\n";
        }
        j["hypergraphs"] = hj;
    }
    text += "\n";

    // --- persistence summary ---------------------------------------------
    text += "PERSISTENCE\n";
    text += "day h1_pairs robust max_robustness\n";
    {
        ordered_json pj = ordered_json::array();
        int robust_days = 0;
        for (const auto& [day, pairs] : diagrams) {
            int h1 = 0;
            double max_rob = 0;
            bool any = false;
            for (const PersistencePair& p : pairs)
                if (p.dim == 1) {
                    ++h1;
                    if (!any || p.robustness > max_rob) max_rob = p.robustness;
                    any = true;
                }
            std::size_t robust = robust_cavities(pairs, theta).size();
            if (robust > 0) ++robust_days;
            ordered_json dj;
            dj["day"] = day;
            dj["h1_pairs"] = h1;
            dj["robust_cavities"] = robust;
            dj["max_robustness"] = any ? ordered_json(max_rob) : ordered_json(nullptr);
            pj.push_back(dj);
            char line[96];
            std::snprintf(line, sizeof line, "%3d %8d %6zu %14s\n", day, h1, robust,
                          any ? fmt2(max_rob).c_str() : "-");
            text += line;
        }
        ordered_json ps;
        ps["days"] = pj;
        ps["robust_cavity_days"] = robust_days;
        j["persistence"] = ps;
        text += "days with a robust cavity: " + std::to_string(robust_days) + "\n\n";
    }

    // --- contingency -------------------------------------------------------
    std::vector<DayLabel> labels = label_days(record, diagrams, theta);
    ContingencyTable table = contingency(labels);
    {
        ordered_json cj = table_json(table, theta);
        ordered_json cov;
        cov["labeled_days"] = labels.size();
        cov["eligible_days"] = last >= 2 ? last - 1 : 0;
        cov["first_day"] = last >= 2 ? 2 : 0;
        cov["last_day"] = last >= 2 ? last : 0;
        cj["coverage"] = cov;
        j["contingency"] = cj;

        ActivityRatios r = activity_ratios(table);
        Association assoc = association(table);
        text += "CONTINGENCY (theta " + fmt2(theta) + ")\n";
        text += "            cavity  no cavity\n";
        char line[96];
        std::snprintf(line, sizeof line, "with tx    %7lld %10lld\n", static_cast<long long>(table.n_tx_cav),
                      static_cast<long long>(table.n_tx_nocav));
        text += line;
        std::snprintf(line, sizeof line, "without tx %7lld %10lld\n", static_cast<long long>(table.n_notx_cav),
                      static_cast<long long>(table.n_notx_nocav));
        text += line;
        text += "ratio with tx " + opt2(r.with_tx) + ", ratio without tx " + opt2(r.without_tx) +
                ", odds ratio " + opt2(assoc.odds_ratio) + ", fisher p " + opt2(assoc.fisher_p) + "\n";
        text += "coverage: " + std::to_string(labels.size()) + " of " +
                std::to_string(last >= 2 ? last - 1 : 0) + " eligible days\n\n";
    }

    // --- theta sensitivity --------------------------------------------------
    {
        ordered_json sens = ordered_json::array();
        text += "THETA SENSITIVITY\n";
        text += "theta tx_cav tx_nocav notx_cav notx_nocav\n";
        for (double t : {theta / 2, theta, theta * 2}) {
            ContingencyTable tt = contingency(label_days(record, diagrams, t));
            sens.push_back(table_json(tt, t));
            char line[96];
            std::snprintf(line, sizeof line, "%5s %6lld %8lld %8lld %10lld\n", fmt2(t).c_str(),
                          static_cast<long long>(tt.n_tx_cav), static_cast<long long>(tt.n_tx_nocav),
                          static_cast<long long>(tt.n_notx_cav), static_cast<long long>(tt.n_notx_nocav));
            text += line;
        }
        j["theta_sensitivity"] = sens;
        text += "\n";
    }

    // --- settlement ---------------------------------------------------------
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
        j["settlement"] = sj;
        j["allocation_trims"] = record.reduced_allocations.size();

        text += "SETTLEMENT\n";
        text += "surplus " + std::to_string(s.surplus_total) + ", deficit " + std::to_string(s.deficit_total) +
                ", buyback price " + std::to_string(s.buy_price) + ", sale price " +
                std::to_string(s.sell_price) + "\n";
        text += "reserve " + std::to_string(s.reserve_before) + " -> " + std::to_string(s.reserve_after) +
                " (residue " + std::to_string(s.residue) + "), unpaid bills " + std::to_string(s.debts.size()) +
                ", trimmed allocations " + std::to_string(record.reduced_allocations.size()) + "\n";
    }

    Report out;
    out.json = j.dump(2) + "\n";
    out.text = text;
    out.curves_csv = curves;
    return out;
}

} // namespace emx
