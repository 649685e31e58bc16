#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emx/hypergraph.hpp"
#include "emx/tda.hpp"

namespace emx {

struct DayLabel {
    int day = 0;
    bool has_transactions = false;  // either token cleared with volume > 0
    bool has_robust_cavity = false; // robust_cavities nonempty at theta
};

// One label per day 2..end; every such day must have a diagram.
std::vector<DayLabel> label_days(const MonthRecord& record, const DiagramsByDay& diagrams, double theta);

struct ContingencyTable {
    std::int64_t n_tx_nocav = 0;
    std::int64_t n_notx_nocav = 0;
    std::int64_t n_tx_cav = 0;
    std::int64_t n_notx_cav = 0;

    std::int64_t total() const { return n_tx_nocav + n_notx_nocav + n_tx_cav + n_notx_cav; }
    bool operator==(const ContingencyTable&) const = default;
};

ContingencyTable contingency(const std::vector<DayLabel>& labels);

// cavity-days per cavity-free day, split by whether the market traded.
// Empty optionals mark zero denominators.
struct ActivityRatios {
    std::optional<double> with_tx;    // n_tx_cav / n_tx_nocav
    std::optional<double> without_tx; // n_notx_cav / n_notx_nocav
};

ActivityRatios activity_ratios(const ContingencyTable& t);

struct Association {
    std::optional<double> odds_ratio; // (n_tx_cav * n_notx_nocav) / (n_tx_nocav * n_notx_cav)
    std::optional<double> fisher_p;   // two-sided exact test; empty for an empty table
};

Association association(const ContingencyTable& t);

struct Report {
    std::string json;       // report.json
    std::string text;       // report.txt
    std::string curves_csv; // day,token,side,price,cumulative_qty
};

/* Aggregates one run: daily order/volume counts, demand/supply curves,
 * hypergraph stats, persistence summary, and the contingency table with a
 * theta-sensitivity sweep (theta/2, theta, 2*theta). Inputs that cannot have
 * come from `record` raise InputMismatch.
 */
Report build_report(const MonthRecord& record, const std::map<TokenKind, Hypergraph>& graphs,
                    const DiagramsByDay& diagrams, double theta);

} // namespace emx
