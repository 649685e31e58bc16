#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emx/config.hpp"
#include "emx/lifecycle.hpp"

namespace emx {

/* Daily consumption generator.
 *
 * Stochastic mode draws each student-day from an independent sub-stream of
 * the master seed, so runs reproduce bit-for-bit and adding a student never
 * shifts anyone else's draws. Fixture mode replays a days x students kWh
 * matrix, typically loaded from a meter CSV.
 */
struct ConsumptionModel {
    std::string mode = "stochastic";
    std::vector<double> mean_kwh;                 // per student
    double dispersion = 0.25;
    double weekday_factor = 1.0;
    double weekend_factor = 1.0;
    std::vector<std::vector<double>> fixture;     // [day-1][student]
    std::uint64_t seed = 0;
    int days = 0;
};

// day 1 is a Monday; days 6 and 7 of each week are the weekend
bool is_weekend(int day);

ConsumptionModel make_consumption_model(const Scenario& scenario, std::uint64_t seed);
std::vector<double> gen_usage(const ConsumptionModel& model, int day);

/* Order generator.
 *
 * Students target a holdings buffer of buffer_days of expected usage. Short
 * students bid the gap, long students ask it, prices scatter around the
 * last trade by +-aggressiveness. A student about to run dry lifts to the
 * system's shortage ask price. Quantities are capped against balance and
 * currency net of the day's own escrow, so everything generated passes
 * admission by construction.
 */
struct AgentPolicy {
    double buffer_days = 5.0;
    double aggressiveness = 0.2;
    double participation = 0.8;
    double spx_bid_share = 0.3;
    std::uint64_t seed = 0;
};

std::vector<Order> gen_orders(const AgentPolicy& policy, const MonthConfig& cfg, const Ledger& ledger,
                              const std::vector<std::string>& students,
                              const std::vector<double>& projected_daily_kwh, const PerToken& last_price,
                              int day);

// End-to-end seeded month on the scenario's consumption model and policy.
MonthRecord simulate_month(const Scenario& scenario, std::uint64_t seed);

// --- meter CSV (header: date,user_id,kwh; ISO dates) ---

struct MeterRow {
    std::string date;
    std::string user;
    double kwh = 0;
    int line = 0;
};

struct MeterData {
    std::vector<MeterRow> rows;                          // accepted, input order
    std::vector<std::pair<int, std::string>> rejected;   // (line, reason)
};

// Schema violations (bad header, malformed row) throw Error(ParseError) with
// the line number; domain violations (duplicate date+user, negative kwh) are
// collected as rejected rows.
MeterData parse_meter_csv(std::istream& in);
MeterData load_meter_csv(const std::string& path);

// Accepted rows -> fixture matrix. Distinct dates (sorted) become days
// 1..days, distinct users (sorted) become student indices; the matrix must
// be complete and match the expected shape.
std::vector<std::vector<double>> fixture_from_meter(const MeterData& data, int days, int students);

} // namespace emx
