#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

#include "emx/errors.hpp"
#include "emx/ledger.hpp"

namespace emx {

// Flat TOML-style config: `key = value` lines, `#` comments, quoted strings,
// integers, floats, booleans. No sections, no nesting.
using ConfigValue = std::variant<std::int64_t, double, bool, std::string>;
using ConfigMap = std::map<std::string, ConfigValue>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

// Month-level market parameters consumed by the lifecycle.
struct MonthConfig {
    int days_in_month = 31;
    int num_students = 80; // allocation divisor: residents sharing last year's usage
    std::int64_t initial_currency = 20000;
    std::int64_t prev_year_usage_upx_kwh = 8000;
    std::int64_t prev_year_usage_spx_kwh = 800;
    std::int64_t base_price_upx = 10;
    std::int64_t base_price_spx = 14;
    double shortage_premium_factor = 1.5;
    double settlement_discount_factor = 0.8;
    std::int64_t settlement_anchor = 0; // 0 = derive from discount * base_price_upx
    double pv_share = 0.10;             // SPX share of consumption, for forecasts
    double theta = 0.25;                // default cavity robustness threshold

    std::int64_t base_price(TokenKind k) const;
    std::int64_t anchor_price() const;
    std::int64_t prev_year_usage(TokenKind k) const;
    void validate() const; // throws Error(ParseError) on out-of-range values
};

// Simulation scenario: lifecycle config plus consumption and agent knobs.
struct Scenario {
    MonthConfig month;
    int active_students = 17; // accounts actually created and trading
    std::string consumption_mode = "stochastic"; // or "fixture"
    std::string fixture_csv;                     // meter CSV for fixture mode
    double usage_mean_min = 1.5;  // kWh/day, per-student means drawn uniformly
    double usage_mean_max = 6.0;
    double usage_dispersion = 0.25; // stddev as a fraction of the day's mean
    double weekday_factor = 1.0;
    double weekend_factor = 1.15;
    double buffer_days = 5.0;     // target holdings in days of expected usage
    double aggressiveness = 0.2;  // price spread around the last trade
    double participation = 0.8;   // per-student-day probability of ordering
    double spx_bid_share = 0.3;   // probability a bid targets SPX

    void validate() const;
};

Scenario load_scenario(const std::string& path);
Scenario scenario_from_map(const ConfigMap& map);

// Canonical re-serialization used when a record directory stores its config.
std::string dump_scenario(const Scenario& s);

// FNV-1a 64 over raw bytes, for manifest config hashes.
std::string fnv1a_hex(const std::string& bytes);

} // namespace emx
