#pragma once

#include <cstdint>
#include <string>

#include "emx/lifecycle.hpp"

namespace emx {

constexpr const char* kToolName = "emx";
constexpr const char* kToolVersion = "1.0.0";

// Stable identity of a run: hash over (canonical config, seed, tool version).
std::string run_id(const Scenario& scenario, std::uint64_t seed);

/* Record directory layout:
 *   manifest.json   run identity, counts, file layout
 *   config.toml     canonical scenario dump
 *   ledger.jsonl    full transaction log (replayable)
 *   summary.json    students, trimmed allocations, settlement
 *   days/day_NN.json per-day books, results, usage, closing prices
 * Writing is idempotent; identical records produce identical bytes.
 */
void save_month_record(const MonthRecord& record, const std::string& dir);
MonthRecord load_month_record(const std::string& dir);

std::string read_text_file(const std::string& path);                      // IoError
void write_text_file(const std::string& path, const std::string& content); // IoError

/* Order log, one JSON object per line. Required: account, token, side,
 * price, qty. Optional: day (default 1), arrival (default = line number),
 * id (default derived from day and arrival). Schema problems raise
 * ParseError naming the line.
 */
std::vector<Order> parse_orders_jsonl(const std::string& text);
std::string orders_to_jsonl(const std::vector<Order>& orders); // canonical field order

} // namespace emx
