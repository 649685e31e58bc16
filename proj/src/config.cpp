#include "emx/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace emx {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

ConfigValue parse_value(const std::string& raw, int lineno) {
    if (raw.empty()) fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": empty value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": unterminated string");
        return raw.substr(1, raw.size() - 2);
    }
    if (raw == "true") return true;
    if (raw == "false") return false;

    // integer first, then float
    std::int64_t i = 0;
    auto [p1, ec1] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
    if (ec1 == std::errc() && p1 == raw.data() + raw.size()) return i;

    try {
        std::size_t pos = 0;
        double d = std::stod(raw, &pos);
        if (pos == raw.size()) return d;
    } catch (...) {
    }
    fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": cannot parse value '" + raw + "'");
}

} // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comment, respecting quoted strings
        bool quoted = false;
        std::string body;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            if (c == '#' && !quoted) break;
            body += c;
        }
        body = trim(body);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty()) fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": empty key");
        if (map.count(key)) fail(Errc::ParseError, "config line " + std::to_string(lineno) + ": duplicate key " + key);
        map[key] = parse_value(value, lineno);
    }
    return map;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::int64_t MonthConfig::base_price(TokenKind k) const {
    return k == TokenKind::UPX ? base_price_upx : base_price_spx;
}

std::int64_t MonthConfig::prev_year_usage(TokenKind k) const {
    return k == TokenKind::UPX ? prev_year_usage_upx_kwh : prev_year_usage_spx_kwh;
}

std::int64_t MonthConfig::anchor_price() const {
    if (settlement_anchor > 0) return settlement_anchor;
    const double derived = settlement_discount_factor * static_cast<double>(base_price_upx);
    return std::max<std::int64_t>(1, std::llround(derived));
}

void MonthConfig::validate() const {
    auto bad = [](const std::string& what) { fail(Errc::ParseError, "config: " + what); };
    if (days_in_month < 1 || days_in_month > 366) bad("days_in_month out of range");
    if (num_students < 1) bad("num_students must be positive");
    if (initial_currency < 0) bad("initial_currency must be non-negative");
    if (prev_year_usage_upx_kwh < 0 || prev_year_usage_spx_kwh < 0) bad("prev_year_usage must be non-negative");
    if (base_price_upx <= 0 || base_price_spx <= 0) bad("base prices must be positive");
    if (base_price_spx <= base_price_upx) bad("base_price_spx must exceed base_price_upx");
    if (shortage_premium_factor <= 0) bad("shortage_premium_factor must be positive");
    if (settlement_discount_factor <= 0) bad("settlement_discount_factor must be positive");
    if (settlement_anchor < 0) bad("settlement_anchor must be non-negative");
    if (pv_share < 0 || pv_share > 1) bad("pv_share must lie in [0, 1]");
    if (theta < 0) bad("theta must be non-negative");
}

void Scenario::validate() const {
    month.validate();
    auto bad = [](const std::string& what) { fail(Errc::ParseError, "config: " + what); };
    if (active_students < 0) bad("active_students must be non-negative");
    if (consumption_mode != "stochastic" && consumption_mode != "fixture")
        bad("consumption_mode must be 'stochastic' or 'fixture'");
    if (consumption_mode == "fixture" && fixture_csv.empty()) bad("fixture mode needs fixture_csv");
    if (usage_mean_min < 0 || usage_mean_max < usage_mean_min) bad("usage mean bounds are inconsistent");
    if (usage_dispersion < 0) bad("usage_dispersion must be non-negative");
    if (weekday_factor <= 0 || weekend_factor <= 0) bad("day factors must be positive");
    if (buffer_days < 0) bad("buffer_days must be non-negative");
    if (aggressiveness < 0) bad("aggressiveness must be non-negative");
    if (participation < 0 || participation > 1) bad("participation must lie in [0, 1]");
    if (spx_bid_share < 0 || spx_bid_share > 1) bad("spx_bid_share must lie in [0, 1]");
}

namespace {

template <typename T>
void take(ConfigMap& map, const std::string& key, T& out) {
    auto it = map.find(key);
    if (it == map.end()) return;
    if constexpr (std::is_same_v<T, double>) {
        if (auto* d = std::get_if<double>(&it->second)) out = *d;
        else if (auto* i = std::get_if<std::int64_t>(&it->second)) out = static_cast<double>(*i);
        else fail(Errc::ParseError, "config: " + key + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto* s = std::get_if<std::string>(&it->second)) out = *s;
        else fail(Errc::ParseError, "config: " + key + " must be a string");
    } else {
        if (auto* i = std::get_if<std::int64_t>(&it->second)) out = static_cast<T>(*i);
        else fail(Errc::ParseError, "config: " + key + " must be an integer");
    }
    map.erase(it);
}

} // namespace

Scenario scenario_from_map(const ConfigMap& map_in) {
    ConfigMap map = map_in;
    Scenario s;
    take(map, "days_in_month", s.month.days_in_month);
    take(map, "num_students", s.month.num_students);
    take(map, "initial_currency", s.month.initial_currency);
    take(map, "prev_year_usage_upx_kwh", s.month.prev_year_usage_upx_kwh);
    take(map, "prev_year_usage_spx_kwh", s.month.prev_year_usage_spx_kwh);
    take(map, "base_price_upx", s.month.base_price_upx);
    take(map, "base_price_spx", s.month.base_price_spx);
    take(map, "shortage_premium_factor", s.month.shortage_premium_factor);
    take(map, "settlement_discount_factor", s.month.settlement_discount_factor);
    take(map, "settlement_anchor", s.month.settlement_anchor);
    take(map, "pv_share", s.month.pv_share);
    take(map, "theta", s.month.theta);
    take(map, "active_students", s.active_students);
    take(map, "consumption_mode", s.consumption_mode);
    take(map, "fixture_csv", s.fixture_csv);
    take(map, "usage_mean_min", s.usage_mean_min);
    take(map, "usage_mean_max", s.usage_mean_max);
    take(map, "usage_dispersion", s.usage_dispersion);
    take(map, "weekday_factor", s.weekday_factor);
    take(map, "weekend_factor", s.weekend_factor);
    take(map, "buffer_days", s.buffer_days);
    take(map, "aggressiveness", s.aggressiveness);
    take(map, "participation", s.participation);
    take(map, "spx_bid_share", s.spx_bid_share);
    if (!map.empty()) fail(Errc::ParseError, "config: unknown key '" + map.begin()->first + "'");
    s.validate();
    return s;
}

Scenario load_scenario(const std::string& path) { return scenario_from_map(parse_config_file(path)); }

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string dump_scenario(const Scenario& s) {
    std::ostringstream out;
    out << "days_in_month = " << s.month.days_in_month << "\n"
        << "num_students = " << s.month.num_students << "\n"
        << "initial_currency = " << s.month.initial_currency << "\n"
        << "prev_year_usage_upx_kwh = " << s.month.prev_year_usage_upx_kwh << "\n"
        << "prev_year_usage_spx_kwh = " << s.month.prev_year_usage_spx_kwh << "\n"
        << "base_price_upx = " << s.month.base_price_upx << "\n"
        << "base_price_spx = " << s.month.base_price_spx << "\n"
        << "shortage_premium_factor = " << num(s.month.shortage_premium_factor) << "\n"
        << "settlement_discount_factor = " << num(s.month.settlement_discount_factor) << "\n"
        << "settlement_anchor = " << s.month.settlement_anchor << "\n"
        << "pv_share = " << num(s.month.pv_share) << "\n"
        << "theta = " << num(s.month.theta) << "\n"
        << "active_students = " << s.active_students << "\n"
        << "consumption_mode = \"" << s.consumption_mode << "\"\n"
        << "fixture_csv = \"" << s.fixture_csv << "\"\n"
        << "usage_mean_min = " << num(s.usage_mean_min) << "\n"
        << "usage_mean_max = " << num(s.usage_mean_max) << "\n"
        << "usage_dispersion = " << num(s.usage_dispersion) << "\n"
        << "weekday_factor = " << num(s.weekday_factor) << "\n"
        << "weekend_factor = " << num(s.weekend_factor) << "\n"
        << "buffer_days = " << num(s.buffer_days) << "\n"
        << "aggressiveness = " << num(s.aggressiveness) << "\n"
        << "participation = " << num(s.participation) << "\n"
        << "spx_bid_share = " << num(s.spx_bid_share) << "\n";
    return out.str();
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace emx
