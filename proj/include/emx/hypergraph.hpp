#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emx/auction.hpp"

namespace emx {

// One hyperedge per trading day with executed volume: its members are the
// distinct accounts that filled, system included under its account id.
struct Hyperedge {
    int day = 0;
    std::vector<std::string> members;  // sorted, distinct
    int contracted_order_count = 0;    // orders with positive fill
};

struct Hypergraph {
    TokenKind token = TokenKind::UPX;
    std::vector<std::string> nodes;    // sorted union of edge members
    std::vector<Hyperedge> edges;      // ascending by day
};

// Empty when the day executed nothing.
std::optional<Hyperedge> daily_hyperedge(const ClearingResult& result);

// All results must carry the same token (MixedTokens) and distinct days.
Hypergraph build_hypergraph(const std::vector<ClearingResult>& results, TokenKind token);

// Number of edges containing the node; UnknownNode if absent.
int degree(const Hypergraph& h, const std::string& node);

// edge cardinality -> number of edges of that size
std::map<std::size_t, int> cardinality_histogram(const Hypergraph& h);

// 0/1 matrix, rows = nodes (sorted), columns = edges (day order)
std::vector<std::vector<std::uint8_t>> incidence_matrix(const Hypergraph& h);

std::string hypergraph_to_json(const Hypergraph& h);

} // namespace emx
