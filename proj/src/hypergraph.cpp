#include "emx/hypergraph.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace emx {

std::optional<Hyperedge> daily_hyperedge(const ClearingResult& result) {
    if (result.volume == 0) return std::nullopt;
    std::set<std::string> members;
    int contracted = 0;
    for (const Fill& f : result.fills) {
        if (f.qty <= 0) continue;
        members.insert(f.account);
        ++contracted;
    }
    Hyperedge e;
    e.day = result.day;
    e.members.assign(members.begin(), members.end());
    e.contracted_order_count = contracted;
    return e;
}

Hypergraph build_hypergraph(const std::vector<ClearingResult>& results, TokenKind token) {
    Hypergraph h;
    h.token = token;
    std::set<std::string> nodes;
    std::set<int> days;
    for (const ClearingResult& r : results) {
        if (r.token != token)
            fail(Errc::MixedTokens, "result for day " + std::to_string(r.day) + " carries the wrong token");
        if (!days.insert(r.day).second)
            fail(Errc::InputMismatch, "duplicate clearing result for day " + std::to_string(r.day));
        if (auto edge = daily_hyperedge(r)) {
            nodes.insert(edge->members.begin(), edge->members.end());
            h.edges.push_back(std::move(*edge));
        }
    }
    std::sort(h.edges.begin(), h.edges.end(), [](const Hyperedge& a, const Hyperedge& b) { return a.day < b.day; });
    h.nodes.assign(nodes.begin(), nodes.end());
    return h;
}

int degree(const Hypergraph& h, const std::string& node) {
    if (!std::binary_search(h.nodes.begin(), h.nodes.end(), node))
        fail(Errc::UnknownNode, "node not in hypergraph: " + node);
    int d = 0;
    for (const Hyperedge& e : h.edges)
        if (std::binary_search(e.members.begin(), e.members.end(), node)) ++d;
    return d;
}

std::map<std::size_t, int> cardinality_histogram(const Hypergraph& h) {
    std::map<std::size_t, int> hist;
    for (const Hyperedge& e : h.edges) ++hist[e.members.size()];
    return hist;
}

std::vector<std::vector<std::uint8_t>> incidence_matrix(const Hypergraph& h) {
    std::vector<std::vector<std::uint8_t>> m(h.nodes.size(), std::vector<std::uint8_t>(h.edges.size(), 0));
    for (std::size_t j = 0; j < h.edges.size(); ++j) {
        const Hyperedge& e = h.edges[j];
        for (std::size_t i = 0; i < h.nodes.size(); ++i)
            if (std::binary_search(e.members.begin(), e.members.end(), h.nodes[i])) m[i][j] = 1;
    }
    return m;
}

std::string hypergraph_to_json(const Hypergraph& h) {
    nlohmann::ordered_json j;
    j["token"] = to_string(h.token);
    j["nodes"] = h.nodes;
    j["edges"] = nlohmann::ordered_json::array();
    for (const Hyperedge& e : h.edges) {
        nlohmann::ordered_json je;
        je["day"] = e.day;
        je["members"] = e.members;
        je["contracted_order_count"] = e.contracted_order_count;
        j["edges"].push_back(std::move(je));
    }
    return j.dump(2) + "\n";
}

} // namespace emx
