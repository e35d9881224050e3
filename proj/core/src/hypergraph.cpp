#include "ihgnn/hypergraph.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>

#include "ihgnn/errors.hpp"

namespace ihgnn {

std::vector<NodeKind> KindSet::kinds() const {
  std::vector<NodeKind> out;
  for (auto k : {NodeKind::User, NodeKind::Query, NodeKind::Product}) {
    if (contains(k)) out.push_back(k);
  }
  return out;
}

std::string to_string(KindSet kinds) {
  std::string out;
  if (kinds.contains(NodeKind::User)) out += 'u';
  if (kinds.contains(NodeKind::Query)) out += 'q';
  if (kinds.contains(NodeKind::Product)) out += 'p';
  return out.empty() ? "{}" : out;
}

Hypergraph::NodeIndex Hypergraph::index_of(NodeId node) const {
  if (node.index >= counts_.of(node.kind)) {
    throw LookupError("unknown node " + to_string(node));
  }
  switch (node.kind) {
    case NodeKind::User: return node.index;
    case NodeKind::Query: return counts_.users + node.index;
    case NodeKind::Product: return counts_.users + counts_.queries + node.index;
  }
  return 0;
}

NodeId Hypergraph::node_at(NodeIndex index) const {
  if (index < counts_.users) return user_node(index);
  index -= counts_.users;
  if (index < counts_.queries) return query_node(index);
  index -= counts_.queries;
  if (index < counts_.products) return product_node(index);
  throw LookupError("node index out of range");
}

std::vector<NodeId> Hypergraph::member_ids(EdgeIndex edge) const {
  std::vector<NodeId> out;
  for (auto v : members(edge)) out.push_back(node_at(v));
  return out;
}

std::size_t Hypergraph::edge_degree(EdgeIndex edge) const {
  if (edge >= edge_count()) throw LookupError("unknown hyperedge " + std::to_string(edge));
  return arity_;
}

bool Hypergraph::incident(NodeId node, EdgeIndex edge) const {
  if (edge >= edge_count()) throw LookupError("unknown hyperedge " + std::to_string(edge));
  const auto v = index_of(node);
  auto m = members(edge);
  return std::find(m.begin(), m.end(), v) != m.end();
}

std::vector<NodeId> Hypergraph::neighbors(NodeId node) const {
  const auto v = index_of(node);
  std::vector<NodeIndex> found;
  for (auto e : incident_edges(v)) {
    for (auto a : members(e)) {
      if (a != v) found.push_back(a);
    }
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  std::vector<NodeId> out;
  out.reserve(found.size());
  for (auto a : found) out.push_back(node_at(a));
  return out;
}

Hypergraph build_hypergraph(const InteractionLog& log, KindSet kinds) {
  if (kinds.size() < 2) {
    throw ConfigError("hyperedges need at least two node kinds, got " + to_string(kinds));
  }
  Hypergraph g;
  g.counts_ = log.counts();
  g.kinds_ = kinds;
  g.arity_ = kinds.size();

  const auto& c = g.counts_;
  constexpr auto kAbsent = std::numeric_limits<std::uint32_t>::max();
  std::set<std::array<std::uint32_t, 3>> seen;
  std::size_t position = 0;
  for (const auto& r : log.records()) {
    ++position;
    if (r.user >= c.users || r.query >= c.queries || r.product >= c.products) {
      throw DataError("record " + std::to_string(position) + " is out of range", position);
    }
    std::array<std::uint32_t, 3> key{
        kinds.contains(NodeKind::User) ? r.user : kAbsent,
        kinds.contains(NodeKind::Query) ? r.query : kAbsent,
        kinds.contains(NodeKind::Product) ? r.product : kAbsent,
    };
    if (!seen.insert(key).second) continue;
    if (key[0] != kAbsent) g.edge_members_.push_back(key[0]);
    if (key[1] != kAbsent) g.edge_members_.push_back(c.users + key[1]);
    if (key[2] != kAbsent) g.edge_members_.push_back(c.users + c.queries + key[2]);
  }

  // CSR incidence, edges listed in insertion order per node.
  const auto n = g.node_count();
  g.incidence_offsets_.assign(n + 1, 0);
  for (auto v : g.edge_members_) ++g.incidence_offsets_[v + 1];
  for (std::size_t v = 0; v < n; ++v) g.incidence_offsets_[v + 1] += g.incidence_offsets_[v];
  g.incidence_.resize(g.edge_members_.size());
  std::vector<std::size_t> cursor(g.incidence_offsets_.begin(), g.incidence_offsets_.end() - 1);
  const auto edges = g.edge_count();
  for (std::size_t e = 0; e < edges; ++e) {
    for (auto v : g.members(static_cast<Hypergraph::EdgeIndex>(e))) {
      g.incidence_[cursor[v]++] = static_cast<Hypergraph::EdgeIndex>(e);
    }
  }
  return g;
}

}  // namespace ihgnn
