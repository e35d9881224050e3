#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ihgnn/data.hpp"
#include "ihgnn/types.hpp"

namespace ihgnn {

// Subset of node kinds that take part in hyperedges.
class KindSet {
 public:
  constexpr KindSet() = default;
  constexpr KindSet(bool user, bool query, bool product)
      : user_(user), query_(query), product_(product) {}

  static constexpr KindSet all() { return {true, true, true}; }

  constexpr bool contains(NodeKind kind) const {
    switch (kind) {
      case NodeKind::User: return user_;
      case NodeKind::Query: return query_;
      case NodeKind::Product: return product_;
    }
    return false;
  }
  constexpr std::size_t size() const {
    return std::size_t{user_} + query_ + product_;
  }
  // Member kinds in canonical (user, query, product) order.
  std::vector<NodeKind> kinds() const;

  constexpr bool operator==(const KindSet&) const = default;

 private:
  bool user_{false};
  bool query_{false};
  bool product_{false};
};

std::string to_string(KindSet kinds);

// Immutable hypergraph over typed user/query/product nodes. Nodes are numbered
// globally as [users | queries | products]; hyperedges are numbered by first
// occurrence of their (projected) triple in the source log.
class Hypergraph {
 public:
  using NodeIndex = std::uint32_t;
  using EdgeIndex = std::uint32_t;

  const EntityCounts& counts() const noexcept { return counts_; }
  KindSet kinds() const noexcept { return kinds_; }
  std::size_t node_count() const noexcept { return counts_.total(); }
  std::size_t edge_count() const noexcept {
    return arity_ == 0 ? 0 : edge_members_.size() / arity_;
  }
  // Members per hyperedge (2 or 3).
  std::size_t arity() const noexcept { return arity_; }

  // Global index of `node`; throws LookupError for unknown nodes.
  NodeIndex index_of(NodeId node) const;
  NodeId node_at(NodeIndex index) const;

  // Members of `edge` as global node indices in canonical order.
  std::span<const NodeIndex> members(EdgeIndex edge) const {
    return {edge_members_.data() + std::size_t{edge} * arity_, arity_};
  }
  std::vector<NodeId> member_ids(EdgeIndex edge) const;

  // E_v in insertion order.
  std::span<const EdgeIndex> incident_edges(NodeIndex node) const {
    return {incidence_.data() + incidence_offsets_[node],
            incidence_offsets_[node + 1] - incidence_offsets_[node]};
  }
  std::span<const EdgeIndex> incident_edges(NodeId node) const {
    return incident_edges(index_of(node));
  }

  std::size_t degree(NodeIndex node) const {
    return incidence_offsets_[node + 1] - incidence_offsets_[node];
  }
  std::size_t degree(NodeId node) const { return degree(index_of(node)); }
  std::size_t edge_degree(EdgeIndex edge) const;

  // h(v, e).
  bool incident(NodeId node, EdgeIndex edge) const;

  // N_v: nodes sharing at least one hyperedge with `node`, excluding itself,
  // sorted by global index.
  std::vector<NodeId> neighbors(NodeId node) const;

 private:
  friend Hypergraph build_hypergraph(const InteractionLog& log, KindSet kinds);

  EntityCounts counts_;
  KindSet kinds_;
  std::size_t arity_{0};
  std::vector<NodeIndex> edge_members_;
  std::vector<std::size_t> incidence_offsets_;
  std::vector<EdgeIndex> incidence_;
};

// One hyperedge per distinct triple projected onto `kinds`. Entities without
// interactions stay in the node set with degree 0. Throws ConfigError if fewer
// than two kinds are selected and DataError for out-of-range records.
Hypergraph build_hypergraph(const InteractionLog& log, KindSet kinds = KindSet::all());

}  // namespace ihgnn
