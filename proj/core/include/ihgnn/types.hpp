#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace ihgnn {

// Engine used for every seeded random draw.
using Rng = std::mt19937_64;

enum class NodeKind : std::uint8_t { User = 0, Query = 1, Product = 2 };

std::string_view to_string(NodeKind kind);

struct NodeId {
  NodeKind kind{NodeKind::User};
  std::uint32_t index{0};

  auto operator<=>(const NodeId&) const = default;
};

inline NodeId user_node(std::uint32_t i) { return {NodeKind::User, i}; }
inline NodeId query_node(std::uint32_t i) { return {NodeKind::Query, i}; }
inline NodeId product_node(std::uint32_t i) { return {NodeKind::Product, i}; }

std::string to_string(NodeId node);

// A (user, query, product) interaction without its timestamp.
struct Triple {
  std::uint32_t user{0};
  std::uint32_t query{0};
  std::uint32_t product{0};

  auto operator<=>(const Triple&) const = default;
};

struct EntityCounts {
  std::uint32_t users{0};
  std::uint32_t queries{0};
  std::uint32_t products{0};

  std::uint32_t of(NodeKind kind) const {
    switch (kind) {
      case NodeKind::User: return users;
      case NodeKind::Query: return queries;
      case NodeKind::Product: return products;
    }
    return 0;
  }
  std::size_t total() const {
    return std::size_t{users} + queries + products;
  }

  bool operator==(const EntityCounts&) const = default;
};

}  // namespace ihgnn
