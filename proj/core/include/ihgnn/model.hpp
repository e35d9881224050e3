#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ihgnn/data.hpp"
#include "ihgnn/hypergraph.hpp"
#include "ihgnn/matrix.hpp"
#include "ihgnn/types.hpp"

namespace ihgnn {

enum class NodeSubset { UQP, UP, QP };

KindSet kinds_of(NodeSubset subset);
std::string_view to_string(NodeSubset subset);
// Accepts "uqp", "up", "qp"; throws ConfigError otherwise.
NodeSubset parse_node_subset(std::string_view text);

struct ModelConfig {
  std::size_t dim{32};
  std::size_t layers{2};
  int order{3};
  bool weighted{true};
  NodeSubset subset{NodeSubset::UQP};
  double lambda{0.5};

  // Throws ConfigError when the combination is not realizable.
  void validate() const;

  std::size_t member_count() const { return subset == NodeSubset::UQP ? 3 : 2; }
  // Number of d-wide blocks in the interaction feature vector.
  std::size_t feature_blocks() const;
  // Row count of each per-layer weight matrix (0 when unweighted).
  std::size_t weight_rows() const { return weighted ? feature_blocks() * dim : 0; }

  bool operator==(const ModelConfig&) const = default;
};

std::string describe(const ModelConfig& config);

// A named model configuration of the ablation grid.
struct Variant {
  std::string name;
  ModelConfig config;
};

// up, qp, unweighted-O1, O1, O2, O3 built on `base` (dim, layers, lambda).
std::vector<Variant> ablation_variants(const ModelConfig& base);

struct ParameterSet {
  Matrix users;     // |U| x d
  Matrix products;  // |P| x d
  Matrix words;     // |vocab| x d
  std::vector<Matrix> layer_weights;  // L matrices, (blocks*d) x d; empty if unweighted

  // Zero-filled tensors with the shapes `config` requires.
  static ParameterSet zeros(const ModelConfig& config, const EntityCounts& counts,
                            std::uint32_t word_count);

  // Throws ConfigError describing the first mismatch.
  void check_shapes(const ModelConfig& config, const EntityCounts& counts,
                    std::uint32_t word_count) const;

  bool all_finite() const;

  // Visit every tensor with a stable name, in a fixed order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(std::string("users"), users);
    fn(std::string("products"), products);
    fn(std::string("words"), words);
    for (std::size_t l = 0; l < layer_weights.size(); ++l) {
      fn("layer" + std::to_string(l + 1), layer_weights[l]);
    }
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(std::string("users"), users);
    fn(std::string("products"), products);
    fn(std::string("words"), words);
    for (std::size_t l = 0; l < layer_weights.size(); ++l) {
      fn("layer" + std::to_string(l + 1), layer_weights[l]);
    }
  }

  bool operator==(const ParameterSet&) const = default;
};

// Per-node embeddings for layers 0..L, stored already concatenated: row v is
// z_v^(0) || z_v^(1) || ... || z_v^(L).
class EmbeddingState {
 public:
  EmbeddingState(const EntityCounts& counts, std::size_t dim, std::size_t layers);

  const EntityCounts& counts() const noexcept { return counts_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t layers() const noexcept { return layers_; }
  std::size_t node_count() const noexcept { return values_.rows(); }

  // Throws LookupError for entities outside the tables.
  std::size_t row_of(NodeId node) const;

  std::span<const double> layer(std::size_t row, std::size_t l) const {
    return values_.row(row).subspan(l * dim_, dim_);
  }
  std::span<double> layer(std::size_t row, std::size_t l) {
    return values_.row(row).subspan(l * dim_, dim_);
  }
  std::span<const double> final(std::size_t row) const { return values_.row(row); }
  std::span<const double> final(NodeId node) const { return final(row_of(node)); }

  const Matrix& values() const noexcept { return values_; }

 private:
  EntityCounts counts_;
  std::size_t dim_;
  std::size_t layers_;
  Matrix values_;
};

// Mean of the word embeddings of a query. Throws DataError on an empty list.
void query_embedding(const Matrix& word_table, std::span<const std::uint32_t> words,
                     std::span<double> out);
std::vector<double> query_embedding(const Matrix& word_table,
                                    std::span<const std::uint32_t> words);

// Interaction feature blocks of the hyperedge members (given in canonical
// order): order 1 is the concatenation, order 2 appends the pairwise
// elementwise products, order 3 appends the elementwise product of all three.
void interaction_features(std::span<const std::span<const double>> members, int order,
                          std::span<double> out);
std::vector<double> interaction_features(std::span<const std::span<const double>> members,
                                         int order);
std::size_t interaction_block_count(std::size_t members, int order);

// Hyperedge message m_e. `weights` is ignored for the unweighted variant,
// which averages the members. `scratch` must hold feature_blocks()*dim values.
void node_aggregate(std::span<const std::span<const double>> members,
                    const ModelConfig& config, const Matrix* weights,
                    std::span<double> scratch, std::span<double> out);
std::vector<double> node_aggregate(std::span<const std::span<const double>> members,
                                   const ModelConfig& config, const Matrix* weights);

// Mean of incident messages; zero for an isolated node.
void hyperedge_aggregate(std::span<const std::span<const double>> messages,
                         std::span<double> out);
std::vector<double> hyperedge_aggregate(std::span<const std::span<const double>> messages,
                                        std::size_t dim);

// Width of the per-edge feature vector: the interaction features when
// weighted, the member mean (d values) otherwise.
std::size_t edge_feature_width(const ModelConfig& config);
void edge_features(std::span<const std::span<const double>> members, const ModelConfig& config,
                   std::span<double> out);
// Row v holds the mean edge feature over E_v at the given input layer (zero
// for isolated nodes).
void mean_edge_features(const Hypergraph& graph, const EmbeddingState& state, std::size_t layer,
                        const ModelConfig& config, Matrix& out);

// Full propagation over the hypergraph. Throws ConfigError on shape mismatch
// and NumericalError naming the node and layer of any non-finite input.
EmbeddingState forward(const Hypergraph& graph, const QueryVocabulary& vocab,
                       const ParameterSet& params, const ModelConfig& config);

// (lambda z_u + (1 - lambda) z_q)^T z_p on the concatenated embeddings.
double score(const EmbeddingState& state, const Triple& t, double lambda);
double predict(const EmbeddingState& state, const Triple& t, double lambda);

double sigmoid(double x);

}  // namespace ihgnn
