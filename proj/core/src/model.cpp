#include "ihgnn/model.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "ihgnn/errors.hpp"

namespace ihgnn {

KindSet kinds_of(NodeSubset subset) {
  switch (subset) {
    case NodeSubset::UQP: return KindSet::all();
    case NodeSubset::UP: return {true, false, true};
    case NodeSubset::QP: return {false, true, true};
  }
  return KindSet::all();
}

std::string_view to_string(NodeSubset subset) {
  switch (subset) {
    case NodeSubset::UQP: return "uqp";
    case NodeSubset::UP: return "up";
    case NodeSubset::QP: return "qp";
  }
  return "?";
}

NodeSubset parse_node_subset(std::string_view text) {
  if (text == "uqp") return NodeSubset::UQP;
  if (text == "up") return NodeSubset::UP;
  if (text == "qp") return NodeSubset::QP;
  throw ConfigError("unknown node subset '" + std::string(text) + "' (expected uqp, up or qp)");
}

std::size_t interaction_block_count(std::size_t members, int order) {
  if (members == 3) {
    switch (order) {
      case 1: return 3;
      case 2: return 6;
      case 3: return 7;
    }
  } else if (members == 2) {
    switch (order) {
      case 1: return 2;
      case 2: return 3;
    }
  }
  throw ConfigError("no interaction features of order " + std::to_string(order) + " for " +
                    std::to_string(members) + " members");
}

void ModelConfig::validate() const {
  if (dim == 0) throw ConfigError("embedding size must be positive");
  if (order < 1 || order > 3) throw ConfigError("interaction order must be 1, 2 or 3");
  if (order > 1 && !weighted) {
    throw ConfigError("interaction order above 1 requires weighted propagation");
  }
  if (subset != NodeSubset::UQP && order > 2) {
    throw ConfigError("node subset " + std::string(to_string(subset)) +
                      " supports interaction order at most 2");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
}

std::size_t ModelConfig::feature_blocks() const {
  return interaction_block_count(member_count(), weighted ? order : 1);
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << "d=" << c.dim << " L=" << c.layers << " order=" << c.order
     << (c.weighted ? " weighted" : " unweighted") << " subset=" << to_string(c.subset)
     << " lambda=" << c.lambda;
  return os.str();
}

std::vector<Variant> ablation_variants(const ModelConfig& base) {
  auto make = [&](NodeSubset subset, bool weighted, int order) {
    ModelConfig c = base;
    c.subset = subset;
    c.weighted = weighted;
    c.order = order;
    return c;
  };
  return {
      {"IHGNN-up", make(NodeSubset::UP, false, 1)},
      {"IHGNN-qp", make(NodeSubset::QP, false, 1)},
      {"HyperGCN", make(NodeSubset::UQP, false, 1)},
      {"IHGNN-O1", make(NodeSubset::UQP, true, 1)},
      {"IHGNN-O2", make(NodeSubset::UQP, true, 2)},
      {"IHGNN-O3", make(NodeSubset::UQP, true, 3)},
  };
}

ParameterSet ParameterSet::zeros(const ModelConfig& config, const EntityCounts& counts,
                                 std::uint32_t word_count) {
  config.validate();
  ParameterSet p;
  p.users = Matrix(counts.users, config.dim);
  p.products = Matrix(counts.products, config.dim);
  p.words = Matrix(word_count, config.dim);
  if (config.weighted) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      p.layer_weights.emplace_back(config.weight_rows(), config.dim);
    }
  }
  return p;
}

void ParameterSet::check_shapes(const ModelConfig& config, const EntityCounts& counts,
                                std::uint32_t word_count) const {
  config.validate();
  auto expect = [](const std::string& name, const Matrix& m, std::size_t rows, std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) {
      throw ConfigError(name + " has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
  };
  expect("users", users, counts.users, config.dim);
  expect("products", products, counts.products, config.dim);
  expect("words", words, word_count, config.dim);
  const std::size_t expected_layers = config.weighted ? config.layers : 0;
  if (layer_weights.size() != expected_layers) {
    throw ConfigError("expected " + std::to_string(expected_layers) + " layer weight matrices, got " +
                      std::to_string(layer_weights.size()));
  }
  for (std::size_t l = 0; l < layer_weights.size(); ++l) {
    expect("layer" + std::to_string(l + 1), layer_weights[l], config.weight_rows(), config.dim);
  }
}

bool ParameterSet::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.all_finite(); });
  return ok;
}

EmbeddingState::EmbeddingState(const EntityCounts& counts, std::size_t dim, std::size_t layers)
    : counts_(counts), dim_(dim), layers_(layers), values_(counts.total(), (layers + 1) * dim) {}

std::size_t EmbeddingState::row_of(NodeId node) const {
  if (node.index >= counts_.of(node.kind)) {
    throw LookupError("unknown entity " + to_string(node));
  }
  switch (node.kind) {
    case NodeKind::User: return node.index;
    case NodeKind::Query: return std::size_t{counts_.users} + node.index;
    case NodeKind::Product: return std::size_t{counts_.users} + counts_.queries + node.index;
  }
  return 0;
}

void query_embedding(const Matrix& word_table, std::span<const std::uint32_t> words,
                     std::span<double> out) {
  if (words.empty()) throw DataError("query has no words");
  std::fill(out.begin(), out.end(), 0.0);
  for (auto w : words) {
    if (w >= word_table.rows()) throw LookupError("unknown word " + std::to_string(w));
    auto row = word_table.row(w);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  }
  const double n = static_cast<double>(words.size());
  for (auto& x : out) x /= n;
}

std::vector<double> query_embedding(const Matrix& word_table,
                                    std::span<const std::uint32_t> words) {
  std::vector<double> out(word_table.cols());
  query_embedding(word_table, words, out);
  return out;
}

void interaction_features(std::span<const std::span<const double>> members, int order,
                          std::span<double> out) {
  const auto blocks = interaction_block_count(members.size(), order);
  const auto d = members.front().size();
  if (out.size() != blocks * d) throw ConfigError("interaction feature buffer has wrong size");
  double* o = out.data();
  for (auto m : members) {
    std::copy(m.begin(), m.end(), o);
    o += d;
  }
  if (order < 2) return;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      for (std::size_t j = 0; j < d; ++j) o[j] = members[a][j] * members[b][j];
      o += d;
    }
  }
  if (order < 3) return;
  for (std::size_t j = 0; j < d; ++j) o[j] = members[0][j] * members[1][j] * members[2][j];
}

std::vector<double> interaction_features(std::span<const std::span<const double>> members,
                                         int order) {
  if (members.empty()) throw ConfigError("interaction features need members");
  std::vector<double> out(interaction_block_count(members.size(), order) * members.front().size());
  interaction_features(members, order, out);
  return out;
}

void node_aggregate(std::span<const std::span<const double>> members, const ModelConfig& config,
                    const Matrix* weights, std::span<double> scratch, std::span<double> out) {
  if (members.size() != config.member_count()) {
    throw ConfigError("hyperedge has " + std::to_string(members.size()) + " members, config expects " +
                      std::to_string(config.member_count()));
  }
  std::fill(out.begin(), out.end(), 0.0);
  if (!config.weighted) {
    for (auto m : members) {
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += m[j];
    }
    const double n = static_cast<double>(members.size());
    for (auto& x : out) x /= n;
    return;
  }
  auto features = scratch.first(config.weight_rows());
  interaction_features(members, config.order, features);
  const std::size_t d = out.size();
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double f = features[i];
    const double* w = weights->row(i).data();
    for (std::size_t j = 0; j < d; ++j) out[j] += f * w[j];
  }
}

std::vector<double> node_aggregate(std::span<const std::span<const double>> members,
                                   const ModelConfig& config, const Matrix* weights) {
  const auto d = members.front().size();
  std::vector<double> scratch(config.feature_blocks() * d);
  std::vector<double> out(d);
  node_aggregate(members, config, weights, scratch, out);
  return out;
}

void hyperedge_aggregate(std::span<const std::span<const double>> messages,
                         std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (messages.empty()) return;
  for (auto m : messages) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += m[j];
  }
  const double n = static_cast<double>(messages.size());
  for (auto& x : out) x /= n;
}

std::vector<double> hyperedge_aggregate(std::span<const std::span<const double>> messages,
                                        std::size_t dim) {
  std::vector<double> out(dim);
  hyperedge_aggregate(messages, out);
  return out;
}

std::size_t edge_feature_width(const ModelConfig& config) {
  return config.weighted ? config.weight_rows() : config.dim;
}

void edge_features(std::span<const std::span<const double>> members, const ModelConfig& config,
                   std::span<double> out) {
  if (config.weighted) {
    interaction_features(members, config.order, out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (auto m : members) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += m[j];
  }
  const double n = static_cast<double>(members.size());
  for (auto& x : out) x /= n;
}

void mean_edge_features(const Hypergraph& graph, const EmbeddingState& state, std::size_t layer,
                        const ModelConfig& config, Matrix& out) {
  const std::size_t width = edge_feature_width(config);
  out = Matrix(graph.node_count(), width);
  std::vector<double> feature(width);
  std::vector<std::span<const double>> members(graph.arity());
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    auto ids = graph.members(static_cast<Hypergraph::EdgeIndex>(e));
    for (std::size_t i = 0; i < ids.size(); ++i) members[i] = state.layer(ids[i], layer);
    edge_features(members, config, feature);
    for (auto v : ids) {
      double* row = out.row(v).data();
      for (std::size_t j = 0; j < width; ++j) row[j] += feature[j];
    }
  }
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    const auto deg = graph.degree(static_cast<Hypergraph::NodeIndex>(v));
    if (deg == 0) continue;
    const double inv = 1.0 / static_cast<double>(deg);
    for (auto& x : out.row(v)) x *= inv;
  }
}

EmbeddingState forward(const Hypergraph& graph, const QueryVocabulary& vocab,
                       const ParameterSet& params, const ModelConfig& config) {
  const auto& counts = graph.counts();
  params.check_shapes(config, counts, vocab.word_count);
  if (vocab.query_count() != counts.queries) {
    throw ConfigError("vocabulary covers " + std::to_string(vocab.query_count()) +
                      " queries, graph has " + std::to_string(counts.queries));
  }
  if (graph.kinds() != kinds_of(config.subset)) {
    throw ConfigError("hypergraph node kinds " + to_string(graph.kinds()) +
                      " do not match config subset " + std::string(to_string(config.subset)));
  }

  const std::size_t d = config.dim;
  EmbeddingState state(counts, d, config.layers);
  const std::size_t query_base = counts.users;
  const std::size_t product_base = std::size_t{counts.users} + counts.queries;
  for (std::uint32_t u = 0; u < counts.users; ++u) {
    auto src = params.users.row(u);
    std::copy(src.begin(), src.end(), state.layer(u, 0).begin());
  }
  for (std::uint32_t q = 0; q < counts.queries; ++q) {
    query_embedding(params.words, vocab.query_words[q], state.layer(query_base + q, 0));
  }
  for (std::uint32_t p = 0; p < counts.products; ++p) {
    auto src = params.products.row(p);
    std::copy(src.begin(), src.end(), state.layer(product_base + p, 0).begin());
  }

  // The message map is linear in the edge features, so averaging features
  // over E_v and applying W once per node equals averaging the messages.
  const std::size_t n = graph.node_count();
  Matrix mean_features;
  for (std::size_t l = 1; l <= config.layers; ++l) {
    for (std::size_t v = 0; v < n; ++v) {
      for (double x : std::as_const(state).layer(v, l - 1)) {
        if (!std::isfinite(x)) {
          throw NumericalError("non-finite embedding at node " +
                               to_string(graph.node_at(static_cast<Hypergraph::NodeIndex>(v))) +
                               " layer " + std::to_string(l - 1));
        }
      }
    }
    mean_edge_features(graph, state, l - 1, config, mean_features);
    for (std::size_t v = 0; v < n; ++v) {
      if (graph.degree(static_cast<Hypergraph::NodeIndex>(v)) == 0) continue;
      auto out = state.layer(v, l);
      auto f = mean_features.row(v);
      if (!config.weighted) {
        std::copy(f.begin(), f.end(), out.begin());
        continue;
      }
      const Matrix& w = params.layer_weights[l - 1];
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double fi = f[i];
        const double* wr = w.row(i).data();
        for (std::size_t j = 0; j < d; ++j) out[j] += fi * wr[j];
      }
    }
  }
  return state;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double score(const EmbeddingState& state, const Triple& t, double lambda) {
  auto zu = state.final(user_node(t.user));
  auto zq = state.final(query_node(t.query));
  auto zp = state.final(product_node(t.product));
  double s = 0.0;
  for (std::size_t j = 0; j < zp.size(); ++j) {
    s += (lambda * zu[j] + (1.0 - lambda) * zq[j]) * zp[j];
  }
  return s;
}

double predict(const EmbeddingState& state, const Triple& t, double lambda) {
  return sigmoid(score(state, t, lambda));
}

}  // namespace ihgnn
