#include "ihgnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "ihgnn/eval.hpp"

namespace ihgnn {

std::vector<Sample> TrainBatch::samples() const {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    out.push_back({positives[i], 1.0});
    if (i < negatives.size()) {
      for (const auto& n : negatives[i]) out.push_back({n, 0.0});
    }
  }
  return out;
}

namespace {

double sample_loss(double prediction, double label) {
  const double p = std::clamp(prediction, kLossEpsilon, 1.0 - kLossEpsilon);
  return -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
}

std::vector<Matrix*> tensors(ParameterSet& p) {
  std::vector<Matrix*> out{&p.users, &p.products, &p.words};
  for (auto& w : p.layer_weights) out.push_back(&w);
  return out;
}

std::vector<const Matrix*> tensors(const ParameterSet& p) {
  std::vector<const Matrix*> out{&p.users, &p.products, &p.words};
  for (const auto& w : p.layer_weights) out.push_back(&w);
  return out;
}

}  // namespace

double bce_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw ConfigError("bce_loss: predictions and labels differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += sample_loss(predictions[i], labels[i]);
  }
  return total;
}

PositiveIndex::PositiveIndex(std::span<const Triple> positives) {
  for (const auto& t : positives) by_key_[{t.user, t.query}].push_back(t.product);
  for (auto& [key, products] : by_key_) {
    std::sort(products.begin(), products.end());
    products.erase(std::unique(products.begin(), products.end()), products.end());
  }
}

bool PositiveIndex::contains(const Triple& t) const {
  auto products = this->products(t.user, t.query);
  return std::binary_search(products.begin(), products.end(), t.product);
}

std::size_t PositiveIndex::count(std::uint32_t user, std::uint32_t query) const {
  return products(user, query).size();
}

std::span<const std::uint32_t> PositiveIndex::products(std::uint32_t user,
                                                       std::uint32_t query) const {
  auto it = by_key_.find({user, query});
  if (it == by_key_.end()) return {};
  return it->second;
}

std::vector<Triple> sample_negatives(const Triple& positive, std::uint32_t catalog_size,
                                     const PositiveIndex& positives, std::size_t k, Rng& rng) {
  std::vector<Triple> out;
  if (k == 0) return out;
  auto taken = positives.products(positive.user, positive.query);
  std::size_t blocked = taken.size();
  if (!std::binary_search(taken.begin(), taken.end(), positive.product)) ++blocked;
  if (blocked >= catalog_size) {
    throw NumericalError("cannot sample negatives for user " + std::to_string(positive.user) +
                         " query " + std::to_string(positive.query) +
                         ": every product is a positive");
  }
  std::uniform_int_distribution<std::uint32_t> pick(0, catalog_size - 1);
  out.reserve(k);
  while (out.size() < k) {
    Triple t{positive.user, positive.query, pick(rng)};
    if (t.product == positive.product || positives.contains(t)) continue;
    out.push_back(t);
  }
  return out;
}

double batch_loss(const Hypergraph& graph, const QueryVocabulary& vocab,
                  const ParameterSet& params, const ModelConfig& config,
                  std::span<const Sample> samples) {
  const auto state = forward(graph, vocab, params, config);
  double total = 0.0;
  for (const auto& s : samples) total += sample_loss(predict(state, s.triple, config.lambda), s.label);
  return total;
}

LossAndGradients compute_gradients(const Hypergraph& graph, const QueryVocabulary& vocab,
                                   const ParameterSet& params, const ModelConfig& config,
                                   std::span<const Sample> samples) {
  const auto state = forward(graph, vocab, params, config);
  const auto& counts = graph.counts();
  const std::size_t d = config.dim;
  const std::size_t layers = config.layers;
  const std::size_t width = (layers + 1) * d;
  const double lambda = config.lambda;

  LossAndGradients result;
  result.gradients = ParameterSet::zeros(config, counts, vocab.word_count);

  // Gradient w.r.t. the concatenated embedding of every node.
  Matrix upstream(graph.node_count(), width);
  for (const auto& s : samples) {
    const auto ru = state.row_of(user_node(s.triple.user));
    const auto rq = state.row_of(query_node(s.triple.query));
    const auto rp = state.row_of(product_node(s.triple.product));
    const auto zu = state.final(ru);
    const auto zq = state.final(rq);
    const auto zp = state.final(rp);
    double sc = 0.0;
    for (std::size_t j = 0; j < width; ++j) sc += (lambda * zu[j] + (1.0 - lambda) * zq[j]) * zp[j];
    const double y_hat = sigmoid(sc);
    result.loss += sample_loss(y_hat, s.label);
    // The clamp makes the loss flat outside [eps, 1 - eps].
    if (y_hat < kLossEpsilon || y_hat > 1.0 - kLossEpsilon) continue;
    const double g = y_hat - s.label;
    auto gu = upstream.row(ru);
    auto gq = upstream.row(rq);
    auto gp = upstream.row(rp);
    for (std::size_t j = 0; j < width; ++j) {
      gu[j] += g * lambda * zp[j];
      gq[j] += g * (1.0 - lambda) * zp[j];
      gp[j] += g * (lambda * zu[j] + (1.0 - lambda) * zq[j]);
    }
  }

  const std::size_t n = graph.node_count();
  const std::size_t edges = graph.edge_count();
  const std::size_t arity = graph.arity();
  const std::size_t width_f = edge_feature_width(config);
  Matrix mean_features;
  Matrix mean_features_grad;
  std::vector<double> feature_grad(width_f);
  std::vector<std::span<const double>> members(arity);
  std::vector<std::span<double>> member_grad(arity);
  for (std::size_t l = layers; l >= 1; --l) {
    // z_v^(l) = fbar_v W with fbar_v the mean edge feature over E_v.
    if (config.weighted) mean_edge_features(graph, state, l - 1, config, mean_features);
    mean_features_grad = Matrix(n, width_f);
    for (std::size_t v = 0; v < n; ++v) {
      const auto deg = graph.degree(static_cast<Hypergraph::NodeIndex>(v));
      if (deg == 0) continue;
      const auto gv = upstream.row(v).subspan(l * d, d);
      if (std::all_of(gv.begin(), gv.end(), [](double x) { return x == 0.0; })) continue;
      auto gf = mean_features_grad.row(v);
      const double inv = 1.0 / static_cast<double>(deg);
      if (!config.weighted) {
        for (std::size_t j = 0; j < d; ++j) gf[j] = gv[j] * inv;
        continue;
      }
      const Matrix& w = params.layer_weights[l - 1];
      Matrix& dw = result.gradients.layer_weights[l - 1];
      const auto f = mean_features.row(v);
      for (std::size_t i = 0; i < width_f; ++i) {
        const double fi = f[i];
        const double* wr = w.row(i).data();
        double* dwr = dw.row(i).data();
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dwr[j] += fi * gv[j];
          acc += wr[j] * gv[j];
        }
        gf[i] = acc * inv;
      }
    }

    // Each edge feature reaches fbar_v of every member v with weight 1/d(v).
    for (std::size_t e = 0; e < edges; ++e) {
      auto ids = graph.members(static_cast<Hypergraph::EdgeIndex>(e));
      std::fill(feature_grad.begin(), feature_grad.end(), 0.0);
      for (auto v : ids) {
        const auto gf = mean_features_grad.row(v);
        for (std::size_t i = 0; i < width_f; ++i) feature_grad[i] += gf[i];
      }
      if (std::all_of(feature_grad.begin(), feature_grad.end(), [](double x) { return x == 0.0; })) {
        continue;
      }
      for (std::size_t i = 0; i < arity; ++i) {
        members[i] = state.layer(ids[i], l - 1);
        member_grad[i] = upstream.row(ids[i]).subspan((l - 1) * d, d);
      }
      if (!config.weighted) {
        const double inv = 1.0 / static_cast<double>(arity);
        for (auto& g : member_grad) {
          for (std::size_t j = 0; j < d; ++j) g[j] += feature_grad[j] * inv;
        }
        continue;
      }
      // Interaction feature blocks back to the member embeddings.
      const double* fg = feature_grad.data();
      for (std::size_t i = 0; i < arity; ++i) {
        for (std::size_t j = 0; j < d; ++j) member_grad[i][j] += fg[j];
        fg += d;
      }
      if (config.order >= 2) {
        for (std::size_t a = 0; a < arity; ++a) {
          for (std::size_t b = a + 1; b < arity; ++b) {
            for (std::size_t j = 0; j < d; ++j) {
              member_grad[a][j] += fg[j] * members[b][j];
              member_grad[b][j] += fg[j] * members[a][j];
            }
            fg += d;
          }
        }
      }
      if (config.order >= 3) {
        for (std::size_t j = 0; j < d; ++j) {
          member_grad[0][j] += fg[j] * members[1][j] * members[2][j];
          member_grad[1][j] += fg[j] * members[0][j] * members[2][j];
          member_grad[2][j] += fg[j] * members[0][j] * members[1][j];
        }
      }
    }
  }

  // Layer 0: lookup tables directly, queries through the word mean.
  auto& grads = result.gradients;
  for (std::uint32_t u = 0; u < counts.users; ++u) {
    auto src = upstream.row(state.row_of(user_node(u))).first(d);
    std::copy(src.begin(), src.end(), grads.users.row(u).begin());
  }
  for (std::uint32_t p = 0; p < counts.products; ++p) {
    auto src = upstream.row(state.row_of(product_node(p))).first(d);
    std::copy(src.begin(), src.end(), grads.products.row(p).begin());
  }
  for (std::uint32_t q = 0; q < counts.queries; ++q) {
    auto src = upstream.row(state.row_of(query_node(q))).first(d);
    const auto& words = vocab.query_words[q];
    const double inv = 1.0 / static_cast<double>(words.size());
    for (auto word : words) {
      auto dst = grads.words.row(word);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j] * inv;
    }
  }

  grads.for_each([](const std::string& name, const Matrix& m) {
    if (!m.all_finite()) throw NumericalError("non-finite gradient for " + name);
  });
  return result;
}

AdamOptimizer::AdamOptimizer(const ParameterSet& like, AdamOptions options)
    : options_(options), m_(like), v_(like) {
  for (auto* t : tensors(m_)) t->fill(0.0);
  for (auto* t : tensors(v_)) t->fill(0.0);
}

void AdamOptimizer::step(ParameterSet& params, const ParameterSet& gradients) {
  auto ps = tensors(params);
  auto gs = tensors(gradients);
  auto ms = tensors(m_);
  auto vs = tensors(v_);
  if (ps.size() != gs.size() || ps.size() != ms.size()) {
    throw ConfigError("Adam: parameter and gradient sets differ");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i]->same_shape(*gs[i]) || !ps[i]->same_shape(*ms[i])) {
      throw ConfigError("Adam: tensor shape mismatch");
    }
  }
  ++step_;
  const auto& o = options_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[i]->values();
    auto g = gs[i]->values();
    auto m = ms[i]->values();
    auto v = vs[i]->values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

ParameterSet initialize_parameters(const ModelConfig& config, const EntityCounts& counts,
                                   std::uint32_t word_count, Rng& rng) {
  auto params = ParameterSet::zeros(config, counts, word_count);
  auto uniform_fill = [&](Matrix& m, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : m.values()) x = dist(rng);
  };
  auto xavier = [&](Matrix& m) {
    if (m.empty()) return;
    uniform_fill(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols())));
  };
  xavier(params.users);
  xavier(params.products);
  xavier(params.words);
  for (auto& w : params.layer_weights) {
    // Kaiming uniform, gain 1; fan-in is the feature width.
    uniform_fill(w, std::sqrt(3.0 / static_cast<double>(w.rows())));
  }
  return params;
}

FitResult fit(const InteractionLog& train, const InteractionLog& valid,
              const QueryVocabulary& vocab, const ModelConfig& config,
              const TrainOptions& options, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw DataError("training log is empty");
  if (valid.empty()) throw DataError("validation log is empty");
  if (!(train.counts() == valid.counts())) {
    throw DataError("training and validation logs disagree on entity counts");
  }
  vocab.validate();
  if (vocab.query_count() != train.counts().queries) {
    throw DataError("query vocabulary covers " + std::to_string(vocab.query_count()) +
                    " queries, log has " + std::to_string(train.counts().queries));
  }
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  if (options.eval_k == 0) throw ConfigError("evaluation cutoff must be positive");

  const auto graph = build_hypergraph(train, kinds_of(config.subset));
  const auto positives = train.distinct_triples();
  const PositiveIndex index(positives);
  const auto catalog = train.counts().products;

  Rng rng(seed);
  FitResult result;
  result.params = initialize_parameters(config, train.counts(), vocab.word_count, rng);
  ParameterSet params = result.params;
  AdamOptimizer adam(params, options.adam);

  std::vector<std::size_t> order(positives.size());
  const InteractionLog* seen[] = {&train};
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  auto& report = result.report;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    try {
      std::vector<Sample> samples;
      for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
        const auto end = std::min(order.size(), begin + options.batch_size);
        samples.clear();
        for (std::size_t i = begin; i < end; ++i) {
          const auto& pos = positives[order[i]];
          samples.push_back({pos, 1.0});
          for (const auto& neg : sample_negatives(pos, catalog, index, options.negatives, rng)) {
            samples.push_back({neg, 0.0});
          }
        }
        auto lg = compute_gradients(graph, vocab, params, config, samples);
        if (!std::isfinite(lg.loss)) throw NumericalError("non-finite batch loss");
        epoch_loss += lg.loss;
        adam.step(params, lg.gradients);
      }
      if (!params.all_finite()) throw NumericalError("non-finite parameters after update");
    } catch (const NumericalError& e) {
      throw TrainingDiverged("epoch " + std::to_string(epoch) + ": " + e.what(), report);
    }

    const auto state = forward(graph, vocab, params, config);
    const auto metrics = evaluate_log(state, config.lambda, valid, seen, train, options.eval_k);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    report.epochs.push_back({epoch, epoch_loss, metrics.ndcg, elapsed.count()});

    if (metrics.ndcg > best) {
      best = metrics.ndcg;
      result.params = params;
      report.selected_epoch = epoch;
      since_best = 0;
    } else if (options.patience != 0 && ++since_best >= options.patience) {
      break;
    }
  }
  return result;
}

}  // namespace ihgnn
