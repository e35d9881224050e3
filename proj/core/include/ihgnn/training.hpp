#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ihgnn/data.hpp"
#include "ihgnn/errors.hpp"
#include "ihgnn/hypergraph.hpp"
#include "ihgnn/model.hpp"

namespace ihgnn {

inline constexpr double kLossEpsilon = 1e-12;

struct Sample {
  Triple triple;
  double label{0.0};
};

struct TrainBatch {
  std::vector<Triple> positives;
  std::vector<std::vector<Triple>> negatives;  // one list per positive

  // Positives (label 1) each followed by its negatives (label 0).
  std::vector<Sample> samples() const;
};

// Summed binary cross-entropy; predictions are clamped to
// [kLossEpsilon, 1 - kLossEpsilon].
double bce_loss(std::span<const double> predictions, std::span<const double> labels);

// Products known to be positive for each (user, query).
class PositiveIndex {
 public:
  PositiveIndex() = default;
  explicit PositiveIndex(std::span<const Triple> positives);

  bool contains(const Triple& t) const;
  std::size_t count(std::uint32_t user, std::uint32_t query) const;
  std::span<const std::uint32_t> products(std::uint32_t user, std::uint32_t query) const;

 private:
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> by_key_;
};

// k products drawn uniformly from [0, catalog_size), redrawing any that is a
// positive for the same (user, query). Throws NumericalError if every
// product is positive for the key.
std::vector<Triple> sample_negatives(const Triple& positive, std::uint32_t catalog_size,
                                     const PositiveIndex& positives, std::size_t k, Rng& rng);

struct LossAndGradients {
  double loss{0.0};
  ParameterSet gradients;
};

// Summed loss of `samples` under a full-graph forward pass.
double batch_loss(const Hypergraph& graph, const QueryVocabulary& vocab,
                  const ParameterSet& params, const ModelConfig& config,
                  std::span<const Sample> samples);

// Loss and exact reverse-mode gradients w.r.t. every parameter tensor.
// Throws NumericalError naming the tensor if a gradient is non-finite.
LossAndGradients compute_gradients(const Hypergraph& graph, const QueryVocabulary& vocab,
                                   const ParameterSet& params, const ModelConfig& config,
                                   std::span<const Sample> samples);

struct AdamOptions {
  double learning_rate{0.001};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterSet& like, AdamOptions options);

  void step(ParameterSet& params, const ParameterSet& gradients);

  std::uint64_t step_count() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return options_; }
  const ParameterSet& first_moment() const noexcept { return m_; }
  const ParameterSet& second_moment() const noexcept { return v_; }

 private:
  AdamOptions options_;
  ParameterSet m_;
  ParameterSet v_;
  std::uint64_t step_{0};
};

// Xavier-uniform embedding tables, Kaiming-uniform layer weights (gain 1).
ParameterSet initialize_parameters(const ModelConfig& config, const EntityCounts& counts,
                                   std::uint32_t word_count, Rng& rng);

struct TrainOptions {
  std::size_t epochs{100};
  std::size_t batch_size{100};
  std::size_t negatives{10};
  std::size_t patience{10};  // 0 disables early stopping
  std::size_t eval_k{10};
  AdamOptions adam;
};

struct EpochRecord {
  std::size_t epoch{0};  // 1-based
  double loss{0.0};
  double valid_ndcg{0.0};
  double seconds{0.0};
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> selected_epoch;  // none when no epoch ran
};

struct FitResult {
  ParameterSet params;
  TrainReport report;
};

// Thrown when an epoch's loss is non-finite; carries the report up to the
// last finite epoch.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, TrainReport report)
      : NumericalError(what), report_(std::move(report)) {}
  const TrainReport& report() const noexcept { return report_; }

 private:
  TrainReport report_;
};

// Trains on `train`, selects the epoch with the best validation NDCG@k
// (earliest on ties) and returns its parameters. Deterministic in `seed`.
FitResult fit(const InteractionLog& train, const InteractionLog& valid,
              const QueryVocabulary& vocab, const ModelConfig& config,
              const TrainOptions& options, std::uint64_t seed);

}  // namespace ihgnn
