#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ihgnn/data.hpp"
#include "ihgnn/model.hpp"

namespace ihgnn {

struct SplitRatios {
  double train{0.7};
  double valid{0.1};
  double test{0.2};
};

struct TemporalSplit {
  InteractionLog train;
  InteractionLog valid;
  InteractionLog test;
};

// Orders records by timestamp (ties by record position) and cuts
// floor(train*n) / floor(valid*n) / remainder.
TemporalSplit temporal_split(const InteractionLog& log, SplitRatios ratios = {});

struct RankedList {
  std::uint32_t user{0};
  std::uint32_t query{0};
  // Candidates by descending score, lower product index first on ties.
  std::vector<std::uint32_t> products;
  // Sorted relevant products.
  std::vector<std::uint32_t> relevant;
};

// Candidate order for raw scores: descending, lower index first on ties.
std::vector<std::uint32_t> rank_by_scores(std::span<const double> scores,
                                          std::span<const std::uint32_t> exclusions);

// Scores every catalog product not in `exclusions` (sorted or not).
// Throws LookupError if the user or query is not in the state.
RankedList rank_products(std::uint32_t user, std::uint32_t query, const EmbeddingState& state,
                         double lambda, std::span<const std::uint32_t> exclusions);

struct RankingMetrics {
  std::size_t k{10};
  double hr{0.0};
  double ndcg{0.0};
  double map{0.0};
  std::size_t evaluated_keys{0};
  std::size_t skipped_keys{0};  // unknown user or query
  std::size_t empty_keys{0};    // no relevant products left after exclusion
  std::size_t cold_keys{0};     // evaluated keys whose user or query is absent from training
};

// Per-key values of the three metrics.
struct KeyMetrics {
  double hr{0.0};
  double ndcg{0.0};
  double map{0.0};
};
KeyMetrics metrics_for_list(const RankedList& list, std::size_t k);

// Means over lists that have at least one relevant product; the rest are
// counted in empty_keys.
RankingMetrics metrics_at_k(std::span<const RankedList> lists, std::size_t k = 10);

// Groups `target` by (user, query), excludes products seen for that key in
// any of `seen`, ranks and scores. `training` decides cold keys.
RankingMetrics evaluate_log(const EmbeddingState& state, double lambda,
                            const InteractionLog& target,
                            std::span<const InteractionLog* const> seen,
                            const InteractionLog& training, std::size_t k = 10);

}  // namespace ihgnn
