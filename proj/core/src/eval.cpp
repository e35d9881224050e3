#include "ihgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "ihgnn/errors.hpp"

namespace ihgnn {

TemporalSplit temporal_split(const InteractionLog& log, SplitRatios ratios) {
  if (log.empty()) throw DataError("cannot split an empty log");
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const auto& records = log.records();
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].timestamp < records[b].timestamp;
  });

  const auto n = records.size();
  // The slack keeps exact products such as 0.7 * 10 from flooring to 6.
  auto cut = [&](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  const auto n_train = std::min(n, cut(ratios.train));
  const auto n_valid = std::min(n - n_train, cut(ratios.valid));

  std::vector<Interaction> train, valid, test;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[order[i]];
    if (i < n_train) {
      train.push_back(r);
    } else if (i < n_train + n_valid) {
      valid.push_back(r);
    } else {
      test.push_back(r);
    }
  }
  return {InteractionLog(log.counts(), std::move(train)),
          InteractionLog(log.counts(), std::move(valid)),
          InteractionLog(log.counts(), std::move(test))};
}

std::vector<std::uint32_t> rank_by_scores(std::span<const double> scores,
                                          std::span<const std::uint32_t> exclusions) {
  std::vector<bool> excluded(scores.size(), false);
  for (auto p : exclusions) {
    if (p < scores.size()) excluded[p] = true;
  }
  std::vector<std::uint32_t> out;
  out.reserve(scores.size());
  for (std::uint32_t p = 0; p < scores.size(); ++p) {
    if (!excluded[p]) out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] > scores[b];
  });
  return out;
}

RankedList rank_products(std::uint32_t user, std::uint32_t query, const EmbeddingState& state,
                         double lambda, std::span<const std::uint32_t> exclusions) {
  const auto zu = state.final(user_node(user));
  const auto zq = state.final(query_node(query));
  std::vector<double> mixed(zu.size());
  for (std::size_t j = 0; j < mixed.size(); ++j) {
    mixed[j] = lambda * zu[j] + (1.0 - lambda) * zq[j];
  }
  const auto products = state.counts().products;
  std::vector<double> scores(products);
  for (std::uint32_t p = 0; p < products; ++p) {
    const auto zp = state.final(product_node(p));
    double s = 0.0;
    for (std::size_t j = 0; j < mixed.size(); ++j) s += mixed[j] * zp[j];
    scores[p] = s;
  }
  RankedList list;
  list.user = user;
  list.query = query;
  list.products = rank_by_scores(scores, exclusions);
  return list;
}

KeyMetrics metrics_for_list(const RankedList& list, std::size_t k) {
  KeyMetrics m;
  const auto& rel = list.relevant;
  if (rel.empty() || k == 0) return m;
  const std::size_t ideal = std::min(rel.size(), k);
  const std::size_t depth = std::min(list.products.size(), k);
  std::size_t hits = 0;
  double dcg = 0.0;
  double precision_sum = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (!std::binary_search(rel.begin(), rel.end(), list.products[r])) continue;
    ++hits;
    dcg += 1.0 / std::log2(static_cast<double>(r + 2));
    precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r + 2));
  m.hr = static_cast<double>(hits) / static_cast<double>(ideal);
  m.ndcg = dcg / idcg;
  m.map = precision_sum / static_cast<double>(ideal);
  return m;
}

RankingMetrics metrics_at_k(std::span<const RankedList> lists, std::size_t k) {
  if (k == 0) throw ConfigError("metric cutoff k must be positive");
  RankingMetrics out;
  out.k = k;
  for (const auto& list : lists) {
    if (list.relevant.empty()) {
      ++out.empty_keys;
      continue;
    }
    const auto m = metrics_for_list(list, k);
    out.hr += m.hr;
    out.ndcg += m.ndcg;
    out.map += m.map;
    ++out.evaluated_keys;
  }
  if (out.evaluated_keys > 0) {
    const double n = static_cast<double>(out.evaluated_keys);
    out.hr /= n;
    out.ndcg /= n;
    out.map /= n;
  }
  return out;
}

RankingMetrics evaluate_log(const EmbeddingState& state, double lambda,
                            const InteractionLog& target,
                            std::span<const InteractionLog* const> seen,
                            const InteractionLog& training, std::size_t k) {
  using Key = std::pair<std::uint32_t, std::uint32_t>;
  std::map<Key, std::set<std::uint32_t>> wanted;
  for (const auto& r : target.records()) wanted[{r.user, r.query}].insert(r.product);

  std::map<Key, std::vector<std::uint32_t>> excluded;
  for (const auto* log : seen) {
    for (const auto& r : log->records()) {
      auto it = wanted.find({r.user, r.query});
      if (it != wanted.end()) excluded[it->first].push_back(r.product);
    }
  }
  std::set<std::uint32_t> train_users, train_queries;
  for (const auto& r : training.records()) {
    train_users.insert(r.user);
    train_queries.insert(r.query);
  }

  const auto& counts = state.counts();
  std::vector<RankedList> lists;
  std::size_t skipped = 0;
  std::size_t cold = 0;
  std::size_t empty = 0;
  for (auto& [key, products] : wanted) {
    const auto [user, query] = key;
    if (user >= counts.users || query >= counts.queries) {
      ++skipped;
      continue;
    }
    auto& ex = excluded[key];
    std::sort(ex.begin(), ex.end());
    std::vector<std::uint32_t> relevant;
    for (auto p : products) {
      if (!std::binary_search(ex.begin(), ex.end(), p)) relevant.push_back(p);
    }
    if (relevant.empty()) {
      ++empty;
      continue;
    }
    auto list = rank_products(user, query, state, lambda, ex);
    list.relevant = std::move(relevant);
    if (!train_users.contains(user) || !train_queries.contains(query)) ++cold;
    lists.push_back(std::move(list));
  }
  auto metrics = metrics_at_k(lists, k);
  metrics.skipped_keys = skipped;
  metrics.empty_keys += empty;
  metrics.cold_keys = cold;
  return metrics;
}

}  // namespace ihgnn
