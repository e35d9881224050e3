#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ihgnn/types.hpp"

namespace ihgnn {

struct Interaction {
  std::uint32_t user{0};
  std::uint32_t query{0};
  std::uint32_t product{0};
  std::int64_t timestamp{0};

  Triple triple() const { return {user, query, product}; }
  bool operator==(const Interaction&) const = default;
};

// Ordered list of interaction records plus the entity counts they index into.
class InteractionLog {
 public:
  InteractionLog() = default;
  // Validates every record against `counts`; throws DataError naming the
  // 1-based record position of the first offender.
  InteractionLog(EntityCounts counts, std::vector<Interaction> records);

  const EntityCounts& counts() const noexcept { return counts_; }
  const std::vector<Interaction>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  // Distinct triples in first-occurrence order.
  std::vector<Triple> distinct_triples() const;

  bool operator==(const InteractionLog&) const = default;

 private:
  EntityCounts counts_;
  std::vector<Interaction> records_;
};

// Word segmentation of every query. Word lists are never empty.
struct QueryVocabulary {
  std::uint32_t word_count{0};
  std::vector<std::vector<std::uint32_t>> query_words;

  std::uint32_t query_count() const {
    return static_cast<std::uint32_t>(query_words.size());
  }
  // Throws DataError if a list is empty or a word index is out of range.
  void validate() const;

  bool operator==(const QueryVocabulary&) const = default;
};

// interactions.tsv: `user\tquery\tproduct\ttimestamp` per line, with an
// optional leading `#counts U Q P` line. Without the header, counts are
// inferred as max index + 1.
InteractionLog read_interactions(std::istream& in);
InteractionLog load_interactions(const std::filesystem::path& path);
// Always writes the `#counts` header so isolated trailing entities survive.
void write_interactions(std::ostream& out, const InteractionLog& log);
void save_interactions(const std::filesystem::path& path, const InteractionLog& log);

// query_words.tsv: `query\tw1 w2 ...` per line. Every query in [0, query_count)
// must appear exactly once with at least one word.
QueryVocabulary read_query_words(std::istream& in, std::uint32_t query_count);
QueryVocabulary load_query_words(const std::filesystem::path& path, std::uint32_t query_count);
void write_query_words(std::ostream& out, const QueryVocabulary& vocab);
void save_query_words(const std::filesystem::path& path, const QueryVocabulary& vocab);

// Drops records until every user, query and product left in the log has at
// least `min_interactions` records. Entity counts are kept, so dropped
// entities stay addressable as isolated nodes. min_interactions <= 1 is the
// identity.
InteractionLog filter_k_core(const InteractionLog& log, std::size_t min_interactions);

// Planted-cluster generator. Every entity (and word) gets a latent cluster
// and a position on a circle inside it. The affinity of two entities is
// `noise_rate` across clusters and `intra_rate * exp(locality * (cos(2*pi*dt) - 1))`
// inside one, dt being their position gap. Queries are drawn by affinity to
// the user; products by the product of their affinities to user and query.
struct SyntheticSpec {
  std::uint32_t clusters{8};
  std::uint32_t users{300};
  std::uint32_t queries{100};
  std::uint32_t products{500};
  std::uint32_t words{400};
  double intra_rate{0.9};
  double noise_rate{0.03};
  double interactions_per_user{16.67};
  std::uint32_t words_per_query{3};
  double word_alignment{0.8};
  double locality{4.0};
  std::uint64_t seed{1};

  // Throws ConfigError on a degenerate spec.
  void validate() const;
};

struct SyntheticData {
  InteractionLog log;
  QueryVocabulary vocab;
  std::vector<std::uint32_t> user_cluster;
  std::vector<std::uint32_t> query_cluster;
  std::vector<std::uint32_t> product_cluster;
  std::vector<std::uint32_t> word_cluster;
  std::vector<double> user_position;
  std::vector<double> query_position;
  std::vector<double> product_position;
  std::vector<double> word_position;

  // Generative affinity between two entities.
  static double affinity(const SyntheticSpec& spec, std::uint32_t cluster_a, double position_a,
                         std::uint32_t cluster_b, double position_b);
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace ihgnn
