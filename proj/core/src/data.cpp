#include "ihgnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "ihgnn/errors.hpp"

namespace ihgnn {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::User: return "user";
    case NodeKind::Query: return "query";
    case NodeKind::Product: return "product";
  }
  return "?";
}

std::string to_string(NodeId node) {
  return std::string(to_string(node.kind)) + ":" + std::to_string(node.index);
}

InteractionLog::InteractionLog(EntityCounts counts, std::vector<Interaction> records)
    : counts_(counts), records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const auto where = " in record " + std::to_string(i + 1);
    if (r.user >= counts_.users) {
      throw DataError("user index " + std::to_string(r.user) + " out of range" + where, i + 1);
    }
    if (r.query >= counts_.queries) {
      throw DataError("query index " + std::to_string(r.query) + " out of range" + where, i + 1);
    }
    if (r.product >= counts_.products) {
      throw DataError("product index " + std::to_string(r.product) + " out of range" + where,
                      i + 1);
    }
    if (r.timestamp < 0) {
      throw DataError("negative timestamp" + where, i + 1);
    }
  }
}

std::vector<Triple> InteractionLog::distinct_triples() const {
  std::set<Triple> seen;
  std::vector<Triple> out;
  for (const auto& r : records_) {
    if (seen.insert(r.triple()).second) out.push_back(r.triple());
  }
  return out;
}

void QueryVocabulary::validate() const {
  for (std::size_t q = 0; q < query_words.size(); ++q) {
    if (query_words[q].empty()) {
      throw DataError("query " + std::to_string(q) + " has no words", q + 1);
    }
    for (auto w : query_words[q]) {
      if (w >= word_count) {
        throw DataError("query " + std::to_string(q) + " uses word " + std::to_string(w) +
                            " beyond vocabulary size " + std::to_string(word_count),
                        q + 1);
      }
    }
  }
}

namespace {

template <typename Int>
bool parse_int(std::string_view text, Int& value) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

InteractionLog read_interactions(std::istream& in) {
  std::vector<Interaction> records;
  std::optional<EntityCounts> declared;
  EntityCounts inferred;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = strip_cr(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.starts_with("#counts")) {
        if (line_no != 1) throw DataError("#counts header must be the first line", line_no);
        std::istringstream fields{std::string(line.substr(7))};
        EntityCounts c;
        std::string extra;
        if (!(fields >> c.users >> c.queries >> c.products) || (fields >> extra)) {
          throw DataError("malformed #counts header at line 1", line_no);
        }
        declared = c;
      }
      continue;
    }
    auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                          std::to_string(fields.size()),
                      line_no);
    }
    Interaction r;
    if (!parse_int(fields[0], r.user) || !parse_int(fields[1], r.query) ||
        !parse_int(fields[2], r.product) || !parse_int(fields[3], r.timestamp)) {
      throw DataError("line " + std::to_string(line_no) + ": malformed integer field", line_no);
    }
    if (declared) {
      if (r.user >= declared->users || r.query >= declared->queries ||
          r.product >= declared->products) {
        throw DataError("line " + std::to_string(line_no) + ": index exceeds declared counts",
                        line_no);
      }
    }
    if (r.timestamp < 0) {
      throw DataError("line " + std::to_string(line_no) + ": negative timestamp", line_no);
    }
    inferred.users = std::max(inferred.users, r.user + 1);
    inferred.queries = std::max(inferred.queries, r.query + 1);
    inferred.products = std::max(inferred.products, r.product + 1);
    records.push_back(r);
  }
  return InteractionLog(declared.value_or(inferred), std::move(records));
}

InteractionLog load_interactions(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_interactions(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what(), e.position());
  }
}

void write_interactions(std::ostream& out, const InteractionLog& log) {
  const auto& c = log.counts();
  out << "#counts " << c.users << ' ' << c.queries << ' ' << c.products << '\n';
  for (const auto& r : log.records()) {
    out << r.user << '\t' << r.query << '\t' << r.product << '\t' << r.timestamp << '\n';
  }
}

void save_interactions(const std::filesystem::path& path, const InteractionLog& log) {
  auto out = open_output(path);
  write_interactions(out, log);
}

QueryVocabulary read_query_words(std::istream& in, std::uint32_t query_count) {
  QueryVocabulary vocab;
  vocab.query_words.resize(query_count);
  std::vector<bool> present(query_count, false);
  std::string raw;
  std::size_t line_no = 0;
  std::uint32_t word_count = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = strip_cr(raw);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw DataError("line " + std::to_string(line_no) + ": expected query<TAB>words", line_no);
    }
    std::uint32_t q = 0;
    if (!parse_int(fields[0], q)) {
      throw DataError("line " + std::to_string(line_no) + ": malformed query index", line_no);
    }
    if (q >= query_count) {
      throw DataError("line " + std::to_string(line_no) + ": query " + std::to_string(q) +
                          " beyond query count " + std::to_string(query_count),
                      line_no);
    }
    if (present[q]) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate query " + std::to_string(q),
                      line_no);
    }
    std::vector<std::uint32_t> words;
    for (auto token : split(fields[1], ' ')) {
      if (token.empty()) continue;
      std::uint32_t w = 0;
      if (!parse_int(token, w)) {
        throw DataError("line " + std::to_string(line_no) + ": malformed word index", line_no);
      }
      word_count = std::max(word_count, w + 1);
      words.push_back(w);
    }
    if (words.empty()) {
      throw DataError("line " + std::to_string(line_no) + ": query " + std::to_string(q) +
                          " has an empty word list",
                      line_no);
    }
    present[q] = true;
    vocab.query_words[q] = std::move(words);
  }
  for (std::uint32_t q = 0; q < query_count; ++q) {
    if (!present[q]) throw DataError("query " + std::to_string(q) + " has no word entry");
  }
  vocab.word_count = word_count;
  return vocab;
}

QueryVocabulary load_query_words(const std::filesystem::path& path, std::uint32_t query_count) {
  auto in = open_input(path);
  try {
    return read_query_words(in, query_count);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what(), e.position());
  }
}

void write_query_words(std::ostream& out, const QueryVocabulary& vocab) {
  for (std::size_t q = 0; q < vocab.query_words.size(); ++q) {
    out << q << '\t';
    const auto& words = vocab.query_words[q];
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out << ' ';
      out << words[i];
    }
    out << '\n';
  }
}

void save_query_words(const std::filesystem::path& path, const QueryVocabulary& vocab) {
  auto out = open_output(path);
  write_query_words(out, vocab);
}

InteractionLog filter_k_core(const InteractionLog& log, std::size_t min_interactions) {
  if (min_interactions <= 1) return log;
  const auto& c = log.counts();
  std::vector<Interaction> kept = log.records();
  while (true) {
    std::vector<std::size_t> nu(c.users), nq(c.queries), np(c.products);
    for (const auto& r : kept) {
      ++nu[r.user];
      ++nq[r.query];
      ++np[r.product];
    }
    auto before = kept.size();
    std::erase_if(kept, [&](const Interaction& r) {
      return nu[r.user] < min_interactions || nq[r.query] < min_interactions ||
             np[r.product] < min_interactions;
    });
    if (kept.size() == before) break;
  }
  return InteractionLog(c, std::move(kept));
}

void SyntheticSpec::validate() const {
  if (clusters == 0) throw ConfigError("synthetic spec needs at least one cluster");
  if (clusters > users || clusters > queries || clusters > products || clusters > words) {
    throw ConfigError("synthetic spec has more clusters (" + std::to_string(clusters) +
                      ") than entities of some kind");
  }
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(intra_rate) || !rate_ok(noise_rate) || !rate_ok(word_alignment)) {
    throw ConfigError("synthetic rates must lie in [0, 1]");
  }
  if (!(intra_rate > noise_rate)) {
    throw ConfigError("intra-cluster rate must exceed the noise rate");
  }
  if (!(interactions_per_user > 0.0)) {
    throw ConfigError("interactions per user must be positive");
  }
  if (!(locality >= 0.0)) throw ConfigError("locality must be non-negative");
  if (words_per_query == 0 || words_per_query > words) {
    throw ConfigError("words per query must be in [1, vocabulary size]");
  }
}

namespace {

// Balanced assignment (sizes differ by at most one), shuffled.
std::vector<std::uint32_t> assign_clusters(std::uint32_t n, std::uint32_t clusters, Rng& rng) {
  std::vector<std::uint32_t> out(n);
  for (std::uint32_t i = 0; i < n; ++i) out[i] = i % clusters;
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

double SyntheticData::affinity(const SyntheticSpec& spec, std::uint32_t cluster_a,
                               double position_a, std::uint32_t cluster_b, double position_b) {
  if (cluster_a != cluster_b) return spec.noise_rate;
  constexpr double kTwoPi = 6.283185307179586;
  return spec.intra_rate *
         std::exp(spec.locality * (std::cos(kTwoPi * (position_a - position_b)) - 1.0));
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData data;
  data.user_cluster = assign_clusters(spec.users, spec.clusters, rng);
  data.query_cluster = assign_clusters(spec.queries, spec.clusters, rng);
  data.product_cluster = assign_clusters(spec.products, spec.clusters, rng);
  data.word_cluster = assign_clusters(spec.words, spec.clusters, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto positions = [&](std::uint32_t n) {
    std::vector<double> out(n);
    for (auto& x : out) x = unit(rng);
    return out;
  };
  data.user_position = positions(spec.users);
  data.query_position = positions(spec.queries);
  data.product_position = positions(spec.products);
  data.word_position = positions(spec.words);

  auto affinity = [&](std::uint32_t ca, double pa, std::uint32_t cb, double pb) {
    return SyntheticData::affinity(spec, ca, pa, cb, pb);
  };

  const auto total = static_cast<std::size_t>(
      std::llround(spec.interactions_per_user * static_cast<double>(spec.users)));
  std::uniform_int_distribution<std::uint32_t> pick_user(0, spec.users - 1);
  std::vector<Interaction> records;
  records.reserve(total);
  std::vector<double> weights;
  for (std::size_t i = 0; i < total; ++i) {
    Interaction r;
    r.user = pick_user(rng);
    const auto cu = data.user_cluster[r.user];
    const auto pu = data.user_position[r.user];
    weights.assign(spec.queries, 0.0);
    for (std::uint32_t q = 0; q < spec.queries; ++q) {
      weights[q] = affinity(data.query_cluster[q], data.query_position[q], cu, pu);
    }
    r.query = std::discrete_distribution<std::uint32_t>(weights.begin(), weights.end())(rng);
    const auto cq = data.query_cluster[r.query];
    const auto pq = data.query_position[r.query];
    weights.assign(spec.products, 0.0);
    for (std::uint32_t p = 0; p < spec.products; ++p) {
      const auto cp = data.product_cluster[p];
      const auto pp = data.product_position[p];
      weights[p] = affinity(cp, pp, cu, pu) * affinity(cp, pp, cq, pq);
    }
    if (std::accumulate(weights.begin(), weights.end(), 0.0) == 0.0) {
      // Zero noise with a cross-cluster query cannot happen (the query shares
      // the user's cluster); guard anyway by falling back to the user alone.
      for (std::uint32_t p = 0; p < spec.products; ++p) {
        weights[p] = affinity(data.product_cluster[p], data.product_position[p], cu, pu);
      }
    }
    r.product = std::discrete_distribution<std::uint32_t>(weights.begin(), weights.end())(rng);
    r.timestamp = static_cast<std::int64_t>(i) * 60;
    records.push_back(r);
  }
  data.log = InteractionLog({spec.users, spec.queries, spec.products}, std::move(records));

  // Words: aligned draws come from the query's cluster weighted by affinity,
  // the rest uniformly from the whole vocabulary.
  std::bernoulli_distribution aligned(spec.word_alignment);
  std::uniform_int_distribution<std::uint32_t> any_word(0, spec.words - 1);
  data.vocab.word_count = spec.words;
  data.vocab.query_words.resize(spec.queries);
  for (std::uint32_t q = 0; q < spec.queries; ++q) {
    std::vector<double> w(spec.words);
    for (std::uint32_t i = 0; i < spec.words; ++i) {
      w[i] = data.word_cluster[i] == data.query_cluster[q]
                 ? affinity(data.word_cluster[i], data.word_position[i], data.query_cluster[q],
                            data.query_position[q])
                 : 0.0;
    }
    std::discrete_distribution<std::uint32_t> pick_aligned(w.begin(), w.end());
    auto& words = data.vocab.query_words[q];
    std::size_t attempts = 0;
    while (words.size() < spec.words_per_query) {
      // Aligned draws may repeat words; give up on alignment after many tries.
      const bool use_aligned = attempts++ < 64 * spec.words_per_query && aligned(rng);
      const std::uint32_t word = use_aligned ? pick_aligned(rng) : any_word(rng);
      if (std::find(words.begin(), words.end(), word) == words.end()) words.push_back(word);
    }
  }
  return data;
}

}  // namespace ihgnn
