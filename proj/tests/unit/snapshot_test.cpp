#include <gtest/gtest.h>

#include <sstream>

#include "ihgnn/errors.hpp"
#include "ihgnn/gradcheck.hpp"
#include "ihgnn/snapshot.hpp"

namespace ihgnn {
namespace {

Snapshot sample_snapshot() {
  ModelConfig c;
  c.dim = 3;
  c.order = 2;
  c.lambda = 0.25;
  auto p = make_gradcheck_problem(c, 4);
  p.params.users(0, 0) = 0.1 + 0.2;  // not exactly representable in short decimal
  return {c, p.log.counts(), p.vocab.word_count, p.params};
}

std::string dump(const Snapshot& s) {
  std::ostringstream out;
  write_snapshot(out, s);
  return out.str();
}

Snapshot parse(const std::string& text) {
  std::istringstream in(text);
  return read_snapshot(in);
}

TEST(Snapshot, RoundTripIsExact) {
  const auto s = sample_snapshot();
  const auto back = parse(dump(s));
  EXPECT_EQ(back.config, s.config);
  EXPECT_EQ(back.counts, s.counts);
  EXPECT_EQ(back.word_count, s.word_count);
  EXPECT_EQ(back.params, s.params);
  EXPECT_EQ(dump(back), dump(s));
}

TEST(Snapshot, UnweightedHasNoLayerTensors) {
  auto s = sample_snapshot();
  s.config.weighted = false;
  s.config.order = 1;
  s.params.layer_weights.clear();
  EXPECT_EQ(parse(dump(s)).params, s.params);
}

TEST(Snapshot, RejectsMismatches) {
  const std::string good = dump(sample_snapshot());
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    s.replace(at, from.size(), to);
    return s;
  };
  EXPECT_THROW(parse("not json"), DataError);
  EXPECT_THROW(parse(replace("\"order\":2", "\"order\":1")), DataError);
  EXPECT_THROW(parse(replace("\"users\":3", "\"users\":4")), DataError);
  EXPECT_THROW(parse(replace("\"name\":\"layer2\"", "\"name\":\"layer9\"")), DataError);
  EXPECT_THROW(parse(replace("\"format\":\"ihgnn-snapshot\"", "\"format\":\"other\"")),
               DataError);
  EXPECT_THROW(parse(replace("\"lambda\":0.25", "\"lambda\":3.0")), DataError);
}

TEST(Snapshot, MissingFile) {
  EXPECT_THROW(load_snapshot("/nonexistent/model.json"), DataError);
}

}  // namespace
}  // namespace ihgnn
