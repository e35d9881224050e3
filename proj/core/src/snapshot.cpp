#include "ihgnn/snapshot.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "ihgnn/errors.hpp"

namespace ihgnn {

namespace {

constexpr const char* kFormat = "ihgnn-snapshot";
constexpr int kVersion = 1;

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"dim", c.dim},
              {"layers", c.layers},
              {"order", c.order},
              {"weighted", c.weighted},
              {"subset", std::string(to_string(c.subset))},
              {"lambda", c.lambda}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.order = j.at("order").get<int>();
  c.weighted = j.at("weighted").get<bool>();
  c.subset = parse_node_subset(j.at("subset").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.validate();
  return c;
}

}  // namespace

void write_snapshot(std::ostream& out, const Snapshot& s) {
  s.params.check_shapes(s.config, s.counts, s.word_count);
  json tensors = json::array();
  s.params.for_each([&](const std::string& name, const Matrix& m) {
    json data = json::array();
    for (double x : m.values()) data.push_back(x);
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", data}});
  });
  json doc{{"format", kFormat},
           {"version", kVersion},
           {"config", config_to_json(s.config)},
           {"counts",
            {{"users", s.counts.users},
             {"queries", s.counts.queries},
             {"products", s.counts.products},
             {"words", s.word_count}}},
           {"tensors", tensors}};
  out << doc.dump() << '\n';
}

void save_snapshot(const std::filesystem::path& path, const Snapshot& snapshot) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_snapshot(out, snapshot);
}

Snapshot read_snapshot(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("snapshot is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != kFormat) throw DataError("not an ihgnn snapshot");
    if (doc.at("version") != kVersion) throw DataError("unsupported snapshot version");
    Snapshot s;
    s.config = config_from_json(doc.at("config"));
    const auto& counts = doc.at("counts");
    s.counts.users = counts.at("users").get<std::uint32_t>();
    s.counts.queries = counts.at("queries").get<std::uint32_t>();
    s.counts.products = counts.at("products").get<std::uint32_t>();
    s.word_count = counts.at("words").get<std::uint32_t>();

    s.params = ParameterSet::zeros(s.config, s.counts, s.word_count);
    const auto& tensors = doc.at("tensors");
    std::size_t expected = 0;
    s.params.for_each([&](const std::string& name, Matrix& m) {
      ++expected;
      const json* found = nullptr;
      for (const auto& t : tensors) {
        if (t.at("name") == name) found = &t;
      }
      if (!found) throw DataError("snapshot is missing tensor " + name);
      const auto rows = found->at("rows").get<std::size_t>();
      const auto cols = found->at("cols").get<std::size_t>();
      const auto& data = found->at("data");
      if (rows != m.rows() || cols != m.cols() || data.size() != rows * cols) {
        throw DataError("snapshot tensor " + name + " has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", config requires " + std::to_string(m.rows()) +
                        "x" + std::to_string(m.cols()));
      }
      auto values = m.values();
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = data[i].get<double>();
    });
    if (tensors.size() != expected) {
      throw DataError("snapshot has " + std::to_string(tensors.size()) + " tensors, config requires " +
                      std::to_string(expected));
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed snapshot: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("snapshot config invalid: ") + e.what());
  }
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_snapshot(in);
}

}  // namespace ihgnn
