#include "ihgnn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ihgnn/data.hpp"
#include "ihgnn/errors.hpp"
#include "ihgnn/eval.hpp"
#include "ihgnn/gradcheck.hpp"
#include "ihgnn/model.hpp"
#include "ihgnn/snapshot.hpp"
#include "ihgnn/training.hpp"

namespace ihgnn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kInteractionsFile = "interactions.tsv";
constexpr const char* kQueryWordsFile = "query_words.tsv";
constexpr double kGradcheckTolerance = 1e-4;

struct ModelFlags {
  std::size_t d{32};
  std::size_t layers{2};
  int order{3};
  double lambda{0.5};
  std::string subset{"uqp"};
  bool unweighted{false};

  ModelConfig resolve() const {
    ModelConfig c;
    c.dim = d;
    c.layers = layers;
    c.order = order;
    c.lambda = lambda;
    c.subset = parse_node_subset(subset);
    c.weighted = !unweighted;
    c.validate();
    return c;
  }
};

struct TrainFlags {
  double lr{0.001};
  std::size_t batch_size{100};
  std::size_t negatives{10};
  std::size_t epochs{100};
  std::size_t patience{10};
  std::size_t k_core{0};
  bool record_timing{false};

  TrainOptions resolve() const {
    TrainOptions o;
    o.adam.learning_rate = lr;
    o.batch_size = batch_size;
    o.negatives = negatives;
    o.epochs = epochs;
    o.patience = patience;
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    return o;
  }
};

struct Flags {
  std::string command;
  ModelFlags model;
  TrainFlags train;
  std::uint64_t seed{1};
  std::string data;
  std::string model_path;
  std::string report;
  std::string out_dir;
  std::string split{"test"};
  std::size_t k{10};
  SyntheticSpec synthetic;
};

void add_model_flags(CLI::App& app, ModelFlags& m) {
  app.add_option("--d", m.d, "Embedding size")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--layers", m.layers, "Propagation layers")->capture_default_str();
  app.add_option("--order", m.order, "Interaction order (1-3)")
      ->capture_default_str()
      ->check(CLI::Range(1, 3));
  app.add_option("--lambda", m.lambda, "User/query mixing weight")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--subset", m.subset, "Hyperedge node kinds: uqp, up or qp")
      ->capture_default_str()
      ->check(CLI::IsMember({"uqp", "up", "qp"}));
  app.add_flag("--unweighted", m.unweighted, "Mean aggregation without layer weights");
}

void add_train_flags(CLI::App& app, TrainFlags& t) {
  app.add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--batch-size", t.batch_size, "Positives per mini-batch")->capture_default_str();
  app.add_option("--negatives", t.negatives, "Negatives per positive")->capture_default_str();
  app.add_option("--epochs", t.epochs, "Epoch budget")->capture_default_str();
  app.add_option("--patience", t.patience, "Early-stopping patience, 0 disables")
      ->capture_default_str();
  app.add_option("--k-core", t.k_core, "Minimum interactions per entity, 0 disables")
      ->capture_default_str();
  app.add_flag("--record-timing", t.record_timing, "Add wall-clock seconds to epoch records");
}

void add_synthetic_flags(CLI::App& app, SyntheticSpec& s) {
  app.add_option("--clusters", s.clusters, "Latent clusters")->capture_default_str();
  app.add_option("--users", s.users, "Users")->capture_default_str();
  app.add_option("--queries", s.queries, "Queries")->capture_default_str();
  app.add_option("--products", s.products, "Products")->capture_default_str();
  app.add_option("--words", s.words, "Vocabulary size")->capture_default_str();
  app.add_option("--intra-rate", s.intra_rate, "Same-cluster affinity")->capture_default_str();
  app.add_option("--noise-rate", s.noise_rate, "Cross-cluster affinity")->capture_default_str();
  app.add_option("--interactions-per-user", s.interactions_per_user, "Mean interactions per user")
      ->capture_default_str();
  app.add_option("--words-per-query", s.words_per_query, "Words per query")->capture_default_str();
  app.add_option("--alignment", s.word_alignment, "Probability a query word is on-cluster")
      ->capture_default_str();
  app.add_option("--locality", s.locality, "Within-cluster locality sharpness")
      ->capture_default_str();
}

ordered_json model_json(const ModelConfig& c) {
  return {{"d", c.dim},           {"layers", c.layers},
          {"order", c.order},     {"weighted", c.weighted},
          {"subset", std::string(to_string(c.subset))}, {"lambda", c.lambda}};
}

ordered_json train_json(const TrainFlags& t) {
  return {{"lr", t.lr},
          {"batch_size", t.batch_size},
          {"negatives", t.negatives},
          {"epochs", t.epochs},
          {"patience", t.patience},
          {"k_core", t.k_core},
          {"record_timing", t.record_timing}};
}

ordered_json synthetic_json(const SyntheticSpec& s) {
  return {{"clusters", s.clusters},
          {"users", s.users},
          {"queries", s.queries},
          {"products", s.products},
          {"words", s.words},
          {"intra_rate", s.intra_rate},
          {"noise_rate", s.noise_rate},
          {"interactions_per_user", s.interactions_per_user},
          {"words_per_query", s.words_per_query},
          {"alignment", s.word_alignment},
          {"locality", s.locality},
          {"seed", s.seed}};
}

ordered_json metrics_json(const RankingMetrics& m) {
  return {{"k", m.k},
          {"hr", m.hr},
          {"ndcg", m.ndcg},
          {"map", m.map},
          {"evaluated_keys", m.evaluated_keys},
          {"skipped_keys", m.skipped_keys},
          {"empty_keys", m.empty_keys},
          {"cold_keys", m.cold_keys}};
}

// Writes JSON Lines records to the report file or the default stream.
class Report {
 public:
  Report(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw DataError("cannot write report " + path);
      out_ = file_.get();
    }
  }
  void write(const ordered_json& record) {
    *out_ << record.dump() << '\n';
    out_->flush();
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

struct Dataset {
  InteractionLog log;
  QueryVocabulary vocab;
};

Dataset load_dataset(const std::string& dir, std::size_t k_core) {
  const fs::path root(dir);
  Dataset d;
  d.log = filter_k_core(load_interactions(root / kInteractionsFile), k_core);
  d.vocab = load_query_words(root / kQueryWordsFile, d.log.counts().queries);
  return d;
}

TemporalSplit split_for_training(const InteractionLog& log) {
  auto split = temporal_split(log);
  if (split.train.empty()) throw DataError("training split is empty");
  if (split.valid.empty()) throw DataError("validation split is empty; the log is too small");
  return split;
}

void merge(ordered_json& into, const ordered_json& from) {
  for (const auto& [key, value] : from.items()) into[key] = value;
}

ordered_json config_record(const Flags& f, const ordered_json& extra) {
  ordered_json j{{"record", "config"}, {"command", f.command}};
  merge(j, extra);
  return j;
}

ordered_json epoch_json(const EpochRecord& e, bool timing) {
  ordered_json j{{"record", "epoch"}, {"epoch", e.epoch}, {"loss", e.loss},
                 {"valid_ndcg", e.valid_ndcg}};
  if (timing) j["seconds"] = e.seconds;
  return j;
}

ordered_json summary_json(const TrainReport& r) {
  ordered_json j{{"record", "summary"}, {"epochs_run", r.epochs.size()}};
  j["selected_epoch"] = r.selected_epoch ? ordered_json(*r.selected_epoch) : ordered_json(nullptr);
  return j;
}

int cmd_generate(const Flags& f, std::ostream& out) {
  SyntheticSpec spec = f.synthetic;
  spec.seed = f.seed;
  const auto data = generate_synthetic(spec);
  const fs::path dir(f.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  save_interactions(dir / kInteractionsFile, data.log);
  save_query_words(dir / kQueryWordsFile, data.vocab);
  Report report(f.report, out);
  report.write(config_record(f, {{"out", f.out_dir}, {"synthetic", synthetic_json(spec)}}));
  report.write({{"record", "dataset"},
                {"users", data.log.counts().users},
                {"queries", data.log.counts().queries},
                {"products", data.log.counts().products},
                {"words", data.vocab.word_count},
                {"interactions", data.log.size()}});
  return kSuccess;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto config = f.model.resolve();
  const auto options = f.train.resolve();
  Report report(f.report, out);
  report.write(config_record(f, {{"data", f.data},
                                 {"model_path", f.model_path},
                                 {"seed", f.seed},
                                 {"model", model_json(config)},
                                 {"train", train_json(f.train)}}));
  const auto data = load_dataset(f.data, f.train.k_core);
  const auto split = split_for_training(data.log);
  try {
    const auto result = fit(split.train, split.valid, data.vocab, config, options, f.seed);
    for (const auto& e : result.report.epochs) report.write(epoch_json(e, f.train.record_timing));
    report.write(summary_json(result.report));
    save_snapshot(f.model_path,
                  {config, split.train.counts(), data.vocab.word_count, result.params});
  } catch (const TrainingDiverged& e) {
    for (const auto& r : e.report().epochs) report.write(epoch_json(r, f.train.record_timing));
    auto summary = summary_json(e.report());
    summary["diverged"] = e.what();
    report.write(summary);
    err << "ihgnn: training diverged: " << e.what() << '\n';
    return kNumericalError;
  }
  return kSuccess;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  const auto snapshot = load_snapshot(f.model_path);
  Report report(f.report, out);
  report.write(config_record(f, {{"data", f.data},
                                 {"model_path", f.model_path},
                                 {"split", f.split},
                                 {"k", f.k},
                                 {"k_core", f.train.k_core},
                                 {"model", model_json(snapshot.config)}}));
  const auto data = load_dataset(f.data, f.train.k_core);
  if (!(data.log.counts() == snapshot.counts)) {
    throw DataError("snapshot entity counts do not match " + f.data);
  }
  if (data.vocab.word_count != snapshot.word_count) {
    throw DataError("snapshot vocabulary size does not match " + f.data);
  }
  const auto split = split_for_training(data.log);
  const auto graph = build_hypergraph(split.train, kinds_of(snapshot.config.subset));
  const auto state = forward(graph, data.vocab, snapshot.params, snapshot.config);
  std::vector<const InteractionLog*> seen{&split.train};
  if (f.split == "test") seen.push_back(&split.valid);
  const auto& target = f.split == "test" ? split.test : split.valid;
  ordered_json record{{"record", "metrics"}};
  const auto m = evaluate_log(state, snapshot.config.lambda, target, seen, split.train, f.k);
  merge(record, metrics_json(m));
  report.write(record);
  return kSuccess;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  const auto config = f.model.resolve();
  Report report(f.report, out);
  report.write(config_record(f, {{"seed", f.seed}, {"model", model_json(config)}}));
  const auto problem = make_gradcheck_problem(config, f.seed);
  const auto r = check_gradients(problem, config);
  const bool passed = r.max_relative_error <= kGradcheckTolerance;
  report.write({{"record", "gradcheck"},
                {"max_relative_error", r.max_relative_error},
                {"tolerance", kGradcheckTolerance},
                {"worst_tensor", r.worst_tensor},
                {"worst_index", r.worst_index},
                {"analytic", r.analytic},
                {"numeric", r.numeric},
                {"checked", r.checked},
                {"passed", passed}});
  return passed ? kSuccess : kNumericalError;
}

int cmd_ablate(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto base = f.model.resolve();
  const auto options = f.train.resolve();
  Report report(f.report, out);
  SyntheticSpec spec = f.synthetic;
  spec.seed = f.seed;
  ordered_json echo{{"data", f.data}, {"seed", f.seed}, {"k", f.k},
                    {"model", model_json(base)}, {"train", train_json(f.train)}};
  if (f.data.empty()) echo["synthetic"] = synthetic_json(spec);
  report.write(config_record(f, echo));

  Dataset data;
  if (f.data.empty()) {
    auto generated = generate_synthetic(spec);
    data = {filter_k_core(generated.log, f.train.k_core), std::move(generated.vocab)};
  } else {
    data = load_dataset(f.data, f.train.k_core);
  }
  const auto split = split_for_training(data.log);
  const InteractionLog* seen[] = {&split.train, &split.valid};
  int status = kSuccess;
  for (const auto& variant : ablation_variants(base)) {
    ordered_json record{{"record", "metrics"}, {"variant", variant.name}};
    try {
      const auto result = fit(split.train, split.valid, data.vocab, variant.config, options, f.seed);
      const auto graph = build_hypergraph(split.train, kinds_of(variant.config.subset));
      const auto state = forward(graph, data.vocab, result.params, variant.config);
      const auto m = evaluate_log(state, variant.config.lambda, split.test, seen, split.train, f.k);
      record["selected_epoch"] = result.report.selected_epoch
                                     ? ordered_json(*result.report.selected_epoch)
                                     : ordered_json(nullptr);
      merge(record, metrics_json(m));
    } catch (const TrainingDiverged& e) {
      record["diverged"] = e.what();
      err << "ihgnn: " << variant.name << " diverged: " << e.what() << '\n';
      status = kNumericalError;
    }
    report.write(record);
  }
  return status;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Hypergraph product search: data generation, training and evaluation", "ihgnn"};
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  generate->add_option("--out", f.out_dir, "Output directory")->required();
  generate->add_option("--seed", f.seed, "Generator seed")->capture_default_str();
  generate->add_option("--report", f.report, "Report path (default stdout)");
  add_synthetic_flags(*generate, f.synthetic);

  auto* train = app.add_subcommand("train", "Train a model and write a snapshot");
  train->add_option("--data", f.data, "Dataset directory")->required();
  train->add_option("--model", f.model_path, "Snapshot output path")->required();
  train->add_option("--report", f.report, "Report path (default stdout)");
  train->add_option("--seed", f.seed, "Training seed")->capture_default_str();
  add_model_flags(*train, f.model);
  add_train_flags(*train, f.train);

  auto* evaluate = app.add_subcommand("evaluate", "Score a snapshot on a data split");
  evaluate->add_option("--data", f.data, "Dataset directory")->required();
  evaluate->add_option("--model", f.model_path, "Snapshot path")->required();
  evaluate->add_option("--report", f.report, "Report path (default stdout)");
  evaluate->add_option("--split", f.split, "test or valid")
      ->capture_default_str()
      ->check(CLI::IsMember({"test", "valid"}));
  evaluate->add_option("--k", f.k, "Ranking cutoff")->capture_default_str()->check(CLI::PositiveNumber);
  evaluate->add_option("--k-core", f.train.k_core, "Same filter as used for training")
      ->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare gradients with finite differences");
  gradcheck->add_option("--seed", f.seed, "Parameter seed")->capture_default_str();
  gradcheck->add_option("--report", f.report, "Report path (default stdout)");
  add_model_flags(*gradcheck, f.model);

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the six-variant grid");
  ablate->add_option("--data", f.data, "Dataset directory (default: generate synthetic data)");
  ablate->add_option("--report", f.report, "Report path (default stdout)");
  ablate->add_option("--seed", f.seed, "Data and training seed")->capture_default_str();
  ablate->add_option("--k", f.k, "Ranking cutoff")->capture_default_str()->check(CLI::PositiveNumber);
  add_model_flags(*ablate, f.model);
  add_train_flags(*ablate, f.train);
  add_synthetic_flags(*ablate, f.synthetic);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "ihgnn: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  f.command = app.get_subcommands().front()->get_name();

  try {
    if (f.command == "generate") return cmd_generate(f, out);
    if (f.command == "train") return cmd_train(f, out, err);
    if (f.command == "evaluate") return cmd_evaluate(f, out);
    if (f.command == "gradcheck") return cmd_gradcheck(f, out);
    return cmd_ablate(f, out, err);
  } catch (const ConfigError& e) {
    err << "ihgnn: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "ihgnn: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    err << "ihgnn: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "ihgnn: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace ihgnn::cli
