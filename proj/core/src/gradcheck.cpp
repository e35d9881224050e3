#include "ihgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ihgnn {

InteractionLog toy_log() {
  return InteractionLog({3, 2, 3}, {{0, 0, 0, 1}, {1, 0, 1, 2}, {1, 1, 2, 3}, {2, 1, 1, 4}});
}

GradcheckProblem make_gradcheck_problem(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  GradcheckProblem p;
  auto records = toy_log().records();
  records.push_back({0, 2, 3, 5});
  records.push_back({2, 2, 2, 6});
  records.push_back({0, 1, 1, 7});
  p.log = InteractionLog({3, 3, 4}, records);
  p.vocab.word_count = 6;
  p.vocab.query_words = {{0, 1}, {2}, {3, 4, 5}};
  p.graph = build_hypergraph(p.log, kinds_of(config.subset));

  Rng rng(seed);
  p.params = initialize_parameters(config, p.log.counts(), p.vocab.word_count, rng);
  const auto positives = p.log.distinct_triples();
  const PositiveIndex index(positives);
  for (const auto& t : positives) {
    p.samples.push_back({t, 1.0});
    for (const auto& n : sample_negatives(t, p.log.counts().products, index, 2, rng)) {
      p.samples.push_back({n, 0.0});
    }
  }
  return p;
}

GradcheckResult check_gradients(const GradcheckProblem& problem, const ModelConfig& config,
                                double step, double floor) {
  const auto analytic =
      compute_gradients(problem.graph, problem.vocab, problem.params, config, problem.samples);
  ParameterSet params = problem.params;
  std::vector<std::pair<std::string, Matrix*>> tensors;
  params.for_each([&](const std::string& name, Matrix& m) { tensors.emplace_back(name, &m); });
  std::vector<const Matrix*> grads;
  analytic.gradients.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });

  GradcheckResult result;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto values = tensors[t].second->values();
    auto g = grads[t]->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = batch_loss(problem.graph, problem.vocab, params, config, problem.samples);
      values[i] = saved - step;
      const double down = batch_loss(problem.graph, problem.vocab, params, config, problem.samples);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err =
          std::abs(g[i] - numeric) / std::max({std::abs(g[i]), std::abs(numeric), floor});
      ++result.checked;
      if (err > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = err;
        result.worst_tensor = tensors[t].first;
        result.worst_index = i;
        result.analytic = g[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ihgnn
