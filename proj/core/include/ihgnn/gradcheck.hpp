#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ihgnn/data.hpp"
#include "ihgnn/hypergraph.hpp"
#include "ihgnn/model.hpp"
#include "ihgnn/training.hpp"

namespace ihgnn {

// A small fully specified training problem.
struct GradcheckProblem {
  InteractionLog log;
  QueryVocabulary vocab;
  Hypergraph graph;
  ParameterSet params;
  std::vector<Sample> samples;
};

// The four-interaction toy log (u0,q0,p0) (u1,q0,p1) (u1,q1,p2) (u2,q1,p1).
InteractionLog toy_log();

// Ten nodes (3 users, 3 queries, 4 products): the toy log plus three more
// interactions, a six-word vocabulary, seeded parameters and two sampled
// negatives per positive.
GradcheckProblem make_gradcheck_problem(const ModelConfig& config, std::uint64_t seed);

struct GradcheckResult {
  double max_relative_error{0.0};
  std::string worst_tensor;
  std::size_t worst_index{0};
  double analytic{0.0};
  double numeric{0.0};
  std::size_t checked{0};
};

// Central differences of batch_loss against compute_gradients. Relative
// error is |a - n| / max(|a|, |n|, floor).
GradcheckResult check_gradients(const GradcheckProblem& problem, const ModelConfig& config,
                                double step = 1e-5, double floor = 1e-6);

}  // namespace ihgnn
