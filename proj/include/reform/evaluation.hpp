#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"
#include "reform/trainer.hpp"

#include <map>
#include <unordered_set>
#include <vector>

namespace reform {

// Frozen inference-time state: propagated graph embeddings plus one attentive
// embedding per entity, computed with the deterministic evaluation keys (the
// first eval_key_cap training neighbors in index order).
struct EvalContext {
  Mat users_g, items_g;  // num×d_g
  Mat users_a, items_a;  // num×d_star
};

EvalContext build_eval_context(const ModelParams& params, const InteractionGraph& graph,
                               const EmbeddingStore& profiles, const TrainConfig& cfg);

// Scores every item outside the user's training set; descending score, ties by
// item index ascending. Training items never appear.
std::vector<int> rank_all(const EvalContext& ctx, const InteractionGraph& graph, int user);

double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                   int K);
double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant, int K);

struct EvalResult {
  // ("recall"|"ndcg", K) → mean over users with non-empty relevance sets
  std::map<std::pair<std::string, int>, double> values;
  int users_evaluated = 0;

  double at(const std::string& metric, int K) const;
};

enum class SplitPart { Val, Test };

EvalResult evaluate_model(const ModelParams& params, const InteractionGraph& graph,
                          const EmbeddingStore& profiles, const DataSplit& split, SplitPart part,
                          const TrainConfig& cfg, const std::vector<int>& Ks);

// Convenience hook for early stopping.
double validation_recall20(const ModelParams& params, const InteractionGraph& graph,
                           const EmbeddingStore& profiles, const DataSplit& split,
                           const TrainConfig& cfg);

// Two-sided paired t-test. Zero-variance differences degenerate to p = 0
// (nonzero mean) or p = 1 (all-zero), with a warning.
struct TTestResult {
  double t = 0;
  int df = 0;
  double p = 1;
  bool degenerate = false;
};

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation; the
// t-distribution CDF reduces to it.
double regularized_incomplete_beta(double a, double b, double x);

// ---- artifacts ---------------------------------------------------------------

struct MetricRow {
  std::string run_id;
  std::string variant;
  uint64_t seed = 0;
  std::string metric;
  int K = 0;
  double value = 0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

struct SweepRow {
  std::string x;  // e.g. the n value or noise ratio
  std::string metric;
  double value = 0;
};

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace reform
