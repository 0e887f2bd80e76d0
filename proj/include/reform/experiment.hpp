#pragma once

#include "reform/config.hpp"
#include "reform/dataset.hpp"
#include "reform/evaluation.hpp"
#include "reform/profile_gen.hpp"
#include "reform/synth.hpp"
#include "reform/text_encoder.hpp"
#include "reform/trainer.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace reform {

struct DatasetBundle {
  std::vector<Review> reviews;  // after k-core filtering
  IdMap ids;
  DataSplit split;
  InteractionGraph graph;
};

DatasetBundle prepare_dataset(std::vector<Review> reviews, int k_core, SplitRatios ratios,
                              uint64_t seed);

// One pipeline configuration under study. `full` is the reference; the rest
// change exactly one thing: mean pooling instead of max, an MLP head instead
// of attention, one zeroed profile factor, or noisier profile inputs.
struct VariantSpec {
  enum class Kind { Full, AvgPool, NoMfaMlp, MaskFactor, Noise };

  Kind kind = Kind::Full;
  int factor = -1;           // MaskFactor
  std::string factor_name;   // for reports
  double noise_ratio = 0.0;  // Noise
  bool mask_at_train = true;  // false → mask only when scoring

  std::string name() const;
  void apply(TrainConfig* cfg) const;

  // Accepts "full", "avg_pool", "no_mfa_mlp", "mask_factor[:FACTOR]",
  // "noise[:RATIO]"; the explicit arguments override the inline suffix.
  static VariantSpec parse(const std::string& text, const FactorSet& factors,
                           const std::string& factor_override = "",
                           double noise_override = -1.0, bool mask_at_train = true);
};

// Everything a variant run needs besides the variant itself. The cache is
// shared so repeated profile builds (same prompts) never re-hit the backend.
struct ExperimentEnv {
  const DatasetBundle* data = nullptr;
  FactorSet factors;
  LlmBackendConfig llm;
  EncoderConfig encoder;
  ProfileGenOptions profile_opts;
  TrainConfig train;
  std::vector<int> Ks = {10, 20};
  std::string config_hash;
  ResponseCache* cache = nullptr;
};

// Profile generation + text encoding for one noise setting. `run_seed` keys
// the noise draws so different seeds corrupt different reviews.
EmbeddingStore build_profile_embeddings(const ExperimentEnv& env, double noise_ratio,
                                        uint64_t run_seed, ProfileStore* profiles_out = nullptr,
                                        ProfileRunStats* stats = nullptr);

struct SeedRun {
  uint64_t seed = 0;
  FitResult fit;
  EvalResult test;
  ModelParams params;        // best-validation snapshot
  EmbeddingStore embeddings; // unmasked store backing this run
};

SeedRun run_variant_seed(const ExperimentEnv& env, const VariantSpec& variant, uint64_t seed,
                         const std::string& log_path = "",
                         const std::string& checkpoint_path = "");

// Re-scores an already-trained model with profile factor `factor` zeroed.
EvalResult evaluate_masked(const ExperimentEnv& env, const ModelParams& params,
                           const EmbeddingStore& embeddings, int factor);

std::string make_run_id(const std::string& config_hash, const std::string& variant,
                        uint64_t seed);

struct AblationResult {
  std::vector<MetricRow> rows;
  // variant name → metric/K → per-seed values, seed order preserved
  std::map<std::string, std::map<std::pair<std::string, int>, std::vector<double>>> per_seed;
  nlohmann::ordered_json summary;
};

// Trains every (variant, seed) cell, evaluates on test, and aggregates. When
// artifact_dir is non-empty, writes per-run training logs and checkpoints
// there. The summary compares each variant against "full" (paired t-test on
// Recall@20 when both were run).
AblationResult run_ablation(const ExperimentEnv& env, const std::vector<VariantSpec>& variants,
                            const std::vector<uint64_t>& seeds,
                            const std::string& artifact_dir = "");

// Mean test Recall@20 (over seeds) per attention-key count.
std::vector<SweepRow> sweep_n_keys(const ExperimentEnv& env, const std::vector<int>& ns,
                                   const std::vector<uint64_t>& seeds);

}  // namespace reform
