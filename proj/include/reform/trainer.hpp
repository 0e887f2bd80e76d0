#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"
#include "reform/graph_conv.hpp"
#include "reform/mfa.hpp"
#include "reform/text_encoder.hpp"

#include <functional>
#include <string>

namespace reform {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 4096;
  double l2_lambda = 1e-4;
  int n_keys = 3;
  int layers = 3;
  bool include_layer0 = false;
  int d_g = 256;   // graph embedding dim
  int d_star = 256;  // attention dim; fused vector is d_g + d_star wide
  int max_epochs = 100;
  int patience = 10;
  int eval_interval = 1;
  int eval_key_cap = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  int threads = 1;
  PoolMode pool = PoolMode::Max;
  bool use_mlp = false;  // replace attention with the 2-layer MLP head

  void validate() const;
};

// Trainable parameters: the base embedding tables plus either the six
// projection matrices or, for the MLP head, its two weight matrices.
struct ModelParams {
  Mat user_base, item_base;  // E^(0), rows are entities
  ProjectionSet proj;
  Mat mlp_W1, mlp_W2;  // d×d*, d*×d*
  bool use_mlp = false;

  static ModelParams init(int num_users, int num_items, int profile_dim, const TrainConfig& cfg);

  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
  std::vector<std::string> tensor_names() const;
};

struct AdamState {
  std::vector<Mat> m, v;
  std::vector<int64_t> step;

  void init_like(const ModelParams& params);
  void update(ModelParams& params, const std::vector<Mat>& grads, const TrainConfig& cfg);
};

// Numerically stable −ln σ(pos − neg).
double bpr_loss(double pos, double neg);
// dL/d(pos − neg) = −σ(neg − pos).
double bpr_margin_grad(double pos, double neg);

inline double fuse_and_score(const Vec& eg_u, const Vec& eg_i, const Vec& ea_u,
                             const Vec& ea_i) {
  return eg_u.dot(eg_i) + ea_u.dot(ea_i);
}

struct Triplet {
  int u, i, j;
};

// Positives uniform with replacement over train; negatives rejection-sampled
// against the user's training items. A user interacting with every item is
// skipped with a warning.
std::vector<Triplet> sample_triplets(const DataSplit& split, const InteractionGraph& graph,
                                     int batch_size, uint64_t seed);

// Per-epoch attention keys for every entity (index 0..num-1).
std::vector<std::vector<int32_t>> epoch_keys(const InteractionGraph& graph, EntityKind kind,
                                             int n_keys, uint64_t seed, int epoch);

struct LossGrads {
  double loss = 0;  // bpr + reg
  double bpr = 0;
  double reg = 0;
  std::vector<Mat> grads;  // aligned with ModelParams::tensors()
};

// Loss and exact gradients over one triplet batch. Pure function of
// (params, batch, keys); both the training loop and the finite-difference
// harness call this.
LossGrads compute_loss_and_grads(const ModelParams& params, const InteractionGraph& graph,
                                 const EmbeddingStore& profiles,
                                 const std::vector<Triplet>& batch,
                                 const std::vector<std::vector<int32_t>>& user_keys,
                                 const std::vector<std::vector<int32_t>>& item_keys,
                                 const TrainConfig& cfg);

struct EpochStats {
  double loss = 0, bpr = 0, reg = 0;
  int steps = 0;
  double elapsed_ms = 0;
};

EpochStats train_epoch(ModelParams& params, AdamState& adam, const InteractionGraph& graph,
                       const EmbeddingStore& profiles, const DataSplit& split,
                       const TrainConfig& cfg, int epoch);

struct TrainLogEntry {
  int epoch = 0;
  double loss = 0;
  double val_metric = 0;  // validation Recall@20 by default
  bool evaluated = false;
  double elapsed_ms = 0;
};

struct FitResult {
  std::vector<TrainLogEntry> history;
  int best_epoch = -1;
  double best_metric = 0;
  int epochs_run = 0;
};

// Trains with early stopping: validate() is called every eval_interval epochs;
// after `patience` + 1 consecutive non-improving evaluations training stops and
// the best parameters are restored. log_path, when set, receives one JSON line
// per epoch.
FitResult fit(ModelParams& params, AdamState& adam, const InteractionGraph& graph,
              const EmbeddingStore& profiles, const DataSplit& split, const TrainConfig& cfg,
              const std::function<double(const ModelParams&)>& validate,
              const std::string& log_path = "");

// Zeroes factor row m in every profile matrix (the mask-factor ablation).
EmbeddingStore mask_factor_rows(const EmbeddingStore& store, int factor);

struct CheckpointMeta {
  std::string variant = "full";
  std::string config_hash;
  int epoch = 0;
  double metric = 0;
};

// Header JSON line (shapes, meta) + little-endian f32 tensors in tensor order.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);
ModelParams load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace reform
