#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"
#include "reform/profile_gen.hpp"

#include <vector>

namespace reform {

// The six projection matrices, each d×d*. Queries and values are always taken
// from the anchor's own profile, keys from the counterpart side.
struct ProjectionSet {
  Mat W_Qu, W_Ki, W_Vu;  // user anchor: Q/V from the user profile, K from item profiles
  Mat W_Qi, W_Ku, W_Vi;  // item anchor: Q/V from the item profile, K from user profiles

  static ProjectionSet glorot(int d, int d_star, uint64_t seed);
  static ProjectionSet zeros(int d, int d_star);

  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
  static const char* tensor_name(int idx);
};

enum class PoolMode { Max, Avg };
enum class Direction { UserSide, ItemSide };

Mat project(const Mat& profile, const Mat& W);

// Cross attention of one anchor against n keys:
//   A_i = row_softmax(Q K_i^T / sqrt(d*)), pooled = elementwise max_i A_i
//   (argmax key recorded per cell; Avg mode averages instead), output = pooled V.
struct MfaForward {
  std::vector<Mat> maps;  // n row-stochastic M×M maps
  Mat pooled;             // M×M
  IntMat argmax;          // per-cell source key (Max mode; -1 in Avg mode)
  Mat output;             // M×d*
};

MfaForward mfa_forward(const Mat& Q, const std::vector<Mat>& K_list, const Mat& V,
                       PoolMode mode = PoolMode::Max);

struct MfaGrads {
  Mat dQ, dV;
  std::vector<Mat> dK;
};

// Exact adjoint of mfa_forward given the cached forward state. Max pooling
// routes each cell's gradient to its recorded argmax map only.
MfaGrads mfa_backward(const MfaForward& fwd, const Mat& Q, const std::vector<Mat>& K_list,
                      const Mat& V, const Mat& grad_output, PoolMode mode = PoolMode::Max);

// Mean of the M rows.
Vec factor_average(const Mat& output);

// Uniform without-replacement draw of min(n, degree) training neighbors.
std::vector<int32_t> sample_keys(const InteractionGraph& graph, EntityKind kind, int anchor,
                                 int n, uint64_t seed);

// Deterministic evaluation keys: the first min(cap, degree) training neighbors
// in index order.
std::vector<int32_t> eval_keys(const InteractionGraph& graph, EntityKind kind, int anchor,
                               int cap);

// Full anchor embedding: project, attend, average. Profiles are frozen inputs;
// gradients flow only into the projection matrices.
struct MfaEmbedState {
  Mat Q, V;
  std::vector<Mat> K;
  MfaForward fwd;
  Vec embedding;  // e^a, length d*
};

MfaEmbedState mfa_embed(Direction dir, const Mat& anchor_profile,
                        const std::vector<const Mat*>& key_profiles, const ProjectionSet& proj,
                        PoolMode mode = PoolMode::Max);

// Accumulates the six W gradients for one anchor into *grads.
void mfa_embed_backward(Direction dir, const Mat& anchor_profile,
                        const std::vector<const Mat*>& key_profiles, const ProjectionSet& proj,
                        const MfaEmbedState& state, const Vec& grad_embedding, PoolMode mode,
                        ProjectionSet* grads);

}  // namespace reform
