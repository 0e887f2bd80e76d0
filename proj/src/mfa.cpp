#include "reform/mfa.hpp"

#include <algorithm>
#include <cmath>

namespace reform {

// ---- projections -----------------------------------------------------------

ProjectionSet ProjectionSet::glorot(int d, int d_star, uint64_t seed) {
  if (d <= 0 || d_star <= 0) throw ConfigError("projection dims must be positive");
  ProjectionSet p;
  const double bound = std::sqrt(6.0 / static_cast<double>(d + d_star));
  auto tensors = p.tensors();
  for (size_t t = 0; t < tensors.size(); ++t) {
    Rng rng(derive_seed(seed, "proj_init", t));
    Mat& W = *tensors[t];
    W.resize(d, d_star);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d_star; ++c) W(r, c) = (2.0 * rng.uniform01() - 1.0) * bound;
  }
  return p;
}

ProjectionSet ProjectionSet::zeros(int d, int d_star) {
  ProjectionSet p;
  for (Mat* W : p.tensors()) W->setZero(d, d_star);
  return p;
}

std::vector<Mat*> ProjectionSet::tensors() {
  return {&W_Qu, &W_Ki, &W_Vu, &W_Qi, &W_Ku, &W_Vi};
}

std::vector<const Mat*> ProjectionSet::tensors() const {
  return {&W_Qu, &W_Ki, &W_Vu, &W_Qi, &W_Ku, &W_Vi};
}

const char* ProjectionSet::tensor_name(int idx) {
  static const char* names[] = {"W_Qu", "W_Ki", "W_Vu", "W_Qi", "W_Ku", "W_Vi"};
  return names[idx];
}

Mat project(const Mat& profile, const Mat& W) {
  if (profile.cols() != W.rows())
    throw ConfigError("project: profile is " + std::to_string(profile.rows()) + "x" +
                      std::to_string(profile.cols()) + " but W is " + std::to_string(W.rows()) +
                      "x" + std::to_string(W.cols()));
  return profile * W;
}

// ---- attention -------------------------------------------------------------

namespace {

Mat row_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace

MfaForward mfa_forward(const Mat& Q, const std::vector<Mat>& K_list, const Mat& V,
                       PoolMode mode) {
  if (K_list.empty()) throw ConfigError("mfa_forward: need at least one key");
  const Eigen::Index M = Q.rows(), ds = Q.cols();
  if (V.rows() != M || V.cols() != ds) throw ConfigError("mfa_forward: V shape mismatch");

  const double scale = 1.0 / std::sqrt(static_cast<double>(ds));
  const int n = static_cast<int>(K_list.size());

  MfaForward out;
  out.maps.reserve(static_cast<size_t>(n));
  for (const Mat& K : K_list) {
    if (K.rows() != M || K.cols() != ds) throw ConfigError("mfa_forward: key shape mismatch");
    Mat logits = (Q * K.transpose()) * scale;
    if (!logits.allFinite()) throw FormatError("mfa_forward: non-finite attention logits");
    out.maps.push_back(row_softmax(logits));
  }

  out.pooled.resize(M, M);
  out.argmax.resize(M, M);
  if (mode == PoolMode::Max) {
    for (Eigen::Index r = 0; r < M; ++r) {
      for (Eigen::Index c = 0; c < M; ++c) {
        double best = out.maps[0](r, c);
        int src = 0;
        for (int i = 1; i < n; ++i) {
          if (out.maps[static_cast<size_t>(i)](r, c) > best) {
            best = out.maps[static_cast<size_t>(i)](r, c);
            src = i;
          }
        }
        out.pooled(r, c) = best;
        out.argmax(r, c) = src;
      }
    }
  } else {
    out.pooled.setZero();
    for (const Mat& A : out.maps) out.pooled += A;
    out.pooled /= static_cast<double>(n);
    out.argmax.setConstant(-1);
  }
  out.output = out.pooled * V;
  return out;
}

MfaGrads mfa_backward(const MfaForward& fwd, const Mat& Q, const std::vector<Mat>& K_list,
                      const Mat& V, const Mat& grad_output, PoolMode mode) {
  const Eigen::Index M = Q.rows(), ds = Q.cols();
  const int n = static_cast<int>(K_list.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(ds));

  MfaGrads g;
  g.dV = fwd.pooled.transpose() * grad_output;
  Mat d_pooled = grad_output * V.transpose();  // M×M

  // Split the pooled-map gradient across the source maps.
  std::vector<Mat> dA(static_cast<size_t>(n), Mat::Zero(M, M));
  if (mode == PoolMode::Max) {
    for (Eigen::Index r = 0; r < M; ++r)
      for (Eigen::Index c = 0; c < M; ++c)
        dA[static_cast<size_t>(fwd.argmax(r, c))](r, c) = d_pooled(r, c);
  } else {
    for (int i = 0; i < n; ++i) dA[static_cast<size_t>(i)] = d_pooled / static_cast<double>(n);
  }

  g.dQ = Mat::Zero(M, ds);
  g.dK.assign(static_cast<size_t>(n), Mat::Zero(M, ds));
  for (int i = 0; i < n; ++i) {
    const Mat& A = fwd.maps[static_cast<size_t>(i)];
    // Row-wise softmax adjoint: dz = a ∘ (da − ⟨da, a⟩).
    Mat dZ(M, M);
    for (Eigen::Index r = 0; r < M; ++r) {
      const double dot = dA[static_cast<size_t>(i)].row(r).dot(A.row(r));
      dZ.row(r) =
          (A.row(r).array() * (dA[static_cast<size_t>(i)].row(r).array() - dot)).matrix();
    }
    dZ *= scale;
    g.dQ += dZ * K_list[static_cast<size_t>(i)];
    g.dK[static_cast<size_t>(i)] = dZ.transpose() * Q;
  }
  return g;
}

Vec factor_average(const Mat& output) {
  if (output.rows() == 0) throw ConfigError("factor_average: empty matrix");
  return output.colwise().mean().transpose();
}

// ---- key selection ----------------------------------------------------------

std::vector<int32_t> sample_keys(const InteractionGraph& graph, EntityKind kind, int anchor,
                                 int n, uint64_t seed) {
  auto neighbors = kind == EntityKind::User ? graph.items_of(anchor) : graph.users_of(anchor);
  if (neighbors.empty())
    throw ConfigError(std::string("sample_keys: ") + entity_kind_name(kind) + " " +
                      std::to_string(anchor) + " has no training neighbors");
  if (static_cast<int>(neighbors.size()) <= n)
    return {neighbors.begin(), neighbors.end()};
  Rng rng(seed);
  auto picked = rng.sample_without_replacement(neighbors.size(), static_cast<size_t>(n));
  std::vector<int32_t> out;
  out.reserve(picked.size());
  for (size_t idx : picked) out.push_back(neighbors[idx]);
  return out;
}

std::vector<int32_t> eval_keys(const InteractionGraph& graph, EntityKind kind, int anchor,
                               int cap) {
  auto neighbors = kind == EntityKind::User ? graph.items_of(anchor) : graph.users_of(anchor);
  if (neighbors.empty())
    throw ConfigError(std::string("eval_keys: ") + entity_kind_name(kind) + " " +
                      std::to_string(anchor) + " has no training neighbors");
  const size_t take = std::min<size_t>(static_cast<size_t>(cap), neighbors.size());
  return {neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(take)};
}

// ---- anchor embedding ---------------------------------------------------------

MfaEmbedState mfa_embed(Direction dir, const Mat& anchor_profile,
                        const std::vector<const Mat*>& key_profiles, const ProjectionSet& proj,
                        PoolMode mode) {
  if (key_profiles.empty()) throw ConfigError("mfa_embed: need at least one key profile");
  const bool user_side = dir == Direction::UserSide;

  MfaEmbedState st;
  st.Q = project(anchor_profile, user_side ? proj.W_Qu : proj.W_Qi);
  st.V = project(anchor_profile, user_side ? proj.W_Vu : proj.W_Vi);
  st.K.reserve(key_profiles.size());
  for (const Mat* kp : key_profiles)
    st.K.push_back(project(*kp, user_side ? proj.W_Ki : proj.W_Ku));
  st.fwd = mfa_forward(st.Q, st.K, st.V, mode);
  st.embedding = factor_average(st.fwd.output);
  return st;
}

void mfa_embed_backward(Direction dir, const Mat& anchor_profile,
                        const std::vector<const Mat*>& key_profiles, const ProjectionSet& proj,
                        const MfaEmbedState& state, const Vec& grad_embedding, PoolMode mode,
                        ProjectionSet* grads) {
  (void)proj;
  const Eigen::Index M = state.Q.rows();
  // e^a = column mean of output → every output row receives grad/M.
  Mat d_out = (grad_embedding.transpose() / static_cast<double>(M)).replicate(M, 1);

  MfaGrads g = mfa_backward(state.fwd, state.Q, state.K, state.V, d_out, mode);

  const bool user_side = dir == Direction::UserSide;
  Mat& dWQ = user_side ? grads->W_Qu : grads->W_Qi;
  Mat& dWV = user_side ? grads->W_Vu : grads->W_Vi;
  Mat& dWK = user_side ? grads->W_Ki : grads->W_Ku;

  dWQ += anchor_profile.transpose() * g.dQ;
  dWV += anchor_profile.transpose() * g.dV;
  for (size_t i = 0; i < key_profiles.size(); ++i)
    dWK += key_profiles[i]->transpose() * g.dK[i];
}

}  // namespace reform
