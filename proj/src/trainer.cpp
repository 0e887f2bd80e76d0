#include "reform/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_set>

using json = nlohmann::json;

namespace reform {

void TrainConfig::validate() const {
  if (learning_rate <= 0 || batch_size <= 0 || l2_lambda < 0 || n_keys <= 0 || layers < 1 ||
      d_g <= 0 || d_star <= 0 || max_epochs < 1 || patience < 0 || eval_interval < 1 ||
      eval_key_cap < 1)
    throw ConfigError("train config holds a non-positive value where a positive one is required");
}

// ---- parameters -------------------------------------------------------------

ModelParams ModelParams::init(int num_users, int num_items, int profile_dim,
                              const TrainConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.use_mlp = cfg.use_mlp;

  Rng rng(derive_seed(cfg.seed, "init"));
  auto gaussian_fill = [&rng](Mat& m, Eigen::Index rows, Eigen::Index cols, double std) {
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = std * rng.gaussian();
  };
  gaussian_fill(p.user_base, num_users, cfg.d_g, 0.01);
  gaussian_fill(p.item_base, num_items, cfg.d_g, 0.01);

  if (cfg.use_mlp) {
    p.proj = ProjectionSet::zeros(1, 1);
    const double b1 = std::sqrt(6.0 / static_cast<double>(profile_dim + cfg.d_star));
    const double b2 = std::sqrt(6.0 / static_cast<double>(2 * cfg.d_star));
    Rng r1(derive_seed(cfg.seed, "init", 101));
    p.mlp_W1.resize(profile_dim, cfg.d_star);
    for (Eigen::Index r = 0; r < p.mlp_W1.rows(); ++r)
      for (Eigen::Index c = 0; c < p.mlp_W1.cols(); ++c)
        p.mlp_W1(r, c) = (2.0 * r1.uniform01() - 1.0) * b1;
    Rng r2(derive_seed(cfg.seed, "init", 102));
    p.mlp_W2.resize(cfg.d_star, cfg.d_star);
    for (Eigen::Index r = 0; r < p.mlp_W2.rows(); ++r)
      for (Eigen::Index c = 0; c < p.mlp_W2.cols(); ++c)
        p.mlp_W2(r, c) = (2.0 * r2.uniform01() - 1.0) * b2;
  } else {
    p.proj = ProjectionSet::glorot(profile_dim, cfg.d_star, derive_seed(cfg.seed, "init", 100));
    p.mlp_W1.resize(0, 0);
    p.mlp_W2.resize(0, 0);
  }
  return p;
}

std::vector<Mat*> ModelParams::tensors() {
  std::vector<Mat*> out = {&user_base, &item_base};
  if (use_mlp) {
    out.push_back(&mlp_W1);
    out.push_back(&mlp_W2);
  } else {
    for (Mat* w : proj.tensors()) out.push_back(w);
  }
  return out;
}

std::vector<const Mat*> ModelParams::tensors() const {
  std::vector<const Mat*> out = {&user_base, &item_base};
  if (use_mlp) {
    out.push_back(&mlp_W1);
    out.push_back(&mlp_W2);
  } else {
    for (const Mat* w : proj.tensors()) out.push_back(w);
  }
  return out;
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> out = {"user_base", "item_base"};
  if (use_mlp) {
    out.push_back("mlp_W1");
    out.push_back("mlp_W2");
  } else {
    for (int t = 0; t < 6; ++t) out.push_back(ProjectionSet::tensor_name(t));
  }
  return out;
}

// ---- adam -------------------------------------------------------------------

void AdamState::init_like(const ModelParams& params) {
  auto tensors = params.tensors();
  m.clear();
  v.clear();
  step.assign(tensors.size(), 0);
  for (const Mat* t : tensors) {
    m.push_back(Mat::Zero(t->rows(), t->cols()));
    v.push_back(Mat::Zero(t->rows(), t->cols()));
  }
}

void AdamState::update(ModelParams& params, const std::vector<Mat>& grads,
                       const TrainConfig& cfg) {
  auto tensors = params.tensors();
  if (tensors.size() != grads.size() || tensors.size() != m.size())
    throw ConfigError("adam state does not match the parameter list");
  for (size_t t = 0; t < tensors.size(); ++t) {
    ++step[t];
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    m[t] = b1 * m[t] + (1.0 - b1) * grads[t];
    v[t] = (b2 * v[t].array() + (1.0 - b2) * grads[t].array().square()).matrix();
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step[t]));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step[t]));
    tensors[t]->array() -= cfg.learning_rate * (m[t].array() / corr1) /
                           ((v[t].array() / corr2).sqrt() + cfg.adam_eps);
  }
}

// ---- loss --------------------------------------------------------------------

double bpr_loss(double pos, double neg) {
  const double x = neg - pos;  // softplus(x) = log1p(exp(-|x|)) + max(x, 0)
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double bpr_margin_grad(double pos, double neg) {
  const double t = neg - pos;
  const double sig = t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return -sig;  // d bpr / d (pos - neg)
}

// ---- sampling ------------------------------------------------------------------

std::vector<Triplet> sample_triplets(const DataSplit& split, const InteractionGraph& graph,
                                     int batch_size, uint64_t seed) {
  if (split.train.empty()) throw ConfigError("sample_triplets: empty training set");
  Rng rng(seed);
  std::vector<Triplet> out;
  out.reserve(static_cast<size_t>(batch_size));
  bool warned = false;
  int64_t guard = 0;
  while (static_cast<int>(out.size()) < batch_size) {
    if (++guard > static_cast<int64_t>(batch_size) * 1000)
      throw ConfigError("sample_triplets: cannot find negatives (catalog saturated)");
    const auto& pos = split.train[rng.uniform_int(split.train.size())];
    if (graph.user_degree[static_cast<size_t>(pos.user)] >= graph.num_items) {
      if (!warned) {
        log_warn("user " + std::to_string(pos.user) +
                 " interacts with every item; skipped in negative sampling");
        warned = true;
      }
      continue;
    }
    int j;
    do {
      j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(graph.num_items)));
    } while (graph.has_edge(pos.user, j));
    out.push_back({pos.user, pos.item, j});
  }
  return out;
}

std::vector<std::vector<int32_t>> epoch_keys(const InteractionGraph& graph, EntityKind kind,
                                             int n_keys, uint64_t seed, int epoch) {
  const int count = kind == EntityKind::User ? graph.num_users : graph.num_items;
  const uint64_t side = kind == EntityKind::User ? 0 : 1;
  std::vector<std::vector<int32_t>> keys(static_cast<size_t>(count));
  for (int e = 0; e < count; ++e) {
    const int degree = kind == EntityKind::User ? graph.user_degree[static_cast<size_t>(e)]
                                                : graph.item_degree[static_cast<size_t>(e)];
    if (degree == 0) continue;  // isolated entity: no keys, attention yields zero
    keys[static_cast<size_t>(e)] = sample_keys(
        graph, kind, e, n_keys,
        derive_seed(seed, "keys", static_cast<uint64_t>(epoch), side, static_cast<uint64_t>(e)));
  }
  return keys;
}

// ---- forward/backward ------------------------------------------------------------

namespace {

struct MlpState {
  Vec mean;   // x̄, length d
  Vec h_pre;  // W1ᵀ x̄
  Vec h;      // relu(h_pre)
  Vec out;    // W2ᵀ h
};

MlpState mlp_forward(const Mat& profile, const Mat& W1, const Mat& W2) {
  MlpState st;
  st.mean = factor_average(profile);
  st.h_pre = W1.transpose() * st.mean;
  st.h = st.h_pre.cwiseMax(0.0);
  st.out = W2.transpose() * st.h;
  return st;
}

void mlp_backward(const MlpState& st, const Vec& grad_out, const Mat& W2, Mat* dW1, Mat* dW2) {
  *dW2 += st.h * grad_out.transpose();
  Vec dh = W2 * grad_out;
  Vec dh_pre = (st.h_pre.array() > 0.0).select(dh, 0.0);
  *dW1 += st.mean * dh_pre.transpose();
}

}  // namespace

LossGrads compute_loss_and_grads(const ModelParams& params, const InteractionGraph& graph,
                                 const EmbeddingStore& profiles,
                                 const std::vector<Triplet>& batch,
                                 const std::vector<std::vector<int32_t>>& user_keys,
                                 const std::vector<std::vector<int32_t>>& item_keys,
                                 const TrainConfig& cfg) {
  if (batch.empty()) throw ConfigError("compute_loss_and_grads: empty batch");
  const int num_users = static_cast<int>(params.user_base.rows());
  const int num_items = static_cast<int>(params.item_base.rows());
  const int d_star = cfg.d_star;

  // Graph branch: one propagation serves the whole batch.
  PropagatedEmbeddings prop = propagate(graph, params.user_base, params.item_base, cfg.layers,
                                        cfg.include_layer0);

  // Unique batch entities.
  std::vector<char> user_hit(static_cast<size_t>(num_users), 0);
  std::vector<char> item_hit(static_cast<size_t>(num_items), 0);
  for (const auto& t : batch) {
    user_hit[static_cast<size_t>(t.u)] = 1;
    item_hit[static_cast<size_t>(t.i)] = 1;
    item_hit[static_cast<size_t>(t.j)] = 1;
  }
  std::vector<int> users, items;
  for (int u = 0; u < num_users; ++u)
    if (user_hit[static_cast<size_t>(u)]) users.push_back(u);
  for (int i = 0; i < num_items; ++i)
    if (item_hit[static_cast<size_t>(i)]) items.push_back(i);

  // Attentive branch forward for every involved entity.
  std::vector<MfaEmbedState> user_state(static_cast<size_t>(num_users));
  std::vector<MfaEmbedState> item_state(static_cast<size_t>(num_items));
  std::vector<MlpState> user_mlp(params.use_mlp ? static_cast<size_t>(num_users) : 0);
  std::vector<MlpState> item_mlp(params.use_mlp ? static_cast<size_t>(num_items) : 0);
  std::vector<Vec> user_ea(static_cast<size_t>(num_users));
  std::vector<Vec> item_ea(static_cast<size_t>(num_items));

  auto forward_user = [&](size_t idx) {
    const int u = users[idx];
    if (params.use_mlp) {
      user_mlp[static_cast<size_t>(u)] =
          mlp_forward(profiles.users[static_cast<size_t>(u)], params.mlp_W1, params.mlp_W2);
      user_ea[static_cast<size_t>(u)] = user_mlp[static_cast<size_t>(u)].out;
      return;
    }
    const auto& keys = user_keys[static_cast<size_t>(u)];
    if (keys.empty()) {
      user_ea[static_cast<size_t>(u)] = Vec::Zero(d_star);
      return;
    }
    std::vector<const Mat*> kp;
    kp.reserve(keys.size());
    for (int32_t i : keys) kp.push_back(&profiles.items[static_cast<size_t>(i)]);
    user_state[static_cast<size_t>(u)] = mfa_embed(
        Direction::UserSide, profiles.users[static_cast<size_t>(u)], kp, params.proj, cfg.pool);
    user_ea[static_cast<size_t>(u)] = user_state[static_cast<size_t>(u)].embedding;
  };
  auto forward_item = [&](size_t idx) {
    const int i = items[idx];
    if (params.use_mlp) {
      item_mlp[static_cast<size_t>(i)] =
          mlp_forward(profiles.items[static_cast<size_t>(i)], params.mlp_W1, params.mlp_W2);
      item_ea[static_cast<size_t>(i)] = item_mlp[static_cast<size_t>(i)].out;
      return;
    }
    const auto& keys = item_keys[static_cast<size_t>(i)];
    if (keys.empty()) {
      item_ea[static_cast<size_t>(i)] = Vec::Zero(d_star);
      return;
    }
    std::vector<const Mat*> kp;
    kp.reserve(keys.size());
    for (int32_t u : keys) kp.push_back(&profiles.users[static_cast<size_t>(u)]);
    item_state[static_cast<size_t>(i)] = mfa_embed(
        Direction::ItemSide, profiles.items[static_cast<size_t>(i)], kp, params.proj, cfg.pool);
    item_ea[static_cast<size_t>(i)] = item_state[static_cast<size_t>(i)].embedding;
  };
  parallel_for(users.size(), cfg.threads, forward_user);
  parallel_for(items.size(), cfg.threads, forward_item);

  // Scores, loss, upstream gradients.
  const double B = static_cast<double>(batch.size());
  double bpr_sum = 0;
  Mat d_users_g = Mat::Zero(num_users, cfg.d_g);
  Mat d_items_g = Mat::Zero(num_items, cfg.d_g);
  std::vector<Vec> d_user_ea(static_cast<size_t>(num_users));
  std::vector<Vec> d_item_ea(static_cast<size_t>(num_items));
  auto bump = [d_star](std::vector<Vec>& slot, int idx, const Vec& g) {
    auto& v = slot[static_cast<size_t>(idx)];
    if (v.size() == 0) v = Vec::Zero(d_star);
    v += g;
  };

  for (const auto& t : batch) {
    const auto eg_u = prop.users.row(t.u);
    const auto eg_i = prop.items.row(t.i);
    const auto eg_j = prop.items.row(t.j);
    const Vec& ea_u = user_ea[static_cast<size_t>(t.u)];
    const Vec& ea_i = item_ea[static_cast<size_t>(t.i)];
    const Vec& ea_j = item_ea[static_cast<size_t>(t.j)];

    const double pos = eg_u.dot(eg_i) + ea_u.dot(ea_i);
    const double neg = eg_u.dot(eg_j) + ea_u.dot(ea_j);
    const double loss = bpr_loss(pos, neg);
    if (!std::isfinite(loss))
      throw FormatError("non-finite BPR loss on triple (" + std::to_string(t.u) + ", " +
                        std::to_string(t.i) + ", " + std::to_string(t.j) + "): pos=" +
                        std::to_string(pos) + " neg=" + std::to_string(neg));
    bpr_sum += loss;

    const double g = bpr_margin_grad(pos, neg) / B;  // d(mean bpr)/d(pos−neg)
    d_users_g.row(t.u) += g * (eg_i - eg_j);
    d_items_g.row(t.i) += g * eg_u;
    d_items_g.row(t.j) -= g * eg_u;
    bump(d_user_ea, t.u, (g * (ea_i - ea_j)).eval());
    bump(d_item_ea, t.i, (g * ea_u).eval());
    bump(d_item_ea, t.j, (-g * ea_u).eval());
  }

  LossGrads out;
  out.bpr = bpr_sum / B;

  // Allocate gradient tensors aligned with params.tensors().
  auto tensors = params.tensors();
  out.grads.reserve(tensors.size());
  for (const Mat* t : tensors) out.grads.emplace_back(Mat::Zero(t->rows(), t->cols()));
  Mat& d_user_base = out.grads[0];
  Mat& d_item_base = out.grads[1];

  // Graph branch adjoint.
  Mat du0, di0;
  backprop_graph(graph, cfg.layers, cfg.include_layer0, d_users_g, d_items_g, &du0, &di0);
  d_user_base += du0;
  d_item_base += di0;

  // Attentive branch adjoint, accumulated in entity-index order for
  // thread-count-independent results.
  if (params.use_mlp) {
    Mat& dW1 = out.grads[2];
    Mat& dW2 = out.grads[3];
    for (int u : users)
      if (d_user_ea[static_cast<size_t>(u)].size() != 0)
        mlp_backward(user_mlp[static_cast<size_t>(u)], d_user_ea[static_cast<size_t>(u)],
                     params.mlp_W2, &dW1, &dW2);
    for (int i : items)
      if (d_item_ea[static_cast<size_t>(i)].size() != 0)
        mlp_backward(item_mlp[static_cast<size_t>(i)], d_item_ea[static_cast<size_t>(i)],
                     params.mlp_W2, &dW1, &dW2);
  } else {
    ProjectionSet pg = ProjectionSet::zeros(static_cast<int>(profiles.d), d_star);
    for (int u : users) {
      if (d_user_ea[static_cast<size_t>(u)].size() == 0 ||
          user_keys[static_cast<size_t>(u)].empty())
        continue;
      std::vector<const Mat*> kp;
      for (int32_t i : user_keys[static_cast<size_t>(u)])
        kp.push_back(&profiles.items[static_cast<size_t>(i)]);
      mfa_embed_backward(Direction::UserSide, profiles.users[static_cast<size_t>(u)], kp,
                         params.proj, user_state[static_cast<size_t>(u)],
                         d_user_ea[static_cast<size_t>(u)], cfg.pool, &pg);
    }
    for (int i : items) {
      if (d_item_ea[static_cast<size_t>(i)].size() == 0 ||
          item_keys[static_cast<size_t>(i)].empty())
        continue;
      std::vector<const Mat*> kp;
      for (int32_t u : item_keys[static_cast<size_t>(i)])
        kp.push_back(&profiles.users[static_cast<size_t>(u)]);
      mfa_embed_backward(Direction::ItemSide, profiles.items[static_cast<size_t>(i)], kp,
                         params.proj, item_state[static_cast<size_t>(i)],
                         d_item_ea[static_cast<size_t>(i)], cfg.pool, &pg);
    }
    auto pgt = pg.tensors();
    for (size_t t = 0; t < pgt.size(); ++t) out.grads[2 + t] += *pgt[t];
  }

  // L2 on batch-involved base rows and the full weight matrices.
  double reg = 0;
  const double lam = cfg.l2_lambda;
  if (lam > 0) {
    for (int u : users) {
      reg += params.user_base.row(u).squaredNorm();
      d_user_base.row(u) += 2.0 * lam * params.user_base.row(u);
    }
    for (int i : items) {
      reg += params.item_base.row(i).squaredNorm();
      d_item_base.row(i) += 2.0 * lam * params.item_base.row(i);
    }
    for (size_t t = 2; t < tensors.size(); ++t) {
      reg += tensors[t]->squaredNorm();
      out.grads[t] += 2.0 * lam * *tensors[t];
    }
  }
  out.reg = lam * reg;
  out.loss = out.bpr + out.reg;
  return out;
}

// ---- epoch / fit -------------------------------------------------------------------

EpochStats train_epoch(ModelParams& params, AdamState& adam, const InteractionGraph& graph,
                       const EmbeddingStore& profiles, const DataSplit& split,
                       const TrainConfig& cfg, int epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  auto ukeys = params.use_mlp ? std::vector<std::vector<int32_t>>()
                              : epoch_keys(graph, EntityKind::User, cfg.n_keys, cfg.seed, epoch);
  auto ikeys = params.use_mlp ? std::vector<std::vector<int32_t>>()
                              : epoch_keys(graph, EntityKind::Item, cfg.n_keys, cfg.seed, epoch);
  if (params.use_mlp) {
    ukeys.resize(static_cast<size_t>(graph.num_users));
    ikeys.resize(static_cast<size_t>(graph.num_items));
  }

  const int steps = static_cast<int>(
      (split.train.size() + static_cast<size_t>(cfg.batch_size) - 1) /
      static_cast<size_t>(cfg.batch_size));

  EpochStats stats;
  for (int s = 0; s < steps; ++s) {
    auto batch = sample_triplets(
        split, graph, cfg.batch_size,
        derive_seed(cfg.seed, "negatives", static_cast<uint64_t>(epoch), static_cast<uint64_t>(s)));
    LossGrads lg = compute_loss_and_grads(params, graph, profiles, batch, ukeys, ikeys, cfg);
    adam.update(params, lg.grads, cfg);
    stats.loss += lg.loss;
    stats.bpr += lg.bpr;
    stats.reg += lg.reg;
    ++stats.steps;
  }
  if (stats.steps > 0) {
    stats.loss /= stats.steps;
    stats.bpr /= stats.steps;
    stats.reg /= stats.steps;
  }
  stats.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return stats;
}

FitResult fit(ModelParams& params, AdamState& adam, const InteractionGraph& graph,
              const EmbeddingStore& profiles, const DataSplit& split, const TrainConfig& cfg,
              const std::function<double(const ModelParams&)>& validate,
              const std::string& log_path) {
  cfg.validate();
  FitResult result;
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw IoError("cannot open training log for writing: " + log_path);
  }

  ModelParams best = params;
  int non_improving = 0;
  bool stopped = false;

  for (int epoch = 1; epoch <= cfg.max_epochs && !stopped; ++epoch) {
    EpochStats es = train_epoch(params, adam, graph, profiles, split, cfg, epoch);

    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = es.loss;
    entry.elapsed_ms = es.elapsed_ms;

    if (epoch % cfg.eval_interval == 0) {
      entry.val_metric = validate(params);
      entry.evaluated = true;
      if (result.best_epoch < 0 || entry.val_metric > result.best_metric) {
        result.best_metric = entry.val_metric;
        result.best_epoch = epoch;
        best = params;
        non_improving = 0;
      } else if (++non_improving > cfg.patience) {
        stopped = true;
      }
    }

    if (log.is_open()) {
      json line;
      line["epoch"] = entry.epoch;
      line["loss"] = entry.loss;
      line["val_recall@20"] =
          entry.evaluated ? json(entry.val_metric) : json(nullptr);
      line["elapsed_ms"] = entry.elapsed_ms;
      log << line.dump() << "\n";
    }
    result.history.push_back(entry);
    result.epochs_run = epoch;
  }

  if (result.best_epoch >= 0) params = best;
  return result;
}

// ---- masking -----------------------------------------------------------------------

EmbeddingStore mask_factor_rows(const EmbeddingStore& store, int factor) {
  if (factor < 0 || factor >= store.M)
    throw ConfigError("mask_factor_rows: factor index " + std::to_string(factor) +
                      " out of range [0, " + std::to_string(store.M) + ")");
  EmbeddingStore out = store;
  for (Mat& m : out.users) m.row(factor).setZero();
  for (Mat& m : out.items) m.row(factor).setZero();
  return out;
}

// ---- checkpoints ---------------------------------------------------------------------

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  json header;
  header["magic"] = "rfmckpt1";
  header["arch"] = params.use_mlp ? "mlp" : "mfa";
  header["variant"] = meta.variant;
  header["config_hash"] = meta.config_hash;
  header["epoch"] = meta.epoch;
  header["metric"] = meta.metric;
  json tensors = json::array();
  auto names = params.tensor_names();
  auto mats = params.tensors();
  for (size_t t = 0; t < mats.size(); ++t)
    tensors.push_back(json{{"name", names[t]},
                           {"rows", mats[t]->rows()},
                           {"cols", mats[t]->cols()}});
  header["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const std::string head = header.dump() + "\n";
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Mat* mat : mats) {
    std::vector<float> buf(static_cast<size_t>(mat->size()));
    size_t k = 0;
    for (Eigen::Index r = 0; r < mat->rows(); ++r)
      for (Eigen::Index c = 0; c < mat->cols(); ++c) buf[k++] = static_cast<float>((*mat)(r, c));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string head;
  if (!std::getline(in, head)) throw FormatError("missing checkpoint header in " + path);
  json header = json::parse(head, nullptr, false);
  if (header.is_discarded() || header.value("magic", std::string()) != "rfmckpt1")
    throw FormatError("bad checkpoint header in " + path);

  ModelParams params;
  params.use_mlp = header.value("arch", std::string("mfa")) == "mlp";
  if (meta) {
    meta->variant = header.value("variant", std::string("full"));
    meta->config_hash = header.value("config_hash", std::string());
    meta->epoch = header.value("epoch", 0);
    meta->metric = header.value("metric", 0.0);
  }

  auto expected = params.tensor_names();
  const auto& tensor_info = header.at("tensors");
  if (tensor_info.size() != expected.size())
    throw FormatError("checkpoint tensor count mismatch in " + path);

  auto mats = params.tensors();
  for (size_t t = 0; t < mats.size(); ++t) {
    const auto& info = tensor_info[t];
    if (info.at("name").get<std::string>() != expected[t])
      throw FormatError("checkpoint tensor order mismatch in " + path + ": expected " +
                        expected[t] + ", found " + info.at("name").get<std::string>());
    const auto rows = info.at("rows").get<Eigen::Index>();
    const auto cols = info.at("cols").get<Eigen::Index>();
    mats[t]->resize(rows, cols);
    std::vector<float> buf(static_cast<size_t>(rows * cols));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != buf.size() * sizeof(float))
      throw FormatError("truncated checkpoint tensor " + expected[t] + " in " + path);
    size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) (*mats[t])(r, c) = buf[k++];
  }
  return params;
}

}  // namespace reform
