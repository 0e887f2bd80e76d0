#include "reform/trainer.hpp"

#include "oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <set>

using namespace reform;
using nlohmann::json;

namespace {

Mat random_mat(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.gaussian();
  return m;
}

// A small but fully exercised training instance: 3 users, 3 items, every
// entity connected, profiles random.
struct MicroWorld {
  DataSplit split;
  InteractionGraph graph;
  EmbeddingStore profiles;
  TrainConfig cfg;

  explicit MicroWorld(bool use_mlp = false) {
    split.train = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 2}};
    split.val = {{0, 2}, {1, 0}};
    graph = build_graph(split, 3, 3);

    profiles.M = 2;
    profiles.d = 3;
    for (int u = 0; u < 3; ++u) profiles.users.push_back(random_mat(2, 3, 100 + u));
    for (int i = 0; i < 3; ++i) profiles.items.push_back(random_mat(2, 3, 200 + i));

    cfg.d_g = 4;
    cfg.d_star = 2;
    cfg.layers = 1;
    cfg.n_keys = 1;
    cfg.batch_size = 8;
    cfg.l2_lambda = 1e-3;
    cfg.eval_key_cap = 4;
    cfg.seed = 5;
    cfg.use_mlp = use_mlp;
  }
};

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("bpr loss and margin gradient at frozen points") {
  CHECK(bpr_loss(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bpr_margin_grad(0.0, 0.0) == doctest::Approx(-0.5).epsilon(1e-15));
  // softplus(-x) for a large margin: loss(20, 0) = ln(1 + e^-20)
  CHECK(bpr_loss(20.0, 0.0) == doctest::Approx(2.0611536e-9).epsilon(1e-6));
  // the mirrored case stays linear instead of overflowing
  CHECK(bpr_loss(0.0, 40.0) == doctest::Approx(40.0).epsilon(1e-10));
  CHECK(std::isfinite(bpr_loss(0.0, 800.0)));
  CHECK(std::isfinite(bpr_margin_grad(0.0, 800.0)));
  // numerical derivative of the loss in the margin
  const double h = 1e-6;
  const double fd = (bpr_loss(0.3 + h, 0.1) - bpr_loss(0.3 - h, 0.1)) / (2 * h);
  CHECK(bpr_margin_grad(0.3, 0.1) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("adam reproduces hand-computed scalar steps") {
  // Single 1x1 tensor, g=1 twice. m1=0.1, v1=0.001; mhat=1, vhat=1 ->
  // step1 = lr * 1/(1+eps). Second step identical direction.
  ModelParams p;
  p.user_base = Mat::Zero(1, 1);
  p.item_base = Mat::Zero(0, 0);
  p.proj = ProjectionSet::zeros(1, 1);
  p.mlp_W1 = Mat::Zero(0, 0);
  p.mlp_W2 = Mat::Zero(0, 0);

  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState adam;
  adam.init_like(p);

  std::vector<Mat> grads;
  for (Mat* t : p.tensors()) grads.push_back(Mat::Zero(t->rows(), t->cols()));
  grads[0](0, 0) = 1.0;

  adam.update(p, grads, cfg);
  const double eps_shift = 0.1 * 1.0 / (1.0 + cfg.adam_eps);
  CHECK(p.user_base(0, 0) == doctest::Approx(-eps_shift).epsilon(1e-12));

  adam.update(p, grads, cfg);
  // m2 = 0.19, v2 = 0.001999; bias-corrected both are 1 again
  CHECK(p.user_base(0, 0) == doctest::Approx(-2 * eps_shift).epsilon(1e-9));
  CHECK(adam.step[0] == 2);
}

TEST_CASE("triplet sampling avoids training items and is reproducible") {
  DataSplit split;
  split.train = {{0, 0}, {0, 1}, {1, 2}};
  InteractionGraph g = build_graph(split, 2, 4);

  auto batch = sample_triplets(split, g, 64, 9);
  REQUIRE(batch.size() == 64);
  for (const Triplet& t : batch) {
    CHECK((t.u == 0 || t.u == 1));
    bool is_train_pos = false;
    for (auto [u, i] : std::initializer_list<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 2}})
      if (t.u == u && t.i == i) is_train_pos = true;
    CHECK(is_train_pos);
    for (int32_t item : g.items_of(t.u)) CHECK(t.j != item);
    CHECK(t.j >= 0);
    CHECK(t.j < 4);
  }

  auto batch2 = sample_triplets(split, g, 64, 9);
  for (size_t k = 0; k < batch.size(); ++k) {
    CHECK(batch[k].u == batch2[k].u);
    CHECK(batch[k].i == batch2[k].i);
    CHECK(batch[k].j == batch2[k].j);
  }
  auto batch3 = sample_triplets(split, g, 64, 10);
  bool any_diff = false;
  for (size_t k = 0; k < batch.size(); ++k)
    any_diff = any_diff || batch[k].u != batch3[k].u || batch[k].i != batch3[k].i ||
               batch[k].j != batch3[k].j;
  CHECK(any_diff);
}

TEST_CASE("a user holding every item is skipped, not spun on") {
  DataSplit split;
  split.train = {{0, 0}, {0, 1}, {1, 0}};  // user 0 owns both items
  InteractionGraph g = build_graph(split, 2, 2);
  auto batch = sample_triplets(split, g, 32, 3);
  CHECK(!batch.empty());
  for (const Triplet& t : batch) CHECK(t.u == 1);  // only user 1 can give a negative
}

TEST_CASE("epoch keys cover every entity and vary by epoch") {
  DataSplit split;
  split.train = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}};
  InteractionGraph g = build_graph(split, 3, 3);  // user 2 isolated

  auto keys = epoch_keys(g, EntityKind::User, 2, 4, 0);
  REQUIRE(keys.size() == 3);
  CHECK(keys[0].size() == 2);
  CHECK(keys[1].size() == 2);
  CHECK(keys[2].empty());  // isolated: no keys, embedding stays zero

  auto keys_e1 = epoch_keys(g, EntityKind::User, 2, 4, 1);
  auto keys_e0 = epoch_keys(g, EntityKind::User, 2, 4, 0);
  CHECK(keys_e0[0] == keys[0]);  // same epoch, same draw
  bool differs = false;
  for (int e = 0; e < 2 && !differs; ++e) differs = keys_e1[e] != keys[e];
  CHECK(differs);  // different epoch reshuffles at least one entity here

  auto item_keys = epoch_keys(g, EntityKind::Item, 1, 4, 0);
  REQUIRE(item_keys.size() == 3);
  CHECK(item_keys[0].size() == 1);
}

TEST_CASE("loss decomposes into bpr plus weighted regularizer") {
  MicroWorld w;
  ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
  auto user_keys = epoch_keys(w.graph, EntityKind::User, w.cfg.n_keys, w.cfg.seed, 0);
  auto item_keys = epoch_keys(w.graph, EntityKind::Item, w.cfg.n_keys, w.cfg.seed, 0);
  auto batch = sample_triplets(w.split, w.graph, 8, 1);

  auto lg = compute_loss_and_grads(params, w.graph, w.profiles, batch, user_keys, item_keys, w.cfg);
  CHECK(lg.loss == doctest::Approx(lg.bpr + lg.reg).epsilon(1e-12));  // reg carries lambda
  CHECK(lg.bpr > 0.0);
  CHECK(lg.reg > 0.0);

  // reg scales linearly in lambda
  TrainConfig doubled = w.cfg;
  doubled.l2_lambda = 2 * w.cfg.l2_lambda;
  auto lg2 =
      compute_loss_and_grads(params, w.graph, w.profiles, batch, user_keys, item_keys, doubled);
  CHECK(lg2.reg == doctest::Approx(2 * lg.reg).epsilon(1e-12));
  CHECK(lg2.bpr == doctest::Approx(lg.bpr).epsilon(1e-12));
  REQUIRE(lg.grads.size() == params.tensors().size());

  // Unused tensors (the MLP matrices in attention mode) carry zero grads.
  auto names = params.tensor_names();
  for (size_t t = 0; t < names.size(); ++t) {
    if (names[t].rfind("mlp", 0) == 0 && lg.grads[t].size() > 0)
      CHECK(lg.grads[t].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("analytic gradients match finite differences end to end") {
  for (bool use_mlp : {false, true}) {
    CAPTURE(use_mlp);
    MicroWorld w(use_mlp);
    ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
    auto user_keys = epoch_keys(w.graph, EntityKind::User, w.cfg.n_keys, w.cfg.seed, 0);
    auto item_keys = epoch_keys(w.graph, EntityKind::Item, w.cfg.n_keys, w.cfg.seed, 0);
    auto batch = sample_triplets(w.split, w.graph, 6, 2);

    auto loss_fn = [&]() {
      return compute_loss_and_grads(params, w.graph, w.profiles, batch, user_keys, item_keys,
                                    w.cfg)
          .loss;
    };
    auto lg =
        compute_loss_and_grads(params, w.graph, w.profiles, batch, user_keys, item_keys, w.cfg);
    const double err = oracle::fd_max_rel_err(params, loss_fn, lg.grads);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gradients are identical across thread counts") {
  MicroWorld w;
  ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
  auto user_keys = epoch_keys(w.graph, EntityKind::User, w.cfg.n_keys, w.cfg.seed, 0);
  auto item_keys = epoch_keys(w.graph, EntityKind::Item, w.cfg.n_keys, w.cfg.seed, 0);
  auto batch = sample_triplets(w.split, w.graph, 32, 3);

  TrainConfig c1 = w.cfg;
  c1.threads = 1;
  TrainConfig c4 = w.cfg;
  c4.threads = 4;
  auto lg1 = compute_loss_and_grads(params, w.graph, w.profiles, batch, user_keys, item_keys, c1);
  auto lg4 = compute_loss_and_grads(params, w.graph, w.profiles, batch, user_keys, item_keys, c4);
  CHECK(lg1.loss == lg4.loss);
  REQUIRE(lg1.grads.size() == lg4.grads.size());
  for (size_t t = 0; t < lg1.grads.size(); ++t) CHECK(lg1.grads[t] == lg4.grads[t]);
}

TEST_CASE("training reduces the loss on the micro world") {
  MicroWorld w;
  w.cfg.learning_rate = 0.02;
  ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
  AdamState adam;
  adam.init_like(params);

  EpochStats first = train_epoch(params, adam, w.graph, w.profiles, w.split, w.cfg, 0);
  EpochStats later{};
  for (int e = 1; e <= 30; ++e)
    later = train_epoch(params, adam, w.graph, w.profiles, w.split, w.cfg, e);
  CHECK(later.loss < first.loss);
  CHECK(first.steps == 1);  // batch >= |train|: one step per epoch
}

TEST_CASE("fit early-stops, restores the best weights, and logs one line per epoch") {
  MicroWorld w;
  w.cfg.max_epochs = 50;
  w.cfg.patience = 3;
  w.cfg.eval_interval = 2;
  w.cfg.learning_rate = 0.02;
  ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
  AdamState adam;
  adam.init_like(params);

  // Scripted validation: rises for three evals, then collapses. Records the
  // params snapshot at the peak so restoration is observable.
  int evals = 0;
  Mat snapshot;
  auto validate = [&](const ModelParams& p) {
    ++evals;
    if (evals == 3) snapshot = p.user_base;
    return evals <= 3 ? static_cast<double>(evals) : 0.1;
  };

  const std::string log_path = "/tmp/reform_test_fit_log.jsonl";
  FitResult r = fit(params, adam, w.graph, w.profiles, w.split, w.cfg, validate, log_path);

  CHECK(r.best_metric == 3.0);
  CHECK(r.best_epoch == 6);             // third eval at epoch 6 (interval 2)
  CHECK(evals == 3 + w.cfg.patience + 1);  // stops right after patience runs out
  CHECK(r.epochs_run == 14);
  CHECK(params.user_base == snapshot);  // best weights restored

  const std::string log = read_text_file(log_path);
  std::vector<json> lines;
  size_t pos = 0;
  while (pos < log.size()) {
    size_t nl = log.find('\n', pos);
    if (nl == std::string::npos) break;
    lines.push_back(json::parse(log.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  REQUIRE(static_cast<int>(lines.size()) == r.epochs_run);
  CHECK(lines[0]["epoch"] == 1);
  CHECK(lines[0]["val_recall@20"].is_null());  // epoch 1 is off-interval
  CHECK(lines[1]["val_recall@20"].is_number());
  CHECK(lines[0].contains("loss"));
  CHECK(lines[0].contains("elapsed_ms"));
  std::remove(log_path.c_str());

  // History mirrors the file.
  REQUIRE(static_cast<int>(r.history.size()) == r.epochs_run);
  CHECK(!r.history[0].evaluated);
  CHECK(r.history[1].evaluated);
  CHECK(r.history[1].val_metric == 1.0);
}

TEST_CASE("masking a factor zeroes exactly that row everywhere") {
  EmbeddingStore store;
  store.M = 3;
  store.d = 2;
  store.users.push_back(random_mat(3, 2, 1));
  store.items.push_back(random_mat(3, 2, 2));

  EmbeddingStore masked = mask_factor_rows(store, 1);
  CHECK(masked.users[0].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(masked.items[0].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(masked.users[0].row(0) == store.users[0].row(0));
  CHECK(masked.users[0].row(2) == store.users[0].row(2));
  CHECK(store.users[0].row(1).cwiseAbs().maxCoeff() != 0.0);  // original untouched

  CHECK_THROWS_AS(mask_factor_rows(store, 3), ConfigError);
  CHECK_THROWS_AS(mask_factor_rows(store, -1), ConfigError);
}

TEST_CASE("checkpoints round trip tensors and metadata") {
  MicroWorld w;
  ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
  CheckpointMeta meta;
  meta.variant = "avg_pool";
  meta.config_hash = "00ff00ff00ff00ff";
  meta.epoch = 17;
  meta.metric = 0.375;

  const std::string path = "/tmp/reform_test_ckpt.bin";
  save_checkpoint(path, params, meta);

  CheckpointMeta got;
  ModelParams back = load_checkpoint(path, &got);
  CHECK(got.variant == "avg_pool");
  CHECK(got.config_hash == meta.config_hash);
  CHECK(got.epoch == 17);
  CHECK(got.metric == 0.375);
  CHECK(back.use_mlp == params.use_mlp);
  CHECK(back.user_base.rows() == 3);
  CHECK(back.user_base(1, 2) == doctest::Approx(params.user_base(1, 2)).epsilon(1e-6));

  // Saving the loaded model again is byte-identical (f32 fixed point).
  const std::string path2 = "/tmp/reform_test_ckpt2.bin";
  save_checkpoint(path2, back, got);
  CHECK(read_text_file(path) == read_text_file(path2));

  // Corruption is loud.
  const std::string full = read_text_file(path);
  write_text_file(path2, full.substr(0, full.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(path2), FormatError);
  write_text_file(path2, "not a checkpoint\n");
  CHECK_THROWS_AS(load_checkpoint(path2), FormatError);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("mlp checkpoint keeps the head weights and flag") {
  MicroWorld w(true);
  ModelParams params = ModelParams::init(3, 3, w.profiles.d, w.cfg);
  REQUIRE(params.use_mlp);
  const std::string path = "/tmp/reform_test_ckpt_mlp.bin";
  save_checkpoint(path, params, {});
  ModelParams back = load_checkpoint(path);
  CHECK(back.use_mlp);
  CHECK(back.mlp_W1.rows() == w.profiles.d);
  CHECK(back.mlp_W1.cols() == w.cfg.d_star);
  CHECK(back.mlp_W2(0, 0) == doctest::Approx(params.mlp_W2(0, 0)).epsilon(1e-6));
  std::remove(path.c_str());
}

TEST_CASE("config validation rejects broken settings") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.d_g = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.n_keys = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  CHECK_NOTHROW(cfg.validate());
}

}  // TEST_SUITE
