// Release gate: one self-contained check per shipped guarantee, one line of
// output each. Exits nonzero if any line fails.

#include "reform/common.hpp"
#include "reform/config.hpp"
#include "reform/dataset.hpp"
#include "reform/evaluation.hpp"
#include "reform/experiment.hpp"
#include "reform/graph_conv.hpp"
#include "reform/mfa.hpp"
#include "reform/profile_gen.hpp"
#include "reform/synth.hpp"
#include "reform/text_encoder.hpp"
#include "reform/trainer.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace reform;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", idx, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

// Wraps a criterion body so an exception becomes a FAIL line, not an abort.
template <typename Fn>
void criterion(int idx, const char* name, Fn&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(idx, name, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Mat random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat A(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = scale * rng.gaussian();
  return A;
}

bool same_bits(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---- 1: finite-difference gradient check -----------------------------------------

// Tiny interaction world shared by the gradient and determinism checks: three
// users, three items, every entity with two training neighbors.
struct MicroWorld {
  DataSplit split;
  InteractionGraph graph;
  EmbeddingStore profiles;

  explicit MicroWorld(int M, int d, uint64_t seed) {
    split.train = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 2}};
    split.val = {{0, 2}};
    split.test = {{1, 0}};
    graph = build_graph(split, 3, 3);
    profiles.M = M;
    profiles.d = d;
    Rng rng(seed);
    for (int e = 0; e < 3; ++e) profiles.users.push_back(random_mat(rng, M, d, 0.8));
    for (int e = 0; e < 3; ++e) profiles.items.push_back(random_mat(rng, M, d, 0.8));
  }
};

void check_gradients() {
  const auto t0 = std::chrono::steady_clock::now();

  // End to end: loss -> score -> attention + propagation -> every parameter.
  MicroWorld world(/*M=*/2, /*d=*/4, /*seed=*/77);
  TrainConfig cfg;
  cfg.d_g = 4;
  cfg.d_star = 4;
  cfg.layers = 1;
  cfg.n_keys = 1;
  cfg.batch_size = 8;
  cfg.l2_lambda = 1e-3;
  cfg.seed = 5;
  ModelParams params = ModelParams::init(3, 3, world.profiles.d, cfg);
  const std::vector<Triplet> batch = {{0, 0, 2}, {0, 1, 2}, {1, 1, 0},
                                      {1, 2, 0}, {2, 0, 1}, {2, 2, 1}};
  const auto ukeys = epoch_keys(world.graph, EntityKind::User, cfg.n_keys, cfg.seed, 0);
  const auto ikeys = epoch_keys(world.graph, EntityKind::Item, cfg.n_keys, cfg.seed, 0);
  const LossGrads lg =
      compute_loss_and_grads(params, world.graph, world.profiles, batch, ukeys, ikeys, cfg);
  const double err_e2e = oracle::fd_max_rel_err(
      params,
      [&]() {
        return compute_loss_and_grads(params, world.graph, world.profiles, batch, ukeys, ikeys,
                                      cfg)
            .loss;
      },
      lg.grads, /*h=*/1e-4);

  // Attention block in isolation, tighter tolerance. Coordinates whose
  // perturbation flips a pooling argmax are skipped: the max is not
  // differentiable across ties.
  double err_mfa = 0;
  int checked = 0;
  for (uint64_t trial = 0; trial < 3; ++trial) {
    Rng rng(1300 + trial);
    const int M = 3, ds = 4;
    Mat Q = random_mat(rng, M, ds);
    Mat V = random_mat(rng, M, ds);
    std::vector<Mat> K = {random_mat(rng, M, ds), random_mat(rng, M, ds)};
    const Mat G = random_mat(rng, M, ds);
    const MfaForward base = mfa_forward(Q, K, V, PoolMode::Max);
    const MfaGrads an = mfa_backward(base, Q, K, V, G, PoolMode::Max);
    const double h = 1e-6;
    auto probe = [&](double* x, double analytic) {
      const double orig = *x;
      *x = orig + h;
      const MfaForward fp = mfa_forward(Q, K, V, PoolMode::Max);
      *x = orig - h;
      const MfaForward fm = mfa_forward(Q, K, V, PoolMode::Max);
      *x = orig;
      if ((fp.argmax.array() != base.argmax.array()).any() ||
          (fm.argmax.array() != base.argmax.array()).any())
        return;
      const double fd =
          ((fp.output.array() - fm.output.array()) * G.array()).sum() / (2.0 * h);
      const double rel =
          std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
      err_mfa = std::max(err_mfa, rel);
      ++checked;
    };
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < ds; ++j) {
        probe(&Q(i, j), an.dQ(i, j));
        probe(&V(i, j), an.dV(i, j));
        for (size_t k = 0; k < K.size(); ++k) probe(&K[k](i, j), an.dK[k](i, j));
      }
  }

  const double elapsed = seconds_since(t0);
  const bool ok = err_e2e <= 1e-4 && err_mfa <= 1e-5 && checked > 0 && elapsed < 10.0;
  report(1, "gradient-check", ok,
         "end-to-end max rel err " + fmt(err_e2e) + " (tol 1e-4), attention-only " +
             fmt(err_mfa) + " over " + std::to_string(checked) + " coords (tol 1e-5), " +
             fmt(elapsed) + "s (budget 10s)");
}

// ---- 2: agreement with independent oracles ---------------------------------------

void check_oracles() {
  // Hand-worked attention instance, frozen output.
  Mat Q(2, 2), K(2, 2), V(2, 2);
  const double r2 = std::sqrt(2.0);
  Q << r2, 0, 0, r2;
  K << 1, 0, 0, 1;
  V << 2, 3, 4, 3;
  const MfaForward fwd = mfa_forward(Q, {K}, V, PoolMode::Max);
  const double worked_err = std::max(std::abs(fwd.output(0, 0) - 2.5378828427399902),
                                     std::abs(fwd.output(0, 1) - 3.0));
  double brute_err = (fwd.output - oracle::brute_mfa(Q, {K}, V, false)).cwiseAbs().maxCoeff();
  Rng rng(2000);
  for (int t = 0; t < 50; ++t) {
    const int M = 1 + static_cast<int>(rng.uniform_int(4));
    const int ds = 1 + static_cast<int>(rng.uniform_int(4));
    const int n = 1 + static_cast<int>(rng.uniform_int(3));
    Mat q = random_mat(rng, M, ds), v = random_mat(rng, M, ds);
    std::vector<Mat> keys;
    for (int k = 0; k < n; ++k) keys.push_back(random_mat(rng, M, ds));
    for (bool avg : {false, true}) {
      const Mat got =
          mfa_forward(q, keys, v, avg ? PoolMode::Avg : PoolMode::Max).output;
      brute_err =
          std::max(brute_err, (got - oracle::brute_mfa(q, keys, v, avg)).cwiseAbs().maxCoeff());
    }
  }

  // Sparse propagation against a dense normalized-adjacency matrix power.
  double prop_err = 0;
  for (int t = 0; t < 50; ++t) {
    const int U = 2 + static_cast<int>(rng.uniform_int(4));
    const int I = 2 + static_cast<int>(rng.uniform_int(4));  // U + I <= 10
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < U; ++u)
      for (int i = 0; i < I; ++i)
        if (rng.uniform01() < 0.5) edges.push_back({u, i});
    if (edges.empty()) edges.push_back({0, 0});
    DataSplit split;
    for (const auto& [u, i] : edges) split.train.push_back({u, i});
    const InteractionGraph graph = build_graph(split, U, I);
    const Mat xu = random_mat(rng, U, 3), xi = random_mat(rng, I, 3);
    for (int L = 1; L <= 3; ++L)
      for (bool inc0 : {false, true}) {
        const PropagatedEmbeddings got = propagate(graph, xu, xi, L, inc0);
        const auto [du, di] = oracle::dense_propagate(edges, xu, xi, L, inc0);
        prop_err = std::max(prop_err, (got.users - du).cwiseAbs().maxCoeff());
        prop_err = std::max(prop_err, (got.items - di).cwiseAbs().maxCoeff());
      }
  }

  const bool ok = worked_err <= 1e-10 && brute_err <= 1e-10 && prop_err <= 1e-12;
  report(2, "oracle-equivalence", ok,
         "worked attention example err " + fmt(worked_err) + ", brute-force err " +
             fmt(brute_err) + " (tol 1e-10), propagation vs dense err " + fmt(prop_err) +
             " (tol 1e-12)");
}

// ---- 3: structural attention invariants ------------------------------------------

void check_attention_invariants() {
  Rng rng(3000);
  double worst_rowsum = 0;
  bool nonneg = true, dominance = true, perm_ok = true, single_ok = true;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const int M = 1 + static_cast<int>(rng.uniform_int(4));
    const int ds = 1 + static_cast<int>(rng.uniform_int(4));
    const int n = 1 + static_cast<int>(rng.uniform_int(4));
    Mat Q = random_mat(rng, M, ds, 2.0), V = random_mat(rng, M, ds, 2.0);
    std::vector<Mat> keys;
    for (int k = 0; k < n; ++k) keys.push_back(random_mat(rng, M, ds, 2.0));
    const MfaForward fwd = mfa_forward(Q, keys, V, PoolMode::Max);

    for (const Mat& map : fwd.maps) {
      for (int r = 0; r < M; ++r) worst_rowsum = std::max(worst_rowsum, std::abs(map.row(r).sum() - 1.0));
      nonneg = nonneg && (map.array() >= 0.0).all();
    }
    for (const Mat& map : fwd.maps)
      dominance = dominance && (fwd.pooled.array() >= map.array()).all();

    // Key order must not matter for the pooled map or the output.
    std::vector<Mat> shuffled = keys;
    rng.shuffle(shuffled);
    const MfaForward fwd2 = mfa_forward(Q, shuffled, V, PoolMode::Max);
    perm_ok = perm_ok && same_bits(fwd.pooled, fwd2.pooled) && same_bits(fwd.output, fwd2.output);

    // One key: the pooled map IS the single attention map, max and mean
    // pooling coincide bit for bit, and the output is that map applied to V.
    Mat Q1 = random_mat(rng, M, ds), V1 = random_mat(rng, M, ds);
    std::vector<Mat> one = {random_mat(rng, M, ds)};
    const MfaForward fmax = mfa_forward(Q1, one, V1, PoolMode::Max);
    const MfaForward favg = mfa_forward(Q1, one, V1, PoolMode::Avg);
    const Mat plain = fmax.maps[0] * V1;
    single_ok = single_ok && same_bits(fmax.pooled, fmax.maps[0]) &&
                same_bits(fmax.output, favg.output) && same_bits(fmax.pooled, favg.pooled) &&
                same_bits(fmax.output, plain);
  }
  const bool ok = worst_rowsum <= 1e-12 && nonneg && dominance && perm_ok && single_ok;
  report(3, "attention-invariants", ok,
         std::to_string(trials) + " random instances; max |row sum - 1| = " + fmt(worst_rowsum) +
             " (tol 1e-12), nonneg " + (nonneg ? "yes" : "NO") + ", pooled dominance " +
             (dominance ? "yes" : "NO") + ", key-order invariance " + (perm_ok ? "yes" : "NO") +
             ", single-key reduction " + (single_ok ? "yes" : "NO"));
}

// ---- 4..6: planted-preference benchmark ------------------------------------------

// Synthetic corpus where every user cares about factor 0 only. The profile
// text for factor 0 then carries the whole preference; the remaining factors
// carry item-specific filler.
struct Benchmark {
  SynthResult syn;
  DatasetBundle bundle;
  FactorSet factors = FactorSet::restaurant_default();
  ResponseCache cache;
  ExperimentEnv env;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<SeedRun> full, nomfa;
  double elapsed = 0;

  Benchmark() {
    const auto t0 = std::chrono::steady_clock::now();
    SynthConfig sc;
    sc.num_users = 200;
    sc.num_items = 300;
    sc.dominant_weights = {1, 0, 0, 0, 0, 0, 0};
    sc.interactions_per_user = 14.0;
    sc.interaction_noise = 0.1;
    sc.filler_prob = 0.6;
    sc.terms_per_factor = 6;
    sc.min_interactions = 2;
    syn = generate_synthetic(sc, factors, 4242);
    bundle = prepare_dataset(syn.reviews, /*k_core=*/3, SplitRatios{3, 1, 1}, 4242);

    env.data = &bundle;
    env.factors = factors;
    env.encoder.dim = 32;
    env.profile_opts.n_max_reviews = 100;
    env.profile_opts.seed = 4242;
    env.train.learning_rate = 3e-3;
    env.train.batch_size = 1024;
    env.train.l2_lambda = 1e-5;
    env.train.n_keys = 2;
    env.train.layers = 2;
    env.train.d_g = 32;
    env.train.d_star = 32;
    env.train.max_epochs = 40;
    env.train.patience = 4;
    env.train.eval_interval = 2;
    env.train.eval_key_cap = 10;
    env.config_hash = "acceptance";
    env.cache = &cache;

    VariantSpec full_spec;
    VariantSpec nomfa_spec;
    nomfa_spec.kind = VariantSpec::Kind::NoMfaMlp;
    for (uint64_t s : seeds) full.push_back(run_variant_seed(env, full_spec, s));
    for (uint64_t s : seeds) nomfa.push_back(run_variant_seed(env, nomfa_spec, s));
    elapsed = seconds_since(t0);
  }

  std::vector<double> recalls20(const std::vector<SeedRun>& runs) const {
    std::vector<double> out;
    for (const SeedRun& r : runs) out.push_back(r.test.at("recall", 20));
    return out;
  }
};

void check_synthetic_efficacy(const Benchmark& bench, double total_elapsed) {
  const std::vector<double> f20 = bench.recalls20(bench.full);
  const std::vector<double> n20 = bench.recalls20(bench.nomfa);
  const TTestResult tt = paired_t_test(f20, n20);
  std::vector<double> rel;
  for (size_t k = 0; k < f20.size(); ++k)
    rel.push_back((f20[k] - n20[k]) / std::max(n20[k], 1e-12));
  const double mean_rel = mean_of(rel);
  const bool ok = tt.p < 0.05 && mean_rel >= 0.05 && total_elapsed < 600.0;
  report(4, "synthetic-efficacy", ok,
         "recall@20 attention " + fmt(mean_of(f20)) + " vs mlp head " + fmt(mean_of(n20)) +
             ", mean rel improvement " + fmt(100 * mean_rel) + "% (need >= 5%), paired-t p = " +
             fmt(tt.p) + " (need < 0.05), 5 seeds, " + fmt(total_elapsed) +
             "s battery (budget 600s)");
}

void check_factor_masking(const Benchmark& bench) {
  int wins = 0;
  const int M = bench.factors.size();
  std::vector<double> planted_drops, worst_other_drops;
  for (const SeedRun& run : bench.full) {
    const double base = run.test.at("recall", 20);
    double drop0 = 0, worst_other = -1e300;
    for (int f = 0; f < M; ++f) {
      const EvalResult masked = evaluate_masked(bench.env, run.params, run.embeddings, f);
      const double drop = base - masked.at("recall", 20);
      if (f == 0)
        drop0 = drop;
      else
        worst_other = std::max(worst_other, drop);
    }
    planted_drops.push_back(drop0);
    worst_other_drops.push_back(worst_other);
    if (drop0 > worst_other) ++wins;
  }
  const bool ok = wins >= 4;
  report(5, "factor-masking", ok,
         "masking the planted factor costs more recall@20 than any unplanted factor in " +
             std::to_string(wins) + "/5 seeds (need >= 4); mean drop " +
             fmt(mean_of(planted_drops)) + " vs worst other " + fmt(mean_of(worst_other_drops)));
}

void check_noise_monotonicity(const Benchmark& bench) {
  const double m0 = mean_of(bench.recalls20(bench.full));
  std::vector<double> means = {m0};
  for (double ratio : {0.5, 1.0}) {
    VariantSpec noisy;
    noisy.kind = VariantSpec::Kind::Noise;
    noisy.noise_ratio = ratio;
    std::vector<double> vals;
    for (uint64_t s : bench.seeds)
      vals.push_back(run_variant_seed(bench.env, noisy, s).test.at("recall", 20));
    means.push_back(mean_of(vals));
  }
  const bool ok = means[0] + 1e-12 >= means[1] && means[1] + 1e-12 >= means[2];
  report(6, "noise-monotonicity", ok,
         "mean recall@20 at profile noise {0, 0.5, 1.0} = {" + fmt(means[0]) + ", " +
             fmt(means[1]) + ", " + fmt(means[2]) + "}, non-increasing " + (ok ? "yes" : "NO"));
}

// ---- 7: metric unit values -------------------------------------------------------

void check_metric_units() {
  const double rec = recall_at_k({4, 1, 7, 3}, {1, 3, 5}, 2);  // one of three hit
  const double nd1 = ndcg_at_k({7, 1, 9}, {1}, 3);             // single hit at rank 2
  const double nd2 = ndcg_at_k({1, 5, 2}, {1, 2}, 3);          // hits at ranks 1 and 3
  const double e_rec = std::abs(rec - 1.0 / 3.0);
  const double e_nd1 = std::abs(nd1 - 0.6309297535714575);  // 1/log2(3)
  const double e_nd2 = std::abs(nd2 - 0.9197207253052194);  // 1.5 / (1 + 1/log2(3))

  const TTestResult tt = paired_t_test({1.0, 2.0, 3.0}, {0.5, 1.0, 1.5});
  const double p_ref = 1.0 - std::sqrt(6.0 / 7.0);  // closed form at t = 2*sqrt(3), df 2
  const double e_t = std::abs(tt.t - 2.0 * std::sqrt(3.0));
  const double e_p = std::abs(tt.p - p_ref);

  const bool ok =
      e_rec <= 1e-6 && e_nd1 <= 1e-6 && e_nd2 <= 1e-6 && e_t <= 1e-9 && tt.df == 2 && e_p <= 1e-3;
  report(7, "metric-units", ok,
         "recall err " + fmt(e_rec) + ", ndcg errs " + fmt(e_nd1) + "/" + fmt(e_nd2) +
             " (tol 1e-6); paired-t p = " + fmt(tt.p) + " vs reference " + fmt(p_ref) +
             " (tol 1e-3), df " + std::to_string(tt.df));
}

// ---- 8: byte-identical reruns through the CLI ------------------------------------

std::map<std::string, std::string> slurp_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file())
      out[entry.path().filename().string()] = read_text_file(entry.path().string());
  return out;
}

void check_reproducibility() {
  std::string cli;
  if (const char* env = std::getenv("REFORM_CLI")) cli = env;
  if (cli.empty())
    for (const char* cand : {"./reform", "build/reform", "tools/reform"})
      if (fs::exists(cand)) {
        cli = cand;
        break;
      }
  if (cli.empty() || !fs::exists(cli)) {
    report(8, "reproducibility", false, "reform binary not found; set REFORM_CLI");
    return;
  }

  const fs::path root = fs::temp_directory_path() / "reform_acceptance_rerun";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg_path = root / "run.conf";
  const fs::path out = root / "out";
  write_text_file(cfg_path.string(),
                  "[dataset]\n"
                  "k_core = 2\n"
                  "split = [3, 1, 1]\n\n"
                  "[synth]\n"
                  "users = 40\n"
                  "items = 60\n"
                  "interactions_per_user = 8\n"
                  "interaction_noise = 0.1\n"
                  "min_interactions = 2\n\n"
                  "[train]\n"
                  "total_dim = 16\n"
                  "layers = 1\n"
                  "n_keys = 1\n"
                  "batch_size = 512\n"
                  "learning_rate = 0.005\n"
                  "max_epochs = 6\n"
                  "patience = 2\n"
                  "eval_interval = 2\n"
                  "eval_key_cap = 5\n\n"
                  "[encoder]\n"
                  "kind = \"hash_mock\"\n"
                  "dim = 16\n\n"
                  "[run]\n"
                  "seed = 11\n"
                  "deterministic = true\n\n"
                  "[eval]\n"
                  "ks = [10, 20]\n"
                  "seeds = [1, 2]\n\n"
                  "[ablate]\n"
                  "variants = [\"full\", \"no_mfa_mlp\"]\n");

  // Identical invocation twice into the same directory; the second run must
  // rebuild every artifact byte for byte.
  auto run_once = [&](const char* tag) -> bool {
    fs::remove_all(out);
    const std::string log = (root / (std::string("log_") + tag + ".txt")).string();
    std::string cmd = "\"" + cli + "\" synth -c \"" + cfg_path.string() + "\" --out \"" +
                      out.string() + "\" --deterministic -q > " + log + " 2>&1";
    if (std::system(cmd.c_str()) != 0) return false;
    cmd = "\"" + cli + "\" ablate -c \"" + cfg_path.string() + "\" --out \"" + out.string() +
          "\" --deterministic -q >> " + log + " 2>&1";
    return std::system(cmd.c_str()) == 0;
  };

  if (!run_once("a")) {
    report(8, "reproducibility", false,
           "first CLI run failed; see " + (root / "log_a.txt").string());
    return;
  }
  const auto first = slurp_dir(out / "ablate");
  if (!run_once("b")) {
    report(8, "reproducibility", false,
           "second CLI run failed; see " + (root / "log_b.txt").string());
    return;
  }
  const auto second = slurp_dir(out / "ablate");

  // Training logs carry wall-clock timings; everything else must match.
  int compared = 0, mismatched = 0;
  bool same_names = true;
  for (const auto& [name, bytes] : first) {
    if (name.rfind("train_", 0) == 0) continue;
    auto it = second.find(name);
    if (it == second.end()) {
      same_names = false;
      continue;
    }
    ++compared;
    if (it->second != bytes) ++mismatched;
  }
  const bool has_csv = first.count("metrics.csv") && second.count("metrics.csv");
  bool has_ckpt = false;
  for (const auto& [name, bytes] : first)
    if (name.size() > 5 && name.substr(name.size() - 5) == ".ckpt") has_ckpt = true;
  const bool ok = same_names && has_csv && has_ckpt && compared > 0 && mismatched == 0 &&
                  first.size() == second.size();
  report(8, "reproducibility", ok,
         "two identical --deterministic CLI runs: " + std::to_string(compared) +
             " artifacts compared (metrics csv + checkpoints + summary), " +
             std::to_string(mismatched) + " mismatched");
}

// ---- 9: profile pipeline contract -------------------------------------------------

class CountingBackend : public LlmBackend {
 public:
  CountingBackend(const FactorSet& factors, int top_words) : inner_(factors, top_words) {}
  std::string complete(const std::string& prompt) override {
    ++calls_;
    ++counts_[prompt];
    return inner_.complete(prompt);
  }
  std::string name() const override { return "counting-mock"; }
  const std::map<std::string, int>& counts() const { return counts_; }

 private:
  MockLlmBackend inner_;
  std::map<std::string, int> counts_;
};

void check_profile_pipeline() {
  const FactorSet factors = FactorSet::restaurant_default();

  // Deterministic generation and cache discipline on a small corpus.
  SynthConfig sc;
  sc.num_users = 25;
  sc.num_items = 40;
  sc.interactions_per_user = 6.0;
  sc.min_interactions = 2;
  const SynthResult syn = generate_synthetic(sc, factors, 99);
  const DatasetBundle bundle = prepare_dataset(syn.reviews, 2, SplitRatios{3, 1, 1}, 99);
  ProfileGenOptions opts;
  opts.n_max_reviews = 50;
  opts.seed = 7;

  const fs::path dir = fs::temp_directory_path() / "reform_acceptance_profiles";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run_jsonl = [&](LlmBackend& backend, ResponseCache& cache, const std::string& path) {
    const ProfileStore store = generate_profiles(bundle.reviews, bundle.ids, bundle.split,
                                                 factors, backend, cache, opts);
    write_profiles_jsonl(path, store, factors);
    return read_text_file(path);
  };

  CountingBackend counting(factors, 3);
  ResponseCache cache_a;
  const std::string bytes1 = run_jsonl(counting, cache_a, (dir / "run1.jsonl").string());
  const int64_t calls_after_first = counting.calls();
  const std::string bytes2 = run_jsonl(counting, cache_a, (dir / "run2.jsonl").string());
  int max_per_prompt = 0;
  for (const auto& [prompt, count] : counting.counts())
    max_per_prompt = std::max(max_per_prompt, count);
  const bool cache_ok = counting.calls() == calls_after_first &&  // second pass fully cached
                        max_per_prompt == 1 &&
                        counting.calls() == static_cast<int64_t>(counting.counts().size());

  MockLlmBackend fresh(factors, 3);
  ResponseCache cache_b;
  const std::string bytes3 = run_jsonl(fresh, cache_b, (dir / "run3.jsonl").string());
  const bool deterministic = !bytes1.empty() && bytes1 == bytes2 && bytes1 == bytes3;

  // Noise injection edge ratios on random fixtures.
  Rng rng(909);
  bool identity_ok = true, replaced_ok = true;
  const int fixtures = 100;
  for (int f = 0; f < fixtures; ++f) {
    const int n_own = 1 + static_cast<int>(rng.uniform_int(8));
    std::vector<Review> own, pool;
    std::set<int64_t> own_ids;
    for (int k = 0; k < n_own; ++k) {
      Review r;
      r.id = 1000 + f * 100 + k;
      r.user_id = "u0";
      r.item_id = "i" + std::to_string(k);
      r.text = "own review " + std::to_string(f) + "." + std::to_string(k);
      own.push_back(r);
      own_ids.insert(r.id);
    }
    for (int k = 0; k < 20; ++k) {
      Review r;
      r.id = 500000 + f * 100 + k;
      r.user_id = "u9";
      r.item_id = "i" + std::to_string(k);
      r.text = "pool review " + std::to_string(f) + "." + std::to_string(k);
      pool.push_back(r);
    }
    const auto same = inject_noise(own, pool, 0.0, static_cast<uint64_t>(f));
    identity_ok = identity_ok && same.size() == own.size();
    for (size_t k = 0; identity_ok && k < same.size(); ++k)
      identity_ok = same[k].id == own[k].id && same[k].text == own[k].text;
    const auto swapped = inject_noise(own, pool, 1.0, static_cast<uint64_t>(f));
    replaced_ok = replaced_ok && swapped.size() == own.size();
    for (const Review& r : swapped) replaced_ok = replaced_ok && !own_ids.count(r.id);
  }

  const bool ok = deterministic && cache_ok && identity_ok && replaced_ok;
  report(9, "profile-pipeline", ok,
         std::string("mock profile jsonl deterministic across fresh runs ") +
             (deterministic ? "yes" : "NO") + "; " + std::to_string(counting.calls()) +
             " backend calls for " + std::to_string(counting.counts().size()) +
             " unique prompts across two passes; noise ratio 0 identity and ratio 1 full "
             "replacement on " +
             std::to_string(fixtures) + " fixtures " +
             (identity_ok && replaced_ok ? "yes" : "NO"));
}

}  // namespace

int main() {
  set_log_quiet(true);
  criterion(1, "gradient-check", [] { check_gradients(); });
  criterion(2, "oracle-equivalence", [] { check_oracles(); });
  criterion(3, "attention-invariants", [] { check_attention_invariants(); });

  try {
    const auto t0 = std::chrono::steady_clock::now();
    Benchmark bench;
    criterion(4, "synthetic-efficacy",
              [&] { check_synthetic_efficacy(bench, seconds_since(t0)); });
    criterion(5, "factor-masking", [&] { check_factor_masking(bench); });
    criterion(6, "noise-monotonicity", [&] { check_noise_monotonicity(bench); });
  } catch (const std::exception& e) {
    report(4, "synthetic-efficacy", false, std::string("benchmark setup failed: ") + e.what());
    report(5, "factor-masking", false, "benchmark setup failed");
    report(6, "noise-monotonicity", false, "benchmark setup failed");
  }

  criterion(7, "metric-units", [] { check_metric_units(); });
  criterion(8, "reproducibility", [] { check_reproducibility(); });
  criterion(9, "profile-pipeline", [] { check_profile_pipeline(); });

  std::printf("acceptance: %d/9 passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
