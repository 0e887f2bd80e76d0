#include "reform/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace reform {

// ---- inference state ---------------------------------------------------------

EvalContext build_eval_context(const ModelParams& params, const InteractionGraph& graph,
                               const EmbeddingStore& profiles, const TrainConfig& cfg) {
  EvalContext ctx;
  PropagatedEmbeddings prop = propagate(graph, params.user_base, params.item_base, cfg.layers,
                                        cfg.include_layer0);
  ctx.users_g = std::move(prop.users);
  ctx.items_g = std::move(prop.items);

  ctx.users_a.setZero(graph.num_users, cfg.d_star);
  ctx.items_a.setZero(graph.num_items, cfg.d_star);

  auto embed_user = [&](size_t uu) {
    const int u = static_cast<int>(uu);
    if (params.use_mlp) {
      const Vec mean = factor_average(profiles.users[uu]);
      ctx.users_a.row(u) =
          (params.mlp_W2.transpose() * (params.mlp_W1.transpose() * mean).cwiseMax(0.0))
              .transpose();
      return;
    }
    if (graph.user_degree[uu] == 0) return;
    auto keys = eval_keys(graph, EntityKind::User, u, cfg.eval_key_cap);
    std::vector<const Mat*> kp;
    kp.reserve(keys.size());
    for (int32_t i : keys) kp.push_back(&profiles.items[static_cast<size_t>(i)]);
    ctx.users_a.row(u) =
        mfa_embed(Direction::UserSide, profiles.users[uu], kp, params.proj, cfg.pool)
            .embedding.transpose();
  };
  auto embed_item = [&](size_t ii) {
    const int i = static_cast<int>(ii);
    if (params.use_mlp) {
      const Vec mean = factor_average(profiles.items[ii]);
      ctx.items_a.row(i) =
          (params.mlp_W2.transpose() * (params.mlp_W1.transpose() * mean).cwiseMax(0.0))
              .transpose();
      return;
    }
    if (graph.item_degree[ii] == 0) return;
    auto keys = eval_keys(graph, EntityKind::Item, i, cfg.eval_key_cap);
    std::vector<const Mat*> kp;
    kp.reserve(keys.size());
    for (int32_t u : keys) kp.push_back(&profiles.users[static_cast<size_t>(u)]);
    ctx.items_a.row(i) =
        mfa_embed(Direction::ItemSide, profiles.items[ii], kp, params.proj, cfg.pool)
            .embedding.transpose();
  };
  parallel_for(static_cast<size_t>(graph.num_users), cfg.threads, embed_user);
  parallel_for(static_cast<size_t>(graph.num_items), cfg.threads, embed_item);
  return ctx;
}

// ---- ranking ------------------------------------------------------------------

namespace {

Vec score_all_items(const EvalContext& ctx, int user) {
  return ctx.items_g * ctx.users_g.row(user).transpose() +
         ctx.items_a * ctx.users_a.row(user).transpose();
}

}  // namespace

std::vector<int> rank_all(const EvalContext& ctx, const InteractionGraph& graph, int user) {
  const Vec scores = score_all_items(ctx, user);
  auto train_items = graph.items_of(user);

  std::vector<int> candidates;
  candidates.reserve(static_cast<size_t>(graph.num_items));
  for (int i = 0; i < graph.num_items; ++i)
    if (!std::binary_search(train_items.begin(), train_items.end(), i)) candidates.push_back(i);

  std::sort(candidates.begin(), candidates.end(), [&scores](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return candidates;
}

// ---- metrics --------------------------------------------------------------------

double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                   int K) {
  if (K < 1) throw ConfigError("recall_at_k: K must be >= 1");
  if (relevant.empty()) return 0.0;
  const int top = std::min<int>(K, static_cast<int>(ranked.size()));
  int hits = 0;
  for (int p = 0; p < top; ++p)
    if (relevant.count(ranked[static_cast<size_t>(p)])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                 int K) {
  if (K < 1) throw ConfigError("ndcg_at_k: K must be >= 1");
  if (relevant.empty()) return 0.0;
  const int top = std::min<int>(K, static_cast<int>(ranked.size()));
  double dcg = 0;
  for (int p = 0; p < top; ++p)
    if (relevant.count(ranked[static_cast<size_t>(p)]))
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  const int ideal = std::min<int>(K, static_cast<int>(relevant.size()));
  double idcg = 0;
  for (int p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

double EvalResult::at(const std::string& metric, int K) const {
  auto it = values.find({metric, K});
  if (it == values.end())
    throw ConfigError("metric " + metric + "@" + std::to_string(K) + " not computed");
  return it->second;
}

EvalResult evaluate_model(const ModelParams& params, const InteractionGraph& graph,
                          const EmbeddingStore& profiles, const DataSplit& split, SplitPart part,
                          const TrainConfig& cfg, const std::vector<int>& Ks) {
  if (Ks.empty()) throw ConfigError("evaluate_model: no K values");
  EvalContext ctx = build_eval_context(params, graph, profiles, cfg);

  const auto& interactions = part == SplitPart::Val ? split.val : split.test;
  std::vector<std::unordered_set<int>> relevant(static_cast<size_t>(graph.num_users));
  for (const auto& x : interactions) relevant[static_cast<size_t>(x.user)].insert(x.item);

  const int maxK = *std::max_element(Ks.begin(), Ks.end());

  struct UserScore {
    std::vector<double> recall, ndcg;
  };
  std::vector<UserScore> per_user(static_cast<size_t>(graph.num_users));
  std::vector<char> counted(static_cast<size_t>(graph.num_users), 0);

  parallel_for(static_cast<size_t>(graph.num_users), cfg.threads, [&](size_t uu) {
    const int u = static_cast<int>(uu);
    if (relevant[uu].empty()) return;

    // Partial selection: metrics only inspect the top maxK candidates.
    const Vec scores = score_all_items(ctx, u);
    auto train_items = graph.items_of(u);
    std::vector<int> candidates;
    candidates.reserve(static_cast<size_t>(graph.num_items));
    for (int i = 0; i < graph.num_items; ++i)
      if (!std::binary_search(train_items.begin(), train_items.end(), i)) candidates.push_back(i);
    auto better = [&scores](int a, int b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    };
    const size_t top = std::min<size_t>(static_cast<size_t>(maxK), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(top),
                      candidates.end(), better);
    candidates.resize(top);

    counted[uu] = 1;
    for (int K : Ks) {
      per_user[uu].recall.push_back(recall_at_k(candidates, relevant[uu], K));
      per_user[uu].ndcg.push_back(ndcg_at_k(candidates, relevant[uu], K));
    }
  });

  EvalResult out;
  std::vector<double> recall_sum(Ks.size(), 0), ndcg_sum(Ks.size(), 0);
  for (size_t uu = 0; uu < per_user.size(); ++uu) {
    if (!counted[uu]) continue;
    ++out.users_evaluated;
    for (size_t k = 0; k < Ks.size(); ++k) {
      recall_sum[k] += per_user[uu].recall[k];
      ndcg_sum[k] += per_user[uu].ndcg[k];
    }
  }
  if (out.users_evaluated == 0)
    throw ConfigError("evaluate_model: no user has relevance data in the requested split");
  for (size_t k = 0; k < Ks.size(); ++k) {
    out.values[{"recall", Ks[k]}] = recall_sum[k] / out.users_evaluated;
    out.values[{"ndcg", Ks[k]}] = ndcg_sum[k] / out.users_evaluated;
  }
  return out;
}

double validation_recall20(const ModelParams& params, const InteractionGraph& graph,
                           const EmbeddingStore& profiles, const DataSplit& split,
                           const TrainConfig& cfg) {
  return evaluate_model(params, graph, profiles, split, SplitPart::Val, cfg, {20})
      .at("recall", 20);
}

// ---- t-test ----------------------------------------------------------------------

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw ConfigError("incomplete beta requires a, b > 0");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("paired_t_test: unequal sample sizes");
  const size_t n = a.size();
  if (n < 2) throw ConfigError("paired_t_test: need at least two pairs");

  std::vector<double> diff(n);
  for (size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double var = ss / static_cast<double>(n - 1);

  TTestResult r;
  r.df = static_cast<int>(n) - 1;
  if (var == 0.0) {
    r.degenerate = true;
    r.p = mean != 0.0 ? 0.0 : 1.0;
    r.t = mean != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    log_warn("paired_t_test: zero-variance differences; p set to " + format_double(r.p));
    return r;
  }
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  const double x = static_cast<double>(r.df) / (static_cast<double>(r.df) + r.t * r.t);
  r.p = regularized_incomplete_beta(static_cast<double>(r.df) / 2.0, 0.5, x);
  return r;
}

// ---- artifacts ----------------------------------------------------------------------

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::string out = "run_id,variant,seed,metric,K,value\n";
  for (const auto& r : rows) {
    out += r.run_id + "," + r.variant + "," + std::to_string(r.seed) + "," + r.metric + "," +
           std::to_string(r.K) + "," + format_double(r.value) + "\n";
  }
  write_text_file(path, out);
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::string out = "x,metric,value\n";
  for (const auto& r : rows)
    out += r.x + "," + r.metric + "," + format_double(r.value) + "\n";
  write_text_file(path, out);
}

}  // namespace reform
