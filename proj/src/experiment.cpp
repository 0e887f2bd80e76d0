#include "reform/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace reform {

using nlohmann::ordered_json;

DatasetBundle prepare_dataset(std::vector<Review> reviews, int k_core, SplitRatios ratios,
                              uint64_t seed) {
  DatasetBundle b;
  b.reviews = k_core_filter(reviews, k_core);
  if (b.reviews.empty())
    throw ConfigError("k-core filtering with k=" + std::to_string(k_core) +
                      " removed every interaction; lower dataset.k_core");
  b.ids = build_id_map(b.reviews);
  b.split = split_interactions(b.reviews, b.ids, ratios, seed);
  b.graph = build_graph(b.split, b.ids.num_users(), b.ids.num_items());
  return b;
}

// ---- variants -----------------------------------------------------------------

std::string VariantSpec::name() const {
  switch (kind) {
    case Kind::Full: return "full";
    case Kind::AvgPool: return "avg_pool";
    case Kind::NoMfaMlp: return "no_mfa_mlp";
    case Kind::MaskFactor: return "mask_factor:" + factor_name;
    case Kind::Noise: return "noise:" + format_double(noise_ratio);
  }
  return "?";
}

void VariantSpec::apply(TrainConfig* cfg) const {
  if (kind == Kind::AvgPool) cfg->pool = PoolMode::Avg;
  if (kind == Kind::NoMfaMlp) cfg->use_mlp = true;
}

VariantSpec VariantSpec::parse(const std::string& text, const FactorSet& factors,
                               const std::string& factor_override, double noise_override,
                               bool mask_at_train) {
  VariantSpec v;
  v.mask_at_train = mask_at_train;
  std::string head = text, suffix;
  if (size_t c = text.find(':'); c != std::string::npos) {
    head = text.substr(0, c);
    suffix = text.substr(c + 1);
  }
  if (head == "full") {
    v.kind = Kind::Full;
  } else if (head == "avg_pool") {
    v.kind = Kind::AvgPool;
  } else if (head == "no_mfa_mlp") {
    v.kind = Kind::NoMfaMlp;
  } else if (head == "mask_factor") {
    v.kind = Kind::MaskFactor;
    const std::string fname = factor_override.empty() ? suffix : factor_override;
    if (fname.empty())
      throw ConfigError("variant mask_factor needs a factor name (mask_factor:NAME or --factor)");
    int idx = factors.index_of(fname);
    if (idx < 0) throw ConfigError("unknown factor '" + fname + "'");
    v.factor = idx;
    v.factor_name = factors.names[idx];
  } else if (head == "noise") {
    v.kind = Kind::Noise;
    if (noise_override >= 0) {
      v.noise_ratio = noise_override;
    } else if (!suffix.empty()) {
      try {
        v.noise_ratio = std::stod(suffix);
      } catch (const std::exception&) {
        throw ConfigError("variant noise: bad ratio '" + suffix + "'");
      }
    } else {
      throw ConfigError("variant noise needs a ratio (noise:R or --noise-ratio)");
    }
    if (v.noise_ratio < 0.0 || v.noise_ratio > 1.0)
      throw ConfigError("noise ratio must lie in [0, 1]");
  } else {
    throw ConfigError("unknown variant '" + text +
                      "' (expected full, avg_pool, no_mfa_mlp, mask_factor, noise)");
  }
  return v;
}

// ---- per-run pieces -------------------------------------------------------------

EmbeddingStore build_profile_embeddings(const ExperimentEnv& env, double noise_ratio,
                                        uint64_t run_seed, ProfileStore* profiles_out,
                                        ProfileRunStats* stats) {
  auto backend = make_backend(env.llm, env.factors);
  ProfileGenOptions opts = env.profile_opts;
  opts.noise_ratio = noise_ratio;
  opts.seed = derive_seed(env.profile_opts.seed, "profiles", run_seed);
  ResponseCache local_cache(env.llm.cache_dir);
  ResponseCache& cache = env.cache ? *env.cache : local_cache;
  ProfileStore profiles = generate_profiles(env.data->reviews, env.data->ids, env.data->split,
                                            env.factors, *backend, cache, opts, stats);
  EmbeddingStore emb = encode_all(env.encoder, profiles);
  if (profiles_out) *profiles_out = std::move(profiles);
  return emb;
}

SeedRun run_variant_seed(const ExperimentEnv& env, const VariantSpec& variant, uint64_t seed,
                         const std::string& log_path, const std::string& checkpoint_path) {
  if (!env.data) throw ConfigError("experiment environment has no dataset");
  const DatasetBundle& data = *env.data;

  TrainConfig cfg = env.train;
  cfg.seed = seed;
  variant.apply(&cfg);
  cfg.validate();

  const double ratio =
      variant.kind == VariantSpec::Kind::Noise ? variant.noise_ratio : env.profile_opts.noise_ratio;

  SeedRun run;
  run.seed = seed;
  run.embeddings = build_profile_embeddings(env, ratio, seed);

  // Masking applies to every forward pass when mask_at_train, otherwise only
  // to final scoring.
  const bool masking = variant.kind == VariantSpec::Kind::MaskFactor;
  EmbeddingStore masked;
  if (masking) masked = mask_factor_rows(run.embeddings, variant.factor);
  const EmbeddingStore& train_store =
      masking && variant.mask_at_train ? masked : run.embeddings;
  const EmbeddingStore& test_store = masking ? masked : run.embeddings;

  run.params = ModelParams::init(data.ids.num_users(), data.ids.num_items(),
                                 run.embeddings.d, cfg);
  AdamState adam;
  adam.init_like(run.params);

  auto validate = [&](const ModelParams& p) {
    return validation_recall20(p, data.graph, train_store, data.split, cfg);
  };
  run.fit = fit(run.params, adam, data.graph, train_store, data.split, cfg, validate, log_path);

  run.test = evaluate_model(run.params, data.graph, test_store, data.split, SplitPart::Test, cfg,
                            env.Ks);

  if (!checkpoint_path.empty()) {
    CheckpointMeta meta;
    meta.variant = variant.name();
    meta.config_hash = env.config_hash;
    meta.epoch = run.fit.best_epoch;
    meta.metric = run.fit.best_metric;
    save_checkpoint(checkpoint_path, run.params, meta);
  }
  return run;
}

EvalResult evaluate_masked(const ExperimentEnv& env, const ModelParams& params,
                           const EmbeddingStore& embeddings, int factor) {
  TrainConfig cfg = env.train;
  cfg.use_mlp = params.use_mlp;
  EmbeddingStore masked = mask_factor_rows(embeddings, factor);
  return evaluate_model(params, env.data->graph, masked, env.data->split, SplitPart::Test, cfg,
                        env.Ks);
}

std::string make_run_id(const std::string& config_hash, const std::string& variant,
                        uint64_t seed) {
  return config_hash + "-" + variant + "-s" + std::to_string(seed);
}

// ---- aggregation ----------------------------------------------------------------

namespace {

std::string file_token(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

AblationResult run_ablation(const ExperimentEnv& env, const std::vector<VariantSpec>& variants,
                            const std::vector<uint64_t>& seeds,
                            const std::string& artifact_dir) {
  if (!artifact_dir.empty()) std::filesystem::create_directories(artifact_dir);

  AblationResult out;
  for (const VariantSpec& variant : variants) {
    const std::string vname = variant.name();
    const std::string vtoken = file_token(vname);
    for (uint64_t seed : seeds) {
      std::string log_path, ckpt_path;
      if (!artifact_dir.empty()) {
        log_path = artifact_dir + "/train_" + vtoken + "_s" + std::to_string(seed) + ".jsonl";
        ckpt_path = artifact_dir + "/model_" + vtoken + "_s" + std::to_string(seed) + ".ckpt";
      }
      SeedRun run = run_variant_seed(env, variant, seed, log_path, ckpt_path);
      log_info("ablate: " + vname + " seed " + std::to_string(seed) + " recall@20 " +
               format_double(run.test.at("recall", 20)));
      for (const auto& [key, value] : run.test.values) {
        out.rows.push_back({make_run_id(env.config_hash, vname, seed), vname, seed, key.first,
                            key.second, value});
        out.per_seed[vname][key].push_back(value);
      }
    }
  }

  ordered_json summary;
  summary["config_hash"] = env.config_hash;
  summary["seeds"] = seeds;
  ordered_json jvariants = ordered_json::object();
  for (const VariantSpec& variant : variants) {
    const std::string vname = variant.name();
    ordered_json jv = ordered_json::object();
    if (variant.kind == VariantSpec::Kind::MaskFactor) jv["masked_factor"] = variant.factor_name;
    if (variant.kind == VariantSpec::Kind::Noise) jv["noise_ratio"] = variant.noise_ratio;
    for (const auto& [key, values] : out.per_seed[vname]) {
      const std::string label = key.first + "@" + std::to_string(key.second);
      jv[label] = {{"mean", mean_of(values)}, {"values", values}};
    }
    jvariants[vname] = std::move(jv);
  }
  summary["variants"] = std::move(jvariants);

  auto full_it = out.per_seed.find("full");
  if (full_it != out.per_seed.end() && seeds.size() >= 2) {
    ordered_json comparisons = ordered_json::object();
    const std::vector<double>& full20 = full_it->second[{"recall", 20}];
    for (const VariantSpec& variant : variants) {
      const std::string vname = variant.name();
      if (vname == "full") continue;
      const std::vector<double>& v20 = out.per_seed[vname][{"recall", 20}];
      if (v20.size() != full20.size()) continue;
      TTestResult tt = paired_t_test(full20, v20);
      const double mf = mean_of(full20), mv = mean_of(v20);
      ordered_json jc = {{"baseline", "full"}, {"metric", "recall@20"},
                         {"t", tt.t},          {"df", tt.df},
                         {"p", tt.p},          {"degenerate", tt.degenerate}};
      if (mf != 0.0) jc["mean_rel_change"] = (mv - mf) / mf;
      comparisons[vname] = std::move(jc);
    }
    summary["comparisons"] = std::move(comparisons);
  }
  out.summary = std::move(summary);

  if (!artifact_dir.empty()) {
    write_metrics_csv(artifact_dir + "/metrics.csv", out.rows);
    write_text_file(artifact_dir + "/summary.json", out.summary.dump(2) + "\n");
  }
  return out;
}

std::vector<SweepRow> sweep_n_keys(const ExperimentEnv& env, const std::vector<int>& ns,
                                   const std::vector<uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  VariantSpec full;
  for (int n : ns) {
    if (n < 1) throw ConfigError("sweep n values must be >= 1");
    ExperimentEnv env_n = env;
    env_n.train.n_keys = n;
    std::vector<double> recalls;
    for (uint64_t seed : seeds)
      recalls.push_back(run_variant_seed(env_n, full, seed).test.at("recall", 20));
    rows.push_back({std::to_string(n), "recall@20", mean_of(recalls)});
    log_info("sweep: n=" + std::to_string(n) + " recall@20 " + format_double(rows.back().value));
  }
  return rows;
}

}  // namespace reform
