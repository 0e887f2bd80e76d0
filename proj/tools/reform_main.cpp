// Command-line front end: ingest -> profile -> encode -> train -> eval, plus
// synth, ablate, and sweep. All behavior comes from a TOML-style config file;
// every flag maps onto a config key. Exit codes: 0 success, 2 bad input or
// config, 3 backend failure, 1 anything else.

#include "reform/experiment.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using namespace reform;
using nlohmann::ordered_json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  int64_t seed = -1;
  int threads = 0;
  bool deterministic = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("-c,--config", a->config_path, "config file (TOML-style sections)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", a->sets, "override a config key, e.g. --set train.layers=2")
      ->type_name("KEY=VALUE");
  cmd->add_option("--out", a->out_dir, "output directory (run.out_dir)");
  cmd->add_option("--seed", a->seed, "root seed (run.seed)");
  cmd->add_option("--threads", a->threads, "parallelism cap (run.threads)");
  cmd->add_flag("--deterministic", a->deterministic,
                "single-threaded, bit-exact artifacts (run.deterministic)");
  cmd->add_flag("-q,--quiet", a->quiet, "suppress progress logging");
}

std::string trim_copy(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

RunConfig build_config(const CommonArgs& a) {
  ConfigDoc doc =
      a.config_path.empty() ? ConfigDoc{} : ConfigDoc::parse_file(a.config_path);
  for (const std::string& kv : a.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    doc.set(trim_copy(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (!a.out_dir.empty()) doc.set("run.out_dir", a.out_dir);
  if (a.seed >= 0) doc.set("run.seed", std::to_string(a.seed));
  if (a.threads > 0) doc.set("run.threads", std::to_string(a.threads));
  if (a.deterministic) doc.set("run.deterministic", "true");
  set_log_quiet(a.quiet);
  return RunConfig::from_doc(doc);
}

std::string file_token(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

// ---- shared pipeline pieces -----------------------------------------------------

void write_ingest_artifacts(const RunConfig& rc, const DatasetBundle& b,
                            const LoadStats* stats) {
  fs::create_directories(rc.out_dir);
  write_reviews_jsonl(rc.out_dir + "/reviews.jsonl", b.reviews);
  write_id_map(rc.out_dir + "/id_map.json", b.ids);
  write_split_tsv(rc.out_dir + "/split.tsv", b.split);

  ordered_json j;
  j["config_hash"] = rc.config_hash;
  j["seed"] = rc.seed;
  if (stats) {
    j["input_lines"] = stats->total_lines;
    j["malformed"] = stats->malformed;
    j["duplicates"] = stats->duplicates;
  }
  j["reviews_kept"] = b.reviews.size();
  j["users"] = b.ids.num_users();
  j["items"] = b.ids.num_items();
  j["train"] = b.split.train.size();
  j["val"] = b.split.val.size();
  j["test"] = b.split.test.size();
  j["graph_edges"] = b.graph.num_edges();
  write_text_file(rc.out_dir + "/ingest_stats.json", j.dump(2) + "\n");

  std::cout << "ingest: " << b.ids.num_users() << " users, " << b.ids.num_items()
            << " items, " << b.split.train.size() << "/" << b.split.val.size() << "/"
            << b.split.test.size() << " train/val/test -> " << rc.out_dir << "\n";
}

DatasetBundle load_bundle(const RunConfig& rc) {
  const std::string dir = rc.out_dir;
  for (const char* f : {"/reviews.jsonl", "/id_map.json", "/split.tsv"})
    if (!fs::exists(dir + f))
      throw ConfigError("missing artifact " + dir + f + " (run `reform ingest` first)");
  DatasetBundle b;
  b.reviews = load_reviews(dir + "/reviews.jsonl", ReviewFormat::Jsonl);
  b.ids = read_id_map(dir + "/id_map.json");
  b.split = read_split_tsv(dir + "/split.tsv");
  b.graph = build_graph(b.split, b.ids.num_users(), b.ids.num_items());
  return b;
}

ProfileGenOptions profile_options(const RunConfig& rc) {
  ProfileGenOptions opts;
  opts.n_max_reviews = rc.n_max_reviews;
  opts.noise_ratio = rc.noise_ratio;
  opts.per_factor_calls = rc.per_factor_calls;
  opts.seed = rc.seed;
  return opts;
}

ExperimentEnv make_env(const RunConfig& rc, const DatasetBundle& data, ResponseCache& cache) {
  ExperimentEnv env;
  env.data = &data;
  env.factors = rc.load_factors();
  env.llm = rc.llm;
  env.encoder = rc.encoder;
  env.profile_opts = profile_options(rc);
  env.train = rc.train;
  env.Ks = rc.Ks;
  env.config_hash = rc.config_hash;
  env.cache = &cache;
  return env;
}

void write_profile_artifacts(const RunConfig& rc, const ProfileStore& profiles,
                             const FactorSet& factors, const ProfileRunStats& stats,
                             int64_t cache_hits) {
  fs::create_directories(rc.out_dir);
  write_profiles_jsonl(rc.out_dir + "/profiles.jsonl", profiles, factors);

  ordered_json j;
  j["config_hash"] = rc.config_hash;
  j["users"] = profiles.users.size();
  j["items"] = profiles.items.size();
  j["backend_calls"] = stats.backend_calls;
  j["cache_hits"] = cache_hits;
  j["prompt_chars"] = stats.prompt_chars;
  j["estimated_tokens"] = stats.prompt_chars / 4;
  write_text_file(rc.out_dir + "/profile_stats.json", j.dump(2) + "\n");

  std::cout << "profile: " << profiles.users.size() << " users + " << profiles.items.size()
            << " items, " << stats.backend_calls << " backend calls, ~"
            << stats.prompt_chars / 4 << " prompt tokens -> " << rc.out_dir
            << "/profiles.jsonl\n";
}

void generate_profile_artifacts(const RunConfig& rc, const DatasetBundle& bundle,
                                double noise_ratio, bool force_mock) {
  FactorSet factors = rc.load_factors();
  LlmBackendConfig llm = rc.llm;
  if (force_mock) llm.kind = LlmBackendKind::Mock;
  auto backend = make_backend(llm, factors);
  ResponseCache cache(llm.cache_dir);
  ProfileGenOptions opts = profile_options(rc);
  opts.noise_ratio = noise_ratio;
  ProfileRunStats stats;
  ProfileStore profiles = generate_profiles(bundle.reviews, bundle.ids, bundle.split, factors,
                                            *backend, cache, opts, &stats);
  write_profile_artifacts(rc, profiles, factors, stats, cache.hits());
}

EmbeddingStore load_store(const RunConfig& rc, const FactorSet& factors,
                          ProfileStore* profiles_out = nullptr) {
  const std::string path = rc.out_dir + "/profiles.jsonl";
  if (!fs::exists(path))
    throw ConfigError("missing artifact " + path + " (run `reform profile` first)");
  ProfileStore profiles = read_profiles_jsonl(path, factors);
  EmbeddingStore store = encode_all(rc.encoder, profiles);
  if (profiles_out) *profiles_out = std::move(profiles);
  return store;
}

void print_eval(const EvalResult& r) {
  for (const auto& [key, value] : r.values)
    std::cout << "  " << key.first << "@" << key.second << " = " << format_double(value)
              << "\n";
  std::cout << "  users evaluated: " << r.users_evaluated << "\n";
}

// ---- subcommands ------------------------------------------------------------------

void cmd_ingest(const CommonArgs& args) {
  RunConfig rc = build_config(args);
  if (rc.reviews_path.empty()) throw ConfigError("dataset.reviews is not set");
  if (!fs::exists(rc.reviews_path))
    throw ConfigError("input does not exist: " + rc.reviews_path);
  LoadStats stats;
  std::vector<Review> raw = load_reviews(rc.reviews_path, rc.review_format, &stats);
  DatasetBundle b = prepare_dataset(std::move(raw), rc.k_core, rc.ratios, rc.seed);
  write_ingest_artifacts(rc, b, &stats);
}

void cmd_profile(const CommonArgs& args, double noise_ratio) {
  RunConfig rc = build_config(args);
  if (noise_ratio >= 0) rc.noise_ratio = noise_ratio;
  if (rc.noise_ratio < 0 || rc.noise_ratio > 1)
    throw ConfigError("noise ratio must lie in [0, 1]");
  DatasetBundle bundle = load_bundle(rc);
  generate_profile_artifacts(rc, bundle, rc.noise_ratio, /*force_mock=*/false);
}

void cmd_encode(const CommonArgs& args) {
  RunConfig rc = build_config(args);
  FactorSet factors = rc.load_factors();
  EmbeddingStore store = load_store(rc, factors);
  save_embeddings(rc.out_dir + "/embeddings.bin", store);
  std::cout << "encode: " << store.num_users() << "+" << store.num_items() << " profiles, M="
            << store.M << ", d=" << store.d << " -> " << rc.out_dir << "/embeddings.bin\n";
}

void cmd_synth(const CommonArgs& args) {
  RunConfig rc = build_config(args);
  FactorSet factors = rc.load_factors();
  SynthResult sr = generate_synthetic(rc.synth, factors, rc.seed);
  fs::create_directories(rc.out_dir);
  write_ground_truth(rc.out_dir + "/ground_truth.json", sr.truth, factors);
  DatasetBundle b = prepare_dataset(sr.reviews, rc.k_core, rc.ratios, rc.seed);
  write_ingest_artifacts(rc, b, nullptr);
  generate_profile_artifacts(rc, b, rc.noise_ratio, /*force_mock=*/true);
}

void cmd_train(const CommonArgs& args, const std::string& variant_name,
               const std::string& factor_name) {
  RunConfig rc = build_config(args);
  DatasetBundle bundle = load_bundle(rc);
  FactorSet factors = rc.load_factors();
  VariantSpec variant =
      VariantSpec::parse(variant_name, factors, factor_name, -1.0, rc.mask_at_train);
  if (variant.kind == VariantSpec::Kind::Noise)
    throw ConfigError("train reads profiles from disk; run `reform profile --noise-ratio R` "
                      "and train on those instead");

  EmbeddingStore store = load_store(rc, factors);
  TrainConfig cfg = rc.train;
  cfg.seed = rc.seed;
  variant.apply(&cfg);
  cfg.validate();
  if (variant.kind == VariantSpec::Kind::MaskFactor && variant.mask_at_train)
    store = mask_factor_rows(store, variant.factor);

  ModelParams params =
      ModelParams::init(bundle.ids.num_users(), bundle.ids.num_items(), store.d, cfg);
  AdamState adam;
  adam.init_like(params);
  const std::string token = file_token(variant.name());
  const std::string log_path =
      rc.out_dir + "/train_" + token + "_s" + std::to_string(rc.seed) + ".jsonl";
  auto validate = [&](const ModelParams& p) {
    return validation_recall20(p, bundle.graph, store, bundle.split, cfg);
  };
  FitResult res = fit(params, adam, bundle.graph, store, bundle.split, cfg, validate, log_path);

  CheckpointMeta meta;
  meta.variant = variant.name();
  meta.config_hash = rc.config_hash;
  meta.epoch = res.best_epoch;
  meta.metric = res.best_metric;
  const std::string ckpt =
      rc.out_dir + "/model_" + token + "_s" + std::to_string(rc.seed) + ".ckpt";
  save_checkpoint(ckpt, params, meta);
  std::cout << "train: " << variant.name() << ", " << res.epochs_run
            << " epochs, best val recall@20 " << format_double(res.best_metric) << " at epoch "
            << res.best_epoch << " -> " << ckpt << "\n";
}

void cmd_eval(const CommonArgs& args, std::string checkpoint) {
  RunConfig rc = build_config(args);
  DatasetBundle bundle = load_bundle(rc);
  FactorSet factors = rc.load_factors();
  if (checkpoint.empty())
    checkpoint = rc.out_dir + "/model_full_s" + std::to_string(rc.seed) + ".ckpt";
  if (!fs::exists(checkpoint))
    throw ConfigError("missing checkpoint " + checkpoint + " (run `reform train` first)");

  CheckpointMeta meta;
  ModelParams params = load_checkpoint(checkpoint, &meta);
  EmbeddingStore store = load_store(rc, factors);
  VariantSpec variant = VariantSpec::parse(meta.variant, factors, "", -1.0, rc.mask_at_train);
  TrainConfig cfg = rc.train;
  cfg.seed = rc.seed;
  variant.apply(&cfg);
  cfg.use_mlp = params.use_mlp;
  if (variant.kind == VariantSpec::Kind::MaskFactor)
    store = mask_factor_rows(store, variant.factor);

  EvalResult result =
      evaluate_model(params, bundle.graph, store, bundle.split, SplitPart::Test, cfg, rc.Ks);
  std::cout << "eval: " << meta.variant << " (" << checkpoint << ")\n";
  print_eval(result);

  std::vector<MetricRow> rows;
  for (const auto& [key, value] : result.values)
    rows.push_back({make_run_id(rc.config_hash, meta.variant, rc.seed), meta.variant, rc.seed,
                    key.first, key.second, value});
  write_metrics_csv(rc.out_dir + "/eval_metrics.csv", rows);
}

void cmd_ablate(const CommonArgs& args, const std::string& variant_name,
                const std::string& factor_name, double noise_ratio) {
  RunConfig rc = build_config(args);
  DatasetBundle bundle = load_bundle(rc);
  ResponseCache cache(rc.llm.cache_dir);
  ExperimentEnv env = make_env(rc, bundle, cache);

  std::vector<VariantSpec> variants;
  if (!variant_name.empty()) {
    VariantSpec v =
        VariantSpec::parse(variant_name, env.factors, factor_name, noise_ratio, rc.mask_at_train);
    if (v.kind != VariantSpec::Kind::Full) variants.push_back(VariantSpec{});  // baseline
    variants.push_back(v);
  } else {
    for (const std::string& name : rc.ablate_variants)
      variants.push_back(
          VariantSpec::parse(name, env.factors, "", -1.0, rc.mask_at_train));
  }

  AblationResult result = run_ablation(env, variants, rc.seeds, rc.out_dir + "/ablate");
  std::cout << "ablate: " << variants.size() << " variants x " << rc.seeds.size()
            << " seeds -> " << rc.out_dir << "/ablate\n";
  for (const auto& [vname, metrics] : result.per_seed) {
    auto it = metrics.find({"recall", 20});
    if (it == metrics.end() || it->second.empty()) continue;
    double mean = 0;
    for (double x : it->second) mean += x;
    mean /= static_cast<double>(it->second.size());
    std::cout << "  " << vname << ": mean recall@20 = " << format_double(mean) << "\n";
  }
  if (result.summary.contains("comparisons"))
    for (const auto& [vname, jc] : result.summary["comparisons"].items())
      std::cout << "  " << vname << " vs full: p = " << format_double(jc["p"].get<double>())
                << "\n";
}

void cmd_sweep(const CommonArgs& args, const std::string& n_list) {
  RunConfig rc = build_config(args);
  DatasetBundle bundle = load_bundle(rc);
  ResponseCache cache(rc.llm.cache_dir);
  ExperimentEnv env = make_env(rc, bundle, cache);

  std::vector<int> ns = rc.sweep_n;
  if (!n_list.empty()) {
    ns.clear();
    std::string cur;
    for (char c : n_list + ",") {
      if (c == ',') {
        if (!trim_copy(cur).empty()) ns.push_back(std::stoi(trim_copy(cur)));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (ns.empty()) throw ConfigError("--n expects a comma-separated list, got '" + n_list + "'");
  }

  std::vector<SweepRow> rows = sweep_n_keys(env, ns, rc.seeds);
  fs::create_directories(rc.out_dir);
  write_sweep_csv(rc.out_dir + "/sweep.csv", rows);
  std::cout << "sweep: " << rows.size() << " rows -> " << rc.out_dir << "/sweep.csv\n";
  for (const auto& row : rows)
    std::cout << "  n=" << row.x << " " << row.metric << " = " << format_double(row.value)
              << "\n";
}

int run_guarded(const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "reform — review-profile recommender pipeline\n"
      "Exit codes: 0 ok, 2 bad input or config, 3 backend failure, 1 other errors."};
  app.require_subcommand(1);

  CommonArgs args;

  auto* ingest = app.add_subcommand(
      "ingest", "filter reviews (k-core), build the ID map, split, and graph artifacts");
  add_common(ingest, &args);

  double noise_ratio = -1.0;
  auto* profile =
      app.add_subcommand("profile", "generate factor profiles for every user and item");
  add_common(profile, &args);
  profile->add_option("--noise-ratio", noise_ratio,
                      "replace this share of each user's sampled reviews with other users'");

  auto* encode = app.add_subcommand("encode", "embed profile texts into the binary matrix file");
  add_common(encode, &args);

  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic corpus with planted factor preferences, then ingest it");
  add_common(synth, &args);

  std::string variant_name = "full", factor_name;
  auto* train = app.add_subcommand("train", "train one model on the prepared artifacts");
  add_common(train, &args);
  train->add_option("--variant", variant_name,
                    "full | avg_pool | no_mfa_mlp | mask_factor (with --factor)");
  train->add_option("--factor", factor_name, "factor name for mask_factor");

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on the test split");
  add_common(eval, &args);
  eval->add_option("--checkpoint", checkpoint, "checkpoint path (default: the full model)");

  std::string ablate_variant;
  std::string ablate_factor;
  double ablate_noise = -1.0;
  auto* ablate = app.add_subcommand(
      "ablate", "train and compare pipeline variants across seeds (paired t-test vs full)");
  add_common(ablate, &args);
  ablate->add_option("--variant", ablate_variant,
                     "single variant to compare against full (default: ablate.variants)");
  ablate->add_option("--factor", ablate_factor, "factor name for mask_factor");
  ablate->add_option("--noise-ratio", ablate_noise, "ratio for the noise variant");

  std::string n_list;
  auto* sweep = app.add_subcommand("sweep", "sweep the attention key count n");
  add_common(sweep, &args);
  sweep->add_option("--n", n_list, "comma-separated n values (default: sweep.n)");

  CLI11_PARSE(app, argc, argv);

  if (ingest->parsed()) return run_guarded([&] { cmd_ingest(args); });
  if (profile->parsed()) return run_guarded([&] { cmd_profile(args, noise_ratio); });
  if (encode->parsed()) return run_guarded([&] { cmd_encode(args); });
  if (synth->parsed()) return run_guarded([&] { cmd_synth(args); });
  if (train->parsed()) return run_guarded([&] { cmd_train(args, variant_name, factor_name); });
  if (eval->parsed()) return run_guarded([&] { cmd_eval(args, checkpoint); });
  if (ablate->parsed())
    return run_guarded([&] { cmd_ablate(args, ablate_variant, ablate_factor, ablate_noise); });
  if (sweep->parsed()) return run_guarded([&] { cmd_sweep(args, n_list); });
  return 0;
}
