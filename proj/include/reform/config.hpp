#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"
#include "reform/profile_gen.hpp"
#include "reform/synth.hpp"
#include "reform/text_encoder.hpp"
#include "reform/trainer.hpp"

#include <map>
#include <string>
#include <vector>

namespace reform {

// Minimal TOML-style document: [section] headers, key = value lines, values
// are strings, numbers, booleans, or flat arrays; # starts a comment. Keys are
// addressed as "section.key".
class ConfigDoc {
 public:
  static ConfigDoc parse(const std::string& text);
  static ConfigDoc parse_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_array(const std::string& key,
                                     const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<int64_t> get_ints(const std::string& key,
                                const std::vector<int64_t>& fallback) const;

  // CLI overrides; value uses the same literal syntax as the file.
  void set(const std::string& key, const std::string& raw_value);

  // Sorted key = value lines; the config hash is the FNV-1a of this text.
  std::string canonical() const;
  std::string hash() const;

 private:
  struct Value {
    bool is_array = false;
    std::string scalar;
    std::vector<std::string> items;
  };
  static std::string strip(const std::string& s);
  static std::string unquote(const std::string& s);
  std::map<std::string, Value> values_;
};

struct RunConfig {
  // [dataset]
  std::string reviews_path;
  ReviewFormat review_format = ReviewFormat::Jsonl;
  int k_core = 10;
  SplitRatios ratios;

  // [factors]
  std::string factor_file;  // empty → the built-in restaurant set

  // [llm], [profiles]
  LlmBackendConfig llm;
  int n_max_reviews = 100;
  bool per_factor_calls = false;
  double noise_ratio = 0.0;

  // [encoder]
  EncoderConfig encoder;

  // [train]
  TrainConfig train;
  // When set, d_g and d_star each default to total_dim / 2, i.e. the budget
  // caps the fused (concatenated) vector rather than each branch.
  int total_dim = 0;

  // [eval]
  std::vector<int> Ks = {10, 20};
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};

  // [ablate] / [sweep]
  std::vector<std::string> ablate_variants = {"full", "avg_pool", "no_mfa_mlp"};
  bool mask_at_train = true;
  std::vector<double> noise_ratios = {0.0, 0.5, 1.0};
  std::vector<int> sweep_n = {1, 2, 3, 4, 5};

  // [synth]
  SynthConfig synth;

  // [run]
  std::string out_dir = "out";
  uint64_t seed = 42;
  int threads = 1;
  bool deterministic = false;

  std::string config_hash;  // filled by from_doc

  static RunConfig from_doc(const ConfigDoc& doc);
  FactorSet load_factors() const;
};

}  // namespace reform
