#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"

#include <memory>
#include <mutex>
#include <unordered_map>

namespace reform {

enum class EntityKind { User, Item };

inline const char* entity_kind_name(EntityKind k) { return k == EntityKind::User ? "user" : "item"; }

struct FactorSet {
  std::vector<std::string> names;
  std::vector<std::string> descriptions;  // one instruction sentence per factor

  int size() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;
  void validate() const;

  // The seven restaurant decision factors with their prompt instructions.
  static FactorSet restaurant_default();
  static FactorSet from_json_file(const std::string& path);
};

inline constexpr const char* kUnknownFactor = "unknown";

struct FactorProfile {
  EntityKind kind = EntityKind::User;
  int index = 0;
  std::vector<std::string> factors;  // aligned to FactorSet order
  std::vector<int64_t> provenance;   // review ids used as input
  double noise_ratio = 0.0;
};

// ---- review sampling -------------------------------------------------------

// Uniform sample without replacement of min(n_max, |reviews|) reviews.
std::vector<Review> sample_user_reviews(const std::vector<Review>& reviews, int n_max,
                                        uint64_t seed);

// Longest reviews first (character length), ties broken by review id ascending.
std::vector<Review> sample_item_reviews(const std::vector<Review>& reviews, int n_max = 100);

// Replaces round(ratio * |own|) randomly chosen entries of `own` with distinct
// reviews drawn from `pool`. Falls back to sampling the pool with replacement
// (and warns) when the pool is too small.
std::vector<Review> inject_noise(const std::vector<Review>& own, const std::vector<Review>& pool,
                                 double ratio, uint64_t seed);

// ---- prompts ---------------------------------------------------------------

struct PromptTemplates {
  std::string user_role;
  std::string item_role;
  std::string body;  // placeholders: {{role}}, {{factors}}, {{reviews}}, {{format}}

  static PromptTemplates defaults();
};

struct PromptOptions {
  size_t max_chars = 48000;  // proxy token budget; reviews are truncated from the end
  PromptTemplates templates = PromptTemplates::defaults();
};

std::string build_prompt(const FactorSet& factors, const std::vector<Review>& reviews,
                         EntityKind kind, const PromptOptions& options = {});

// Prompt for a single factor (per-factor call mode).
std::string build_prompt_single_factor(const FactorSet& factors, int factor_index,
                                       const std::vector<Review>& reviews, EntityKind kind,
                                       const PromptOptions& options = {});

// ---- backends --------------------------------------------------------------

enum class LlmBackendKind { HttpChat, Mock };

struct LlmBackendConfig {
  LlmBackendKind kind = LlmBackendKind::Mock;
  std::string endpoint;         // http_chat only, e.g. http://host:port/v1/chat/completions
  std::string model_name = "mock";
  std::string api_key_env = "REFORM_API_KEY";
  int max_retries = 5;
  double timeout_s = 60.0;
  double temperature = 0.0;
  int backoff_base_ms = 1000;   // exponential, factor 2
  int mock_top_words = 3;
  std::string cache_dir;        // empty -> in-memory cache only
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
  int64_t calls() const { return calls_; }

 protected:
  int64_t calls_ = 0;
};

// Deterministic stand-in: for each factor, collects the content words of the
// prompt's review sentences that mention the factor, and answers with the
// most frequent ones. Factors without any mention get the "unknown" sentinel.
class MockLlmBackend : public LlmBackend {
 public:
  MockLlmBackend(FactorSet factors, int top_words = 3);
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "mock"; }

 private:
  FactorSet factors_;
  int top_words_;
};

class HttpChatBackend : public LlmBackend {
 public:
  explicit HttpChatBackend(LlmBackendConfig cfg);
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return cfg_.model_name; }

 private:
  LlmBackendConfig cfg_;
};

std::unique_ptr<LlmBackend> make_backend(const LlmBackendConfig& cfg, const FactorSet& factors);

// Content-addressed response cache; safe for concurrent use. When a directory
// is configured, entries survive across runs so repeated generations never
// re-issue backend calls.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir = "");
  bool lookup(const std::string& key, std::string* response);
  void store(const std::string& key, const std::string& response);
  int64_t hits() const { return hits_; }

 private:
  std::string path_for(uint64_t h) const;
  std::string dir_;
  std::unordered_map<std::string, std::string> mem_;
  std::mutex mutex_;
  int64_t hits_ = 0;
};

// ---- profile generation ----------------------------------------------------

// Parses the backend's JSON answer into the M factor strings. Missing keys are
// filled with the "unknown" sentinel. An unparseable response triggers one
// repair re-ask before failing.
FactorProfile generate_profile(LlmBackend& backend, ResponseCache& cache,
                               const std::string& prompt, const FactorSet& factors);

struct ProfileRunStats {
  int64_t backend_calls = 0;
  int64_t cache_hits = 0;
  int64_t prompt_chars = 0;  // rough token-cost proxy
};

struct ProfileGenOptions {
  int n_max_reviews = 100;
  double noise_ratio = 0.0;   // user-side noise injection
  bool per_factor_calls = false;
  uint64_t seed = 0;
  PromptOptions prompt;
};

struct ProfileStore {
  std::vector<FactorProfile> users;
  std::vector<FactorProfile> items;
};

// Generates profiles for every user and item from their TRAIN-split reviews.
ProfileStore generate_profiles(const std::vector<Review>& reviews, const IdMap& ids,
                               const DataSplit& split, const FactorSet& factors,
                               LlmBackend& backend, ResponseCache& cache,
                               const ProfileGenOptions& options, ProfileRunStats* stats = nullptr);

void write_profiles_jsonl(const std::string& path, const ProfileStore& store,
                          const FactorSet& factors);
ProfileStore read_profiles_jsonl(const std::string& path, const FactorSet& factors);

}  // namespace reform
