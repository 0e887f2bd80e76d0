#pragma once

#include "reform/common.hpp"
#include "reform/profile_gen.hpp"

#include <memory>
#include <mutex>
#include <unordered_map>

namespace reform {

// Per-entity profile matrices: one M×d matrix per user and per item, row m
// holding the embedding of that entity's m-th factor description.
struct EmbeddingStore {
  int M = 0;
  int d = 0;
  std::vector<Mat> users;
  std::vector<Mat> items;

  int num_users() const { return static_cast<int>(users.size()); }
  int num_items() const { return static_cast<int>(items.size()); }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual Vec encode(const std::string& text) = 0;
  // Default implementation encodes one by one; http overrides with real batching.
  virtual std::vector<Vec> encode_batch(const std::vector<std::string>& texts);
};

// Deterministic stand-in for a sentence encoder. Each token gets a fixed
// seeded gaussian direction; a text maps to the L2-normalized sum of its token
// vectors, so texts sharing words land near each other and unrelated texts
// are near-orthogonal in expectation. Same text always gives the same vector.
class HashMockEncoder : public TextEncoder {
 public:
  explicit HashMockEncoder(int d = 32, uint64_t provider_seed = 0);
  int dim() const override { return d_; }
  std::string name() const override { return "hash_mock"; }
  Vec encode(const std::string& text) override;

 private:
  const Vec& token_vector(const std::string& token);
  int d_;
  uint64_t provider_seed_;
  std::unordered_map<std::string, Vec> token_cache_;
  std::mutex mutex_;
};

struct EncoderConfig {
  enum class Kind { HashMock, HttpEmbeddings, FileImport };
  Kind kind = Kind::HashMock;
  int dim = 32;  // conventional sentence-encoder default is 768; mock keeps tests fast
  uint64_t seed = 0;            // hash_mock
  std::string path;             // file_import: embedding binary to load
  std::string endpoint;         // http_embeddings
  std::string model_name = "embedder";
  std::string api_key_env = "REFORM_API_KEY";
  int max_retries = 5;
  double timeout_s = 60.0;
  int backoff_base_ms = 1000;
  int batch_size = 64;
};

class HttpEmbeddingsEncoder : public TextEncoder {
 public:
  explicit HttpEmbeddingsEncoder(EncoderConfig cfg);
  int dim() const override { return cfg_.dim; }
  std::string name() const override { return cfg_.model_name; }
  Vec encode(const std::string& text) override;
  std::vector<Vec> encode_batch(const std::vector<std::string>& texts) override;

 private:
  EncoderConfig cfg_;
};

// hash_mock / http_embeddings only; file_import is handled by encode_all.
std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& cfg);

// One M×d matrix from one profile; rows follow factor order.
Mat encode_profile(TextEncoder& encoder, const FactorProfile& profile);

// Encodes every profile. Each distinct factor text is encoded exactly once and
// reused, so entities sharing a text get bit-identical rows. file_import skips
// encoding entirely and loads the binary at cfg.path (validated against the
// profile counts).
EmbeddingStore encode_all(const EncoderConfig& cfg, const ProfileStore& profiles);

// Binary format: one UTF-8 JSON header line
//   {"magic":"rfmemb1","M":...,"d":...,"users":...,"items":...}
// then users*M*d little-endian f32 values, then items*M*d, row-major in
// entity-index order.
void save_embeddings(const std::string& path, const EmbeddingStore& store);
EmbeddingStore load_embeddings(const std::string& path);

// Loads and insists the header matches the expected geometry; mismatches are
// fatal with an expected-vs-found message. Pass -1 to skip a field.
EmbeddingStore load_embeddings_checked(const std::string& path, int M, int d, int users,
                                       int items);

}  // namespace reform
