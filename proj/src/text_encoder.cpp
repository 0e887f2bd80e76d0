#include "reform/text_encoder.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

using json = nlohmann::json;

namespace reform {

std::vector<Vec> TextEncoder::encode_batch(const std::vector<std::string>& texts) {
  std::vector<Vec> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(encode(t));
  return out;
}

// ---- hash mock ---------------------------------------------------------------

HashMockEncoder::HashMockEncoder(int d, uint64_t provider_seed)
    : d_(d), provider_seed_(provider_seed) {
  if (d <= 0) throw ConfigError("encoder dimension must be positive");
}

const Vec& HashMockEncoder::token_vector(const std::string& token) {
  auto it = token_cache_.find(token);
  if (it != token_cache_.end()) return it->second;
  Rng rng(derive_seed(provider_seed_, "hash_mock_token", fnv1a64(token)));
  Vec v(d_);
  for (int k = 0; k < d_; ++k) v[k] = rng.gaussian();
  double norm = v.norm();
  if (norm > 0) v /= norm;
  return token_cache_.emplace(token, std::move(v)).first->second;
}

Vec HashMockEncoder::encode(const std::string& text) {
  std::lock_guard<std::mutex> lock(mutex_);
  Vec sum = Vec::Zero(d_);
  for (const auto& tok : tokenize_words(text)) sum += token_vector(tok);
  double norm = sum.norm();
  if (norm > 0) sum /= norm;
  return sum;
}

// ---- http --------------------------------------------------------------------

HttpEmbeddingsEncoder::HttpEmbeddingsEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("http_embeddings encoder requires an endpoint");
  if (cfg_.dim <= 0) throw ConfigError("encoder dimension must be positive");
}

Vec HttpEmbeddingsEncoder::encode(const std::string& text) {
  return encode_batch({text}).front();
}

std::vector<Vec> HttpEmbeddingsEncoder::encode_batch(const std::vector<std::string>& texts) {
  std::vector<Vec> out;
  out.reserve(texts.size());

  size_t scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("bad endpoint URL: " + cfg_.endpoint);
  size_t slash = cfg_.endpoint.find('/', scheme + 3);
  std::string base = slash == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, slash);
  std::string path = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);

  const char* key = nullptr;
  if (!cfg_.api_key_env.empty()) key = std::getenv(cfg_.api_key_env.c_str());

  for (size_t begin = 0; begin < texts.size(); begin += static_cast<size_t>(cfg_.batch_size)) {
    const size_t end = std::min(texts.size(), begin + static_cast<size_t>(cfg_.batch_size));
    json body;
    body["model"] = cfg_.model_name;
    body["input"] = json::array();
    for (size_t i = begin; i < end; ++i) body["input"].push_back(texts[i]);
    const std::string payload = body.dump();

    std::string last_error;
    bool done = false;
    for (int attempt = 0; attempt <= cfg_.max_retries && !done; ++attempt) {
      if (attempt > 0) {
        int64_t delay = static_cast<int64_t>(cfg_.backoff_base_ms) << (attempt - 1);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      httplib::Client client(base);
      client.set_connection_timeout(static_cast<time_t>(cfg_.timeout_s));
      client.set_read_timeout(static_cast<time_t>(cfg_.timeout_s));
      httplib::Headers headers;
      if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array() ||
          reply["data"].size() != end - begin) {
        last_error = "unexpected response shape";
        continue;
      }
      std::vector<Vec> batch;
      batch.reserve(end - begin);
      bool ok = true;
      for (const auto& row : reply["data"]) {
        if (!row.contains("embedding") || !row["embedding"].is_array()) {
          ok = false;
          break;
        }
        const auto& emb = row["embedding"];
        if (static_cast<int>(emb.size()) != cfg_.dim)
          throw FormatError("embedding provider returned dimension " +
                            std::to_string(emb.size()) + ", run config expects " +
                            std::to_string(cfg_.dim));
        Vec v(cfg_.dim);
        for (int k = 0; k < cfg_.dim; ++k) v[k] = emb[k].get<double>();
        batch.push_back(std::move(v));
      }
      if (!ok) {
        last_error = "row without embedding array";
        continue;
      }
      for (auto& v : batch) out.push_back(std::move(v));
      done = true;
    }
    if (!done)
      throw BackendError("embeddings backend failed after " +
                         std::to_string(cfg_.max_retries + 1) + " attempt(s): " + last_error);
  }
  return out;
}

std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& cfg) {
  switch (cfg.kind) {
    case EncoderConfig::Kind::HashMock:
      return std::make_unique<HashMockEncoder>(cfg.dim, cfg.seed);
    case EncoderConfig::Kind::HttpEmbeddings:
      return std::make_unique<HttpEmbeddingsEncoder>(cfg);
    case EncoderConfig::Kind::FileImport:
      throw ConfigError("file_import provides matrices directly; use encode_all");
  }
  throw ConfigError("unknown encoder kind");
}

// ---- profile encoding ----------------------------------------------------------

Mat encode_profile(TextEncoder& encoder, const FactorProfile& profile) {
  const int M = static_cast<int>(profile.factors.size());
  if (M == 0) throw ConfigError("profile has no factors to encode");
  Mat out(M, encoder.dim());
  for (int m = 0; m < M; ++m) out.row(m) = encoder.encode(profile.factors[m]).transpose();
  if (!out.allFinite()) throw FormatError("encoder produced non-finite values");
  return out;
}

EmbeddingStore encode_all(const EncoderConfig& cfg, const ProfileStore& profiles) {
  if (profiles.users.empty() && profiles.items.empty())
    throw ConfigError("no profiles to encode");
  const int M = static_cast<int>(
      (profiles.users.empty() ? profiles.items : profiles.users).front().factors.size());

  if (cfg.kind == EncoderConfig::Kind::FileImport) {
    return load_embeddings_checked(cfg.path, M, cfg.dim,
                                   static_cast<int>(profiles.users.size()),
                                   static_cast<int>(profiles.items.size()));
  }

  auto encoder = make_encoder(cfg);

  // Encode each distinct text once, in first-appearance order.
  std::vector<std::string> unique_texts;
  std::unordered_map<std::string, size_t> slot;
  auto visit = [&](const std::vector<FactorProfile>& list) {
    for (const auto& p : list) {
      if (static_cast<int>(p.factors.size()) != M)
        throw FormatError("profile factor count varies across entities");
      for (const auto& text : p.factors)
        if (slot.emplace(text, unique_texts.size()).second) unique_texts.push_back(text);
    }
  };
  visit(profiles.users);
  visit(profiles.items);

  std::vector<Vec> encoded = encoder->encode_batch(unique_texts);

  EmbeddingStore store;
  store.M = M;
  store.d = encoder->dim();
  auto assemble = [&](const std::vector<FactorProfile>& list, std::vector<Mat>& out) {
    out.reserve(list.size());
    for (const auto& p : list) {
      Mat mat(M, store.d);
      for (int m = 0; m < M; ++m) mat.row(m) = encoded[slot[p.factors[m]]].transpose();
      out.push_back(std::move(mat));
    }
  };
  assemble(profiles.users, store.users);
  assemble(profiles.items, store.items);
  return store;
}

// ---- binary io ------------------------------------------------------------------

void save_embeddings(const std::string& path, const EmbeddingStore& store) {
  json header;
  header["magic"] = "rfmemb1";
  header["M"] = store.M;
  header["d"] = store.d;
  header["users"] = store.num_users();
  header["items"] = store.num_items();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const std::string head = header.dump() + "\n";
  out.write(head.data(), static_cast<std::streamsize>(head.size()));

  std::vector<float> row(static_cast<size_t>(store.d));
  auto dump = [&](const std::vector<Mat>& mats) {
    for (const auto& mat : mats) {
      for (int m = 0; m < store.M; ++m) {
        for (int k = 0; k < store.d; ++k) row[static_cast<size_t>(k)] =
            static_cast<float>(mat(m, k));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
      }
    }
  };
  dump(store.users);
  dump(store.items);
  if (!out) throw IoError("write failed: " + path);
}

EmbeddingStore load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string head;
  if (!std::getline(in, head)) throw FormatError("missing header line in " + path);

  json header = json::parse(head, nullptr, false);
  if (header.is_discarded() || header.value("magic", std::string()) != "rfmemb1")
    throw FormatError("bad embedding header in " + path + ": expected magic \"rfmemb1\"");
  EmbeddingStore store;
  store.M = header.at("M").get<int>();
  store.d = header.at("d").get<int>();
  const int users = header.at("users").get<int>();
  const int items = header.at("items").get<int>();
  if (store.M <= 0 || store.d <= 0 || users < 0 || items < 0)
    throw FormatError("bad embedding header geometry in " + path);

  const size_t header_bytes = head.size() + 1;
  const size_t per_entity = static_cast<size_t>(store.M) * static_cast<size_t>(store.d);
  const size_t expected_floats = per_entity * (static_cast<size_t>(users) + items);

  std::vector<float> payload(expected_floats);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(expected_floats * sizeof(float)));
  const size_t got = static_cast<size_t>(in.gcount());
  if (got != expected_floats * sizeof(float))
    throw FormatError("truncated embedding file " + path + ": expected " +
                      std::to_string(expected_floats * sizeof(float)) + " payload bytes at offset " +
                      std::to_string(header_bytes) + ", found " + std::to_string(got));
  // Extra trailing bytes mean the header lied about the geometry.
  char probe;
  if (in.read(&probe, 1))
    throw FormatError("trailing bytes in embedding file " + path + " after offset " +
                      std::to_string(header_bytes + got));

  size_t cursor = 0;
  auto take = [&](int count, std::vector<Mat>& out) {
    out.reserve(static_cast<size_t>(count));
    for (int e = 0; e < count; ++e) {
      Mat mat(store.M, store.d);
      for (int m = 0; m < store.M; ++m)
        for (int k = 0; k < store.d; ++k) mat(m, k) = payload[cursor++];
      out.push_back(std::move(mat));
    }
  };
  take(users, store.users);
  take(items, store.items);
  return store;
}

EmbeddingStore load_embeddings_checked(const std::string& path, int M, int d, int users,
                                       int items) {
  EmbeddingStore store = load_embeddings(path);
  std::string diff;
  auto check = [&](const char* field, int expected, int found) {
    if (expected >= 0 && expected != found)
      diff += std::string(diff.empty() ? "" : ", ") + field + ": expected " +
              std::to_string(expected) + ", found " + std::to_string(found);
  };
  check("M", M, store.M);
  check("d", d, store.d);
  check("users", users, store.num_users());
  check("items", items, store.num_items());
  if (!diff.empty()) throw FormatError("embedding file " + path + " does not match run config (" + diff + ")");
  return store;
}

}  // namespace reform
