#include "reform/profile_gen.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <thread>
#include <unordered_set>

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace reform {

// ---- factor set ------------------------------------------------------------

int FactorSet::index_of(const std::string& name) const {
  for (int m = 0; m < size(); ++m)
    if (names[m] == name) return m;
  return -1;
}

void FactorSet::validate() const {
  if (names.empty()) throw ConfigError("factor set must contain at least one factor");
  if (names.size() != descriptions.size())
    throw ConfigError("factor set names/descriptions length mismatch");
  std::set<std::string> uniq(names.begin(), names.end());
  if (uniq.size() != names.size()) throw ConfigError("factor names must be unique");
}

FactorSet FactorSet::restaurant_default() {
  FactorSet f;
  f.names = {"cuisine type", "flavor", "atmosphere", "price", "time", "waiting", "companion"};
  f.descriptions = {
      "The specific types of food offered appeal to users' preferences and dietary "
      "restrictions.",
      "How the taste of the dishes, such as seasoning, spice level, and overall balance, "
      "comes across.",
      "The ambience, interior, noise level, and overall vibe of the place.",
      "How the cost of a meal relates to portion size and perceived value for money.",
      "The hours and occasions the place suits, such as breakfast, lunch, dinner, or "
      "late-night visits.",
      "How long guests wait for a table or for food, including queue length and speed of "
      "service.",
      "Who the visit is shared with, such as family, friends, a date, or colleagues."};
  return f;
}

FactorSet FactorSet::from_json_file(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("factors") || !j["factors"].is_array())
    throw FormatError("invalid factor-set file: " + path);
  FactorSet f;
  for (const auto& entry : j["factors"]) {
    f.names.push_back(entry.at("name").get<std::string>());
    f.descriptions.push_back(entry.value("description", std::string()));
  }
  f.validate();
  return f;
}

// ---- review sampling -------------------------------------------------------

std::vector<Review> sample_user_reviews(const std::vector<Review>& reviews, int n_max,
                                        uint64_t seed) {
  if (reviews.empty()) throw ConfigError("cannot sample from an empty review list");
  if (static_cast<int>(reviews.size()) <= n_max) return reviews;
  Rng rng(seed);
  auto picked = rng.sample_without_replacement(reviews.size(), static_cast<size_t>(n_max));
  std::vector<Review> out;
  out.reserve(picked.size());
  for (size_t idx : picked) out.push_back(reviews[idx]);
  return out;
}

std::vector<Review> sample_item_reviews(const std::vector<Review>& reviews, int n_max) {
  if (reviews.empty()) throw ConfigError("cannot sample from an empty review list");
  std::vector<Review> out = reviews;
  std::stable_sort(out.begin(), out.end(), [](const Review& a, const Review& b) {
    if (a.text.size() != b.text.size()) return a.text.size() > b.text.size();
    return a.id < b.id;
  });
  if (static_cast<int>(out.size()) > n_max) out.resize(static_cast<size_t>(n_max));
  return out;
}

std::vector<Review> inject_noise(const std::vector<Review>& own, const std::vector<Review>& pool,
                                 double ratio, uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0) throw ConfigError("noise ratio must lie in [0, 1]");
  std::vector<Review> out = own;
  const size_t count = static_cast<size_t>(std::llround(ratio * static_cast<double>(own.size())));
  if (count == 0) return out;
  if (pool.empty()) throw ConfigError("noise injection needs a non-empty review pool");

  Rng rng(seed);
  auto positions = rng.sample_without_replacement(own.size(), count);
  std::vector<size_t> sources;
  if (pool.size() >= count) {
    sources = rng.sample_without_replacement(pool.size(), count);
  } else {
    log_warn("noise pool smaller than replacement count (" + std::to_string(pool.size()) + " < " +
             std::to_string(count) + "); sampling with replacement");
    sources.reserve(count);
    for (size_t i = 0; i < count; ++i)
      sources.push_back(static_cast<size_t>(rng.uniform_int(pool.size())));
  }
  for (size_t i = 0; i < count; ++i) out[positions[i]] = pool[sources[i]];
  return out;
}

// ---- prompts ---------------------------------------------------------------

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.user_role =
      "You are analyzing restaurant reviews written by a single user. For each factor listed "
      "below, describe this user's preferences as revealed by their reviews.";
  t.item_role =
      "You are analyzing restaurant reviews received by a single restaurant. For each factor "
      "listed below, describe this restaurant's characteristics as revealed by its reviews.";
  t.body = "{{role}}\n\nFactors:\n{{factors}}\n\nReviews:\n{{reviews}}\n\n{{format}}\n";
  return t;
}

namespace {

std::string flatten(const std::string& text) {
  std::string out = text;
  for (char& c : out)
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  return out;
}

std::string replace_placeholder(std::string haystack, const std::string& name,
                                const std::string& value) {
  const std::string needle = "{{" + name + "}}";
  size_t pos = haystack.find(needle);
  while (pos != std::string::npos) {
    haystack.replace(pos, needle.size(), value);
    pos = haystack.find(needle, pos + value.size());
  }
  return haystack;
}

std::string factor_block(const FactorSet& factors, int only_index) {
  std::string out;
  for (int m = 0; m < factors.size(); ++m) {
    if (only_index >= 0 && m != only_index) continue;
    out += std::to_string(m + 1) + ". " + factors.names[m] + ": " + factors.descriptions[m] + "\n";
  }
  return out;
}

std::string format_block(const FactorSet& factors, int only_index) {
  std::string keys;
  for (int m = 0; m < factors.size(); ++m) {
    if (only_index >= 0 && m != only_index) continue;
    if (!keys.empty()) keys += ", ";
    keys += "\"" + factors.names[m] + "\"";
  }
  return "Respond with a single JSON object and nothing else. Use exactly these keys: " + keys +
         ". Each value is a short description of that factor, or \"" + kUnknownFactor +
         "\" if the reviews provide no evidence.";
}

std::string assemble_prompt(const FactorSet& factors, const std::vector<Review>& reviews,
                            EntityKind kind, const PromptOptions& options, int only_index) {
  factors.validate();
  if (reviews.empty()) throw ConfigError("cannot build a prompt from an empty review list");

  const std::string& role =
      kind == EntityKind::User ? options.templates.user_role : options.templates.item_role;
  const std::string factors_text = factor_block(factors, only_index);
  const std::string format_text = format_block(factors, only_index);

  size_t n_used = reviews.size();
  for (;;) {
    std::string reviews_text;
    for (size_t i = 0; i < n_used; ++i) {
      reviews_text += "Review [" + std::to_string(reviews[i].id) + "]: " +
                      flatten(reviews[i].text) + "\n";
    }
    std::string prompt = replace_placeholder(options.templates.body, "role", role);
    prompt = replace_placeholder(prompt, "factors", factors_text);
    prompt = replace_placeholder(prompt, "reviews", reviews_text);
    prompt = replace_placeholder(prompt, "format", format_text);
    if (prompt.size() <= options.max_chars || n_used <= 1) {
      if (n_used < reviews.size())
        log_warn("prompt over budget; truncated " + std::to_string(reviews.size() - n_used) +
                 " review(s) from the end");
      return prompt;
    }
    --n_used;
  }
}

}  // namespace

std::string build_prompt(const FactorSet& factors, const std::vector<Review>& reviews,
                         EntityKind kind, const PromptOptions& options) {
  return assemble_prompt(factors, reviews, kind, options, -1);
}

std::string build_prompt_single_factor(const FactorSet& factors, int factor_index,
                                       const std::vector<Review>& reviews, EntityKind kind,
                                       const PromptOptions& options) {
  if (factor_index < 0 || factor_index >= factors.size())
    throw ConfigError("factor index out of range");
  return assemble_prompt(factors, reviews, kind, options, factor_index);
}

// ---- mock backend ----------------------------------------------------------

namespace {

const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words = {
      "the",  "a",     "an",    "and",  "or",    "of",   "to",    "in",    "on",    "for",
      "with", "was",   "were",  "is",   "are",   "it",   "its",   "this",  "that",  "i",
      "we",   "they",  "he",    "she",  "my",    "our",  "their", "at",    "so",    "very",
      "too",  "had",   "has",   "have", "be",    "been", "as",    "by",    "from",  "but",
      "not",  "no",    "here",  "there", "when", "what", "which", "who",   "all",   "some",
      "one",  "two",   "also",  "just", "really", "place", "food", "restaurant", "again",
      "back", "would", "will",  "you",  "your",  "me",   "us",    "them",  "got",   "get",
      "went", "go",    "came",  "come", "felt",  "feel", "exactly", "wanted", "loved",
      "liked", "great", "good",  "nice", "visit", "visited"};
  return words;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string cur;
  for (char ch : text) {
    if (ch == '.' || ch == '!' || ch == '?' || ch == ';') {
      if (!cur.empty()) sentences.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) sentences.push_back(cur);
  return sentences;
}

}  // namespace

MockLlmBackend::MockLlmBackend(FactorSet factors, int top_words)
    : factors_(std::move(factors)), top_words_(top_words) {
  factors_.validate();
}

std::string MockLlmBackend::complete(const std::string& prompt) {
  ++calls_;

  // Recover review texts from the prompt body.
  std::vector<std::string> review_texts;
  size_t pos = 0;
  while (pos < prompt.size()) {
    size_t eol = prompt.find('\n', pos);
    if (eol == std::string::npos) eol = prompt.size();
    std::string line = prompt.substr(pos, eol - pos);
    if (line.rfind("Review [", 0) == 0) {
      size_t colon = line.find("]: ");
      if (colon != std::string::npos) review_texts.push_back(line.substr(colon + 3));
    }
    pos = eol + 1;
  }

  // Tokens that belong to factor names never count as content words.
  std::unordered_set<std::string> name_tokens;
  std::vector<std::string> lower_names, first_tokens;
  for (const auto& name : factors_.names) {
    lower_names.push_back(to_lower(name));
    auto toks = tokenize_words(name);
    first_tokens.push_back(toks.empty() ? to_lower(name) : toks.front());
    for (const auto& t : toks) name_tokens.insert(t);
  }

  ordered_json answer = ordered_json::object();
  for (int m = 0; m < factors_.size(); ++m) {
    std::map<std::string, int64_t> counts;
    for (const auto& text : review_texts) {
      for (const auto& sentence : split_sentences(text)) {
        const std::string low = to_lower(sentence);
        if (low.find(lower_names[m]) == std::string::npos &&
            low.find(first_tokens[m]) == std::string::npos)
          continue;
        for (const auto& tok : tokenize_words(sentence)) {
          if (tok.size() < 2) continue;
          if (stop_words().count(tok) || name_tokens.count(tok)) continue;
          ++counts[tok];
        }
      }
    }
    std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::string value;
    for (int i = 0; i < std::min<int>(top_words_, static_cast<int>(ranked.size())); ++i) {
      if (!value.empty()) value += ", ";
      value += ranked[i].first;
    }
    answer[factors_.names[m]] = value.empty() ? std::string(kUnknownFactor) : value;
  }
  return answer.dump();
}

// ---- http backend ----------------------------------------------------------

HttpChatBackend::HttpChatBackend(LlmBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("http_chat backend requires an endpoint URL");
}

std::string HttpChatBackend::complete(const std::string& prompt) {
  // Split "scheme://host[:port]/path" into base and path.
  size_t scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("bad endpoint URL: " + cfg_.endpoint);
  size_t slash = cfg_.endpoint.find('/', scheme + 3);
  std::string base = slash == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, slash);
  std::string path = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);

  json body;
  body["model"] = cfg_.model_name;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = cfg_.temperature;
  const std::string payload = body.dump();

  const char* key = nullptr;
  if (!cfg_.api_key_env.empty()) key = std::getenv(cfg_.api_key_env.c_str());

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      int64_t delay = static_cast<int64_t>(cfg_.backoff_base_ms) << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Client client(base);
    client.set_connection_timeout(static_cast<time_t>(cfg_.timeout_s));
    client.set_read_timeout(static_cast<time_t>(cfg_.timeout_s));
    httplib::Headers headers;
    if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
    ++calls_;
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
    if (reply.is_discarded()) {
      last_error = "response body is not JSON";
      continue;
    }
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("unexpected response shape: ") + e.what();
      continue;
    }
  }
  throw BackendError("chat backend failed after " + std::to_string(cfg_.max_retries + 1) +
                     " attempt(s): " + last_error);
}

std::unique_ptr<LlmBackend> make_backend(const LlmBackendConfig& cfg, const FactorSet& factors) {
  if (cfg.kind == LlmBackendKind::Mock)
    return std::make_unique<MockLlmBackend>(factors, cfg.mock_top_words);
  return std::make_unique<HttpChatBackend>(cfg);
}

// ---- cache -----------------------------------------------------------------

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ResponseCache::path_for(uint64_t h) const { return dir_ + "/" + hex64(h) + ".json"; }

bool ResponseCache::lookup(const std::string& key, std::string* response) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = mem_.find(key);
  if (it != mem_.end()) {
    *response = it->second;
    ++hits_;
    return true;
  }
  if (!dir_.empty()) {
    const std::string path = path_for(fnv1a64(key));
    if (std::filesystem::exists(path)) {
      json j = json::parse(read_text_file(path), nullptr, false);
      if (!j.is_discarded() && j.contains("response")) {
        *response = j["response"].get<std::string>();
        mem_[key] = *response;
        ++hits_;
        return true;
      }
    }
  }
  return false;
}

void ResponseCache::store(const std::string& key, const std::string& response) {
  std::lock_guard<std::mutex> lock(mutex_);
  mem_[key] = response;
  if (!dir_.empty()) {
    json j;
    j["key_hash"] = hex64(fnv1a64(key));
    j["response"] = response;
    write_text_file(path_for(fnv1a64(key)), j.dump());
  }
}

// ---- profile assembly ------------------------------------------------------

namespace {

// Tolerant JSON extraction: take the outermost {...} span of the reply.
json parse_reply(const std::string& response) {
  size_t open = response.find('{');
  size_t close = response.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    return json(json::value_t::discarded);
  return json::parse(response.substr(open, close - open + 1), nullptr, false);
}

std::vector<std::string> extract_factors(const json& reply, const FactorSet& factors,
                                         int* missing) {
  std::vector<std::string> out(factors.size());
  for (int m = 0; m < factors.size(); ++m) {
    const auto& name = factors.names[m];
    if (reply.contains(name) && reply[name].is_string() &&
        !reply[name].get<std::string>().empty()) {
      out[m] = reply[name].get<std::string>();
    } else if (reply.contains(name) && !reply[name].is_null() && !reply[name].is_string()) {
      out[m] = reply[name].dump();
    } else {
      out[m] = kUnknownFactor;
      ++*missing;
    }
  }
  return out;
}

}  // namespace

FactorProfile generate_profile(LlmBackend& backend, ResponseCache& cache,
                               const std::string& prompt, const FactorSet& factors) {
  factors.validate();
  const std::string key = backend.name() + '\x1f' + prompt;

  std::string response;
  bool fresh = false;
  if (!cache.lookup(key, &response)) {
    response = backend.complete(prompt);
    fresh = true;
  }

  json reply = parse_reply(response);
  if (reply.is_discarded() || !reply.is_object()) {
    const std::string repair =
        prompt +
        "\n\nYour previous reply could not be parsed. Respond again with ONLY the JSON object "
        "described above, no extra text.";
    response = backend.complete(repair);
    fresh = true;
    reply = parse_reply(response);
    if (reply.is_discarded() || !reply.is_object())
      throw BackendError("backend response is not parseable JSON after one repair attempt");
  }
  if (fresh) cache.store(key, response);

  FactorProfile profile;
  int missing = 0;
  profile.factors = extract_factors(reply, factors, &missing);
  if (missing > 0)
    log_warn("backend response missing " + std::to_string(missing) +
             " factor key(s); filled with sentinel");
  return profile;
}

ProfileStore generate_profiles(const std::vector<Review>& reviews, const IdMap& ids,
                               const DataSplit& split, const FactorSet& factors,
                               LlmBackend& backend, ResponseCache& cache,
                               const ProfileGenOptions& options, ProfileRunStats* stats) {
  factors.validate();

  // Profiles are built from training-split reviews only.
  std::set<std::pair<int, int>> train_pairs;
  for (const auto& x : split.train) train_pairs.emplace(x.user, x.item);

  std::vector<std::vector<Review>> by_user(ids.num_users()), by_item(ids.num_items());
  std::vector<Review> train_reviews;
  for (const auto& r : reviews) {
    auto ui = ids.users.find(r.user_id);
    auto ii = ids.items.find(r.item_id);
    if (ui == ids.users.end() || ii == ids.items.end()) continue;
    if (!train_pairs.count({ui->second, ii->second})) continue;
    by_user[ui->second].push_back(r);
    by_item[ii->second].push_back(r);
    train_reviews.push_back(r);
  }

  const int64_t calls_before = backend.calls();
  const int64_t hits_before = cache.hits();
  std::atomic<int64_t> prompt_chars{0};

  auto run_entity = [&](EntityKind kind, int index,
                        const std::vector<Review>& sampled) -> FactorProfile {
    FactorProfile profile;
    if (options.per_factor_calls) {
      profile.factors.assign(factors.size(), kUnknownFactor);
      for (int m = 0; m < factors.size(); ++m) {
        const std::string prompt =
            build_prompt_single_factor(factors, m, sampled, kind, options.prompt);
        prompt_chars += static_cast<int64_t>(prompt.size());
        FactorSet single;
        single.names = {factors.names[m]};
        single.descriptions = {factors.descriptions[m]};
        FactorProfile part = generate_profile(backend, cache, prompt, single);
        profile.factors[m] = part.factors[0];
      }
    } else {
      const std::string prompt = build_prompt(factors, sampled, kind, options.prompt);
      prompt_chars += static_cast<int64_t>(prompt.size());
      profile = generate_profile(backend, cache, prompt, factors);
    }
    profile.kind = kind;
    profile.index = index;
    for (const auto& r : sampled) profile.provenance.push_back(r.id);
    profile.noise_ratio = kind == EntityKind::User ? options.noise_ratio : 0.0;
    return profile;
  };

  ProfileStore store;
  store.users.resize(ids.num_users());
  store.items.resize(ids.num_items());

  for (int u = 0; u < ids.num_users(); ++u) {
    std::vector<Review> sampled;
    if (by_user[u].empty()) {
      // No training reviews (should not happen after k-core); emit sentinels.
      FactorProfile profile;
      profile.kind = EntityKind::User;
      profile.index = u;
      profile.factors.assign(factors.size(), kUnknownFactor);
      profile.noise_ratio = options.noise_ratio;
      store.users[u] = std::move(profile);
      continue;
    }
    sampled = sample_user_reviews(by_user[u], options.n_max_reviews,
                                  derive_seed(options.seed, "profile_sample", 0, u));
    if (options.noise_ratio > 0.0) {
      std::vector<Review> pool;
      pool.reserve(train_reviews.size());
      for (const auto& r : train_reviews)
        if (ids.users.at(r.user_id) != u) pool.push_back(r);
      sampled = inject_noise(sampled, pool, options.noise_ratio,
                             derive_seed(options.seed, "noise", 0, u));
    }
    store.users[u] = run_entity(EntityKind::User, u, sampled);
  }

  for (int i = 0; i < ids.num_items(); ++i) {
    if (by_item[i].empty()) {
      FactorProfile profile;
      profile.kind = EntityKind::Item;
      profile.index = i;
      profile.factors.assign(factors.size(), kUnknownFactor);
      store.items[i] = std::move(profile);
      continue;
    }
    auto sampled = sample_item_reviews(by_item[i], options.n_max_reviews);
    store.items[i] = run_entity(EntityKind::Item, i, sampled);
  }

  if (stats) {
    stats->backend_calls = backend.calls() - calls_before;
    stats->cache_hits = cache.hits() - hits_before;
    stats->prompt_chars = prompt_chars.load();
  }
  return store;
}

// ---- profile store io ------------------------------------------------------

void write_profiles_jsonl(const std::string& path, const ProfileStore& store,
                          const FactorSet& factors) {
  std::string out;
  auto dump_one = [&](const FactorProfile& p) {
    ordered_json j;
    j["kind"] = entity_kind_name(p.kind);
    j["index"] = p.index;
    ordered_json f = ordered_json::object();
    for (int m = 0; m < factors.size(); ++m) f[factors.names[m]] = p.factors[m];
    j["factors"] = f;
    j["provenance"] = p.provenance;
    j["noise_ratio"] = p.noise_ratio;
    out += j.dump() + "\n";
  };
  for (const auto& p : store.users) dump_one(p);
  for (const auto& p : store.items) dump_one(p);
  write_text_file(path, out);
}

ProfileStore read_profiles_jsonl(const std::string& path, const FactorSet& factors) {
  const std::string content = read_text_file(path);
  ProfileStore store;
  size_t pos = 0;
  int64_t lineno = 0;
  while (pos < content.size()) {
    size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw FormatError("bad profile line " + std::to_string(lineno) + " in " + path);
    FactorProfile p;
    const std::string kind = j.at("kind").get<std::string>();
    p.kind = kind == "user" ? EntityKind::User : EntityKind::Item;
    p.index = j.at("index").get<int>();
    p.factors.resize(factors.size());
    const auto& f = j.at("factors");
    for (int m = 0; m < factors.size(); ++m) {
      if (!f.contains(factors.names[m]))
        throw FormatError("profile line " + std::to_string(lineno) + " missing factor '" +
                          factors.names[m] + "' in " + path);
      p.factors[m] = f[factors.names[m]].get<std::string>();
    }
    if (j.contains("provenance"))
      p.provenance = j["provenance"].get<std::vector<int64_t>>();
    p.noise_ratio = j.value("noise_ratio", 0.0);
    (p.kind == EntityKind::User ? store.users : store.items).push_back(std::move(p));
  }
  auto order = [](std::vector<FactorProfile>& v) {
    std::sort(v.begin(), v.end(),
              [](const FactorProfile& a, const FactorProfile& b) { return a.index < b.index; });
  };
  order(store.users);
  order(store.items);
  return store;
}

}  // namespace reform
