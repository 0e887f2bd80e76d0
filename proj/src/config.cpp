#include "reform/config.hpp"

#include <algorithm>
#include <cstdlib>

namespace reform {

// ---- parsing -------------------------------------------------------------------

std::string ConfigDoc::strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string ConfigDoc::unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    out.reserve(s.size() - 2);
    for (size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        ++i;
        switch (s[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          default: out.push_back(s[i]);
        }
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  return s;
}

ConfigDoc ConfigDoc::parse(const std::string& text) {
  ConfigDoc doc;
  std::string section;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;

    // Comments: # outside quotes.
    bool in_quote = false;
    for (size_t c = 0; c < line.size(); ++c) {
      if (line[c] == '"') in_quote = !in_quote;
      if (line[c] == '#' && !in_quote) {
        line = line.substr(0, c);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError("config line " + std::to_string(lineno) + ": unterminated section");
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty())
        throw FormatError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = strip(line.substr(0, eq));
    std::string raw = strip(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    doc.set(full, raw);
  }
  return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  return parse(read_text_file(path));
}

void ConfigDoc::set(const std::string& key, const std::string& raw_value) {
  Value v;
  const std::string raw = strip(raw_value);
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']') throw FormatError("config value for " + key + ": unterminated array");
    v.is_array = true;
    std::string body = raw.substr(1, raw.size() - 2);
    std::string cur;
    bool in_quote = false;
    for (char c : body) {
      if (c == '"') in_quote = !in_quote;
      if (c == ',' && !in_quote) {
        if (!strip(cur).empty()) v.items.push_back(unquote(strip(cur)));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!strip(cur).empty()) v.items.push_back(unquote(strip(cur)));
  } else {
    v.scalar = unquote(raw);
  }
  values_[key] = std::move(v);
}

bool ConfigDoc::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigDoc::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.is_array) throw FormatError("config key " + key + " is an array, not a scalar");
  return it->second.scalar;
}

int64_t ConfigDoc::get_int(const std::string& key, int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoll(it->second.scalar);
  } catch (const std::exception&) {
    throw FormatError("config key " + key + ": expected an integer, found '" +
                      it->second.scalar + "'");
  }
}

double ConfigDoc::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second.scalar);
  } catch (const std::exception&) {
    throw FormatError("config key " + key + ": expected a number, found '" + it->second.scalar +
                      "'");
  }
}

bool ConfigDoc::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.scalar == "true") return true;
  if (it->second.scalar == "false") return false;
  throw FormatError("config key " + key + ": expected true/false, found '" + it->second.scalar +
                    "'");
}

std::vector<std::string> ConfigDoc::get_array(const std::string& key,
                                              const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!it->second.is_array) return {it->second.scalar};
  return it->second.items;
}

std::vector<double> ConfigDoc::get_doubles(const std::string& key,
                                           const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& s : it->second.is_array ? it->second.items
                                           : std::vector<std::string>{it->second.scalar}) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw FormatError("config key " + key + ": expected numbers, found '" + s + "'");
    }
  }
  return out;
}

std::vector<int64_t> ConfigDoc::get_ints(const std::string& key,
                                         const std::vector<int64_t>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int64_t> out;
  for (const auto& s : it->second.is_array ? it->second.items
                                           : std::vector<std::string>{it->second.scalar}) {
    try {
      out.push_back(std::stoll(s));
    } catch (const std::exception&) {
      throw FormatError("config key " + key + ": expected integers, found '" + s + "'");
    }
  }
  return out;
}

std::string ConfigDoc::canonical() const {
  std::string out;
  for (const auto& [key, v] : values_) {
    out += key;
    out += " = ";
    if (v.is_array) {
      out += "[";
      for (size_t i = 0; i < v.items.size(); ++i) {
        if (i) out += ", ";
        out += v.items[i];
      }
      out += "]";
    } else {
      out += v.scalar;
    }
    out += "\n";
  }
  return out;
}

std::string ConfigDoc::hash() const { return hex64(fnv1a64(canonical())); }

// ---- run config -----------------------------------------------------------------

RunConfig RunConfig::from_doc(const ConfigDoc& doc) {
  RunConfig rc;

  rc.reviews_path = doc.get_string("dataset.reviews", "");
  const std::string fmt = doc.get_string("dataset.format", "jsonl");
  if (fmt == "jsonl")
    rc.review_format = ReviewFormat::Jsonl;
  else if (fmt == "tsv")
    rc.review_format = ReviewFormat::Tsv;
  else
    throw ConfigError("dataset.format must be jsonl or tsv");
  rc.k_core = static_cast<int>(doc.get_int("dataset.k_core", 10));
  auto split = doc.get_ints("dataset.split", {3, 1, 1});
  if (split.size() != 3) throw ConfigError("dataset.split must have three entries");
  rc.ratios = {static_cast<int>(split[0]), static_cast<int>(split[1]),
               static_cast<int>(split[2])};

  rc.factor_file = doc.get_string("factors.file", "");

  const std::string llm_kind = doc.get_string("llm.kind", "mock");
  if (llm_kind == "mock")
    rc.llm.kind = LlmBackendKind::Mock;
  else if (llm_kind == "http_chat")
    rc.llm.kind = LlmBackendKind::HttpChat;
  else
    throw ConfigError("llm.kind must be mock or http_chat");
  rc.llm.endpoint = doc.get_string("llm.endpoint", rc.llm.endpoint);
  rc.llm.model_name = doc.get_string("llm.model", rc.llm.model_name);
  rc.llm.api_key_env = doc.get_string("llm.api_key_env", rc.llm.api_key_env);
  rc.llm.max_retries = static_cast<int>(doc.get_int("llm.max_retries", rc.llm.max_retries));
  rc.llm.timeout_s = doc.get_double("llm.timeout_s", rc.llm.timeout_s);
  rc.llm.temperature = doc.get_double("llm.temperature", rc.llm.temperature);
  rc.llm.backoff_base_ms =
      static_cast<int>(doc.get_int("llm.backoff_base_ms", rc.llm.backoff_base_ms));
  rc.llm.mock_top_words =
      static_cast<int>(doc.get_int("llm.mock_top_words", rc.llm.mock_top_words));
  rc.llm.cache_dir = doc.get_string("llm.cache_dir", rc.llm.cache_dir);

  rc.n_max_reviews = static_cast<int>(doc.get_int("profiles.n_max_reviews", rc.n_max_reviews));
  rc.per_factor_calls = doc.get_bool("profiles.per_factor_calls", rc.per_factor_calls);
  rc.noise_ratio = doc.get_double("profiles.noise_ratio", rc.noise_ratio);

  const std::string enc_kind = doc.get_string("encoder.kind", "hash_mock");
  if (enc_kind == "hash_mock")
    rc.encoder.kind = EncoderConfig::Kind::HashMock;
  else if (enc_kind == "http_embeddings")
    rc.encoder.kind = EncoderConfig::Kind::HttpEmbeddings;
  else if (enc_kind == "file_import")
    rc.encoder.kind = EncoderConfig::Kind::FileImport;
  else
    throw ConfigError("encoder.kind must be hash_mock, http_embeddings, or file_import");
  rc.encoder.dim = static_cast<int>(doc.get_int(
      "encoder.dim", rc.encoder.kind == EncoderConfig::Kind::HttpEmbeddings ? 768 : 32));
  rc.encoder.endpoint = doc.get_string("encoder.endpoint", rc.encoder.endpoint);
  rc.encoder.model_name = doc.get_string("encoder.model", rc.encoder.model_name);
  rc.encoder.api_key_env = doc.get_string("encoder.api_key_env", rc.encoder.api_key_env);
  rc.encoder.path = doc.get_string("encoder.path", rc.encoder.path);
  rc.encoder.batch_size =
      static_cast<int>(doc.get_int("encoder.batch_size", rc.encoder.batch_size));
  rc.encoder.max_retries =
      static_cast<int>(doc.get_int("encoder.max_retries", rc.encoder.max_retries));

  rc.train.learning_rate = doc.get_double("train.learning_rate", rc.train.learning_rate);
  rc.train.batch_size = static_cast<int>(doc.get_int("train.batch_size", rc.train.batch_size));
  rc.train.l2_lambda = doc.get_double("train.l2_lambda", rc.train.l2_lambda);
  rc.train.n_keys = static_cast<int>(doc.get_int("train.n_keys", rc.train.n_keys));
  rc.train.layers = static_cast<int>(doc.get_int("train.layers", rc.train.layers));
  rc.train.include_layer0 = doc.get_bool("train.include_layer0", rc.train.include_layer0);
  rc.total_dim = static_cast<int>(doc.get_int("train.total_dim", 0));
  if (rc.total_dim < 0 || rc.total_dim % 2 != 0)
    throw ConfigError("train.total_dim must be a non-negative even number");
  const int branch_default = rc.total_dim > 0 ? rc.total_dim / 2 : 256;
  rc.train.d_g = static_cast<int>(doc.get_int("train.d_g", branch_default));
  rc.train.d_star = static_cast<int>(doc.get_int("train.d_star", branch_default));
  rc.train.max_epochs = static_cast<int>(doc.get_int("train.max_epochs", rc.train.max_epochs));
  rc.train.patience = static_cast<int>(doc.get_int("train.patience", rc.train.patience));
  rc.train.eval_interval =
      static_cast<int>(doc.get_int("train.eval_interval", rc.train.eval_interval));
  rc.train.eval_key_cap =
      static_cast<int>(doc.get_int("train.eval_key_cap", rc.train.eval_key_cap));
  const std::string pool = doc.get_string("train.pool", "max");
  if (pool == "max")
    rc.train.pool = PoolMode::Max;
  else if (pool == "avg")
    rc.train.pool = PoolMode::Avg;
  else
    throw ConfigError("train.pool must be max or avg");

  auto ks = doc.get_ints("eval.ks", {10, 20});
  rc.Ks.assign(ks.begin(), ks.end());
  auto seeds = doc.get_ints("eval.seeds", {1, 2, 3, 4, 5});
  rc.seeds.clear();
  for (int64_t s : seeds) rc.seeds.push_back(static_cast<uint64_t>(s));

  rc.ablate_variants = doc.get_array("ablate.variants", rc.ablate_variants);
  rc.mask_at_train = doc.get_bool("ablate.mask_at_train", rc.mask_at_train);
  rc.noise_ratios = doc.get_doubles("ablate.noise_ratios", rc.noise_ratios);
  auto ns = doc.get_ints("sweep.n", {1, 2, 3, 4, 5});
  rc.sweep_n.assign(ns.begin(), ns.end());

  rc.synth.num_users = static_cast<int>(doc.get_int("synth.users", rc.synth.num_users));
  rc.synth.num_items = static_cast<int>(doc.get_int("synth.items", rc.synth.num_items));
  rc.synth.dominant_weights =
      doc.get_doubles("synth.dominant_weights", rc.synth.dominant_weights);
  rc.synth.interactions_per_user =
      doc.get_double("synth.interactions_per_user", rc.synth.interactions_per_user);
  rc.synth.interaction_noise =
      doc.get_double("synth.interaction_noise", rc.synth.interaction_noise);
  rc.synth.filler_prob = doc.get_double("synth.filler_prob", rc.synth.filler_prob);
  rc.synth.terms_per_factor =
      static_cast<int>(doc.get_int("synth.terms_per_factor", rc.synth.terms_per_factor));
  rc.synth.min_interactions =
      static_cast<int>(doc.get_int("synth.min_interactions", rc.synth.min_interactions));
  rc.synth.shared_vocabulary =
      doc.get_bool("synth.shared_vocabulary", rc.synth.shared_vocabulary);

  rc.out_dir = doc.get_string("run.out_dir", rc.out_dir);
  rc.seed = static_cast<uint64_t>(doc.get_int("run.seed", static_cast<int64_t>(rc.seed)));
  rc.threads = static_cast<int>(doc.get_int("run.threads", rc.threads));
  rc.deterministic = doc.get_bool("run.deterministic", rc.deterministic);
  if (rc.deterministic) rc.threads = 1;
  rc.train.threads = rc.threads;
  rc.train.seed = rc.seed;

  rc.config_hash = doc.hash();
  return rc;
}

FactorSet RunConfig::load_factors() const {
  if (factor_file.empty()) return FactorSet::restaurant_default();
  return FactorSet::from_json_file(factor_file);
}

}  // namespace reform
