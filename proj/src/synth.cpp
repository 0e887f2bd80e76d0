#include "reform/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

using ordered_json = nlohmann::ordered_json;

namespace reform {

void SynthConfig::validate(int M) const {
  if (num_users <= 0 || num_items <= 0) throw ConfigError("synth: entity counts must be positive");
  if (!dominant_weights.empty() && static_cast<int>(dominant_weights.size()) != M)
    throw ConfigError("synth: dominant_weights length must equal the factor count");
  double sum = 0;
  for (double w : dominant_weights) {
    if (w < 0) throw ConfigError("synth: dominant_weights must be non-negative");
    sum += w;
  }
  if (!dominant_weights.empty() && sum <= 0)
    throw ConfigError("synth: dominant_weights must not all be zero");
  if (interactions_per_user <= 0 || interactions_per_user > num_items)
    throw ConfigError("synth: interactions_per_user out of range");
  if (interaction_noise < 0 || interaction_noise > 1)
    throw ConfigError("synth: interaction_noise must lie in [0, 1]");
  if (filler_prob < 0 || filler_prob > 1)
    throw ConfigError("synth: filler_prob must lie in [0, 1]");
  if (terms_per_factor < 1) throw ConfigError("synth: terms_per_factor must be >= 1");
  if (paired_preference) {
    int positive = 0;
    for (double w : dominant_weights)
      if (w > 0) ++positive;
    if (!dominant_weights.empty() && positive < 2)
      throw ConfigError("synth: paired_preference needs at least two positive dominant_weights");
    if (dominant_weights.empty() && M < 2)
      throw ConfigError("synth: paired_preference needs at least two factors");
  }
}

std::vector<std::string> synth_vocabulary(int factor, int terms) {
  static const std::vector<std::vector<std::string>> themed = {
      {"sushi", "tacos", "ramen", "barbecue", "curry", "pasta", "pho", "falafel"},
      {"spicy", "smoky", "tangy", "savory", "buttery", "zesty", "herbal", "fiery"},
      {"cozy", "lively", "hushed", "rustic", "elegant", "breezy", "romantic", "airy"},
      {"cheap", "affordable", "pricey", "upscale", "bargain", "lavish", "modest", "steep"},
      {"breakfast", "brunch", "lunchtime", "dinnertime", "latenight", "midday", "sunset", "dawn"},
      {"instant", "quick", "short", "lengthy", "sluggish", "endless", "speedy", "brisk"},
      {"family", "buddies", "date", "coworkers", "kids", "solo", "partner", "crew"},
  };
  // factor < 0: opinion words that read naturally against any factor, used as
  // the shared vocabulary.
  static const std::vector<std::string> opinion = {"stellar",     "decent", "mediocre", "awful",
                                                   "charming",    "superb", "odd",      "plain",
                                                   "memorable",   "bland",  "quirky",   "refined",
                                                   "forgettable", "bold",   "gentle",   "stark"};
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(terms));
  const auto* pool = factor < 0 ? &opinion
                     : factor < static_cast<int>(themed.size())
                         ? &themed[static_cast<size_t>(factor)]
                         : nullptr;
  for (int t = 0; t < terms; ++t) {
    if (pool && t < static_cast<int>(pool->size()))
      out.push_back((*pool)[static_cast<size_t>(t)]);
    else if (factor < 0)
      out.push_back("sharedterm" + std::to_string(t));
    else
      out.push_back("f" + std::to_string(factor) + "term" + std::to_string(t));
  }
  return out;
}

namespace {

int pick_weighted(Rng& rng, const std::vector<double>& weights) {
  double sum = 0;
  for (double w : weights) sum += w;
  double r = rng.uniform01() * sum;
  for (size_t k = 0; k < weights.size(); ++k) {
    r -= weights[k];
    if (r < 0) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::string synth_user_id(int u) { return "u" + std::to_string(u); }
std::string synth_item_id(int i) { return "i" + std::to_string(i); }

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg, const FactorSet& factors, uint64_t seed) {
  factors.validate();
  const int M = factors.size();
  cfg.validate(M);

  std::vector<std::vector<std::string>> vocab;
  vocab.reserve(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m)
    vocab.push_back(synth_vocabulary(cfg.shared_vocabulary ? -1 : m, cfg.terms_per_factor));

  std::vector<double> weights = cfg.dominant_weights;
  if (weights.empty()) weights.assign(static_cast<size_t>(M), 1.0);

  SynthResult out;
  auto& truth = out.truth;

  // Items: one term per factor.
  Rng item_rng(derive_seed(seed, "synth", 0));
  truth.item_terms.resize(static_cast<size_t>(cfg.num_items));
  for (int i = 0; i < cfg.num_items; ++i) {
    auto& terms = truth.item_terms[static_cast<size_t>(i)];
    terms.reserve(static_cast<size_t>(M));
    for (int m = 0; m < M; ++m)
      terms.push_back(vocab[static_cast<size_t>(m)]
                           [item_rng.uniform_int(vocab[static_cast<size_t>(m)].size())]);
  }

  // Users: dominant factor and preferred term; in paired mode also a second
  // factor/term the item has to satisfy.
  Rng user_rng(derive_seed(seed, "synth", 1));
  truth.user_dominant.resize(static_cast<size_t>(cfg.num_users));
  truth.user_term.resize(static_cast<size_t>(cfg.num_users));
  if (cfg.paired_preference) {
    truth.user_secondary.resize(static_cast<size_t>(cfg.num_users));
    truth.user_term2.resize(static_cast<size_t>(cfg.num_users));
  }
  for (int u = 0; u < cfg.num_users; ++u) {
    const int m = pick_weighted(user_rng, weights);
    truth.user_dominant[static_cast<size_t>(u)] = m;
    truth.user_term[static_cast<size_t>(u)] =
        vocab[static_cast<size_t>(m)][user_rng.uniform_int(vocab[static_cast<size_t>(m)].size())];
    if (cfg.paired_preference) {
      std::vector<double> rest_w = weights;
      rest_w[static_cast<size_t>(m)] = 0;
      const int m2 = pick_weighted(user_rng, rest_w);
      truth.user_secondary[static_cast<size_t>(u)] = m2;
      truth.user_term2[static_cast<size_t>(u)] =
          vocab[static_cast<size_t>(m2)]
               [user_rng.uniform_int(vocab[static_cast<size_t>(m2)].size())];
    }
  }

  // Interactions: Bernoulli per pair with probabilities calibrated so the
  // expected count per user is interactions_per_user, split (1−noise)/noise
  // between preference-matching and arbitrary items.
  bool warned_clamp = false;
  int64_t review_id = 0;
  for (int u = 0; u < cfg.num_users; ++u) {
    const int m_star = truth.user_dominant[static_cast<size_t>(u)];
    const std::string& term = truth.user_term[static_cast<size_t>(u)];

    std::vector<int> matching, rest;
    std::vector<char> in_pool(static_cast<size_t>(cfg.num_items), 0);
    for (int i = 0; i < cfg.num_items; ++i) {
      const auto& item = truth.item_terms[static_cast<size_t>(i)];
      bool liked = item[static_cast<size_t>(m_star)] == term;
      if (liked && cfg.paired_preference) {
        const int m2 = truth.user_secondary[static_cast<size_t>(u)];
        liked = item[static_cast<size_t>(m2)] == truth.user_term2[static_cast<size_t>(u)];
      }
      in_pool[static_cast<size_t>(i)] = liked ? 1 : 0;
      if (liked)
        matching.push_back(i);
      else
        rest.push_back(i);
    }
    double p_match =
        matching.empty() ? 0.0
                         : (1.0 - cfg.interaction_noise) * cfg.interactions_per_user /
                               static_cast<double>(matching.size());
    double p_rest = rest.empty() ? 0.0
                                 : cfg.interaction_noise * cfg.interactions_per_user /
                                       static_cast<double>(rest.size());
    if ((p_match > 1.0 || p_rest > 1.0) && !warned_clamp) {
      log_warn("synth: interaction probability clamped to 1; expected counts will fall short");
      warned_clamp = true;
    }
    p_match = std::min(p_match, 1.0);
    p_rest = std::min(p_rest, 1.0);

    Rng rng(derive_seed(seed, "synth", 2, static_cast<uint64_t>(u)));
    std::vector<int> chosen;
    for (int i : matching)
      if (rng.uniform01() < p_match) chosen.push_back(i);
    for (int i : rest)
      if (rng.uniform01() < p_rest) chosen.push_back(i);

    // Floor: keep every user viable through k-core and the splitter.
    if (static_cast<int>(chosen.size()) < cfg.min_interactions) {
      auto add_missing = [&chosen, &cfg](const std::vector<int>& pool) {
        for (int i : pool) {
          if (static_cast<int>(chosen.size()) >= cfg.min_interactions) break;
          if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
        }
      };
      add_missing(matching);
      add_missing(rest);
    }
    std::sort(chosen.begin(), chosen.end());

    // One review per interaction. Filler chatter about another attribute
    // factor quotes the item's real term (honest but off-preference talk);
    // chatter about a factor nobody cares about has no ground truth behind
    // it, so it draws a random term instead.
    for (int i : chosen) {
      const auto& terms = truth.item_terms[static_cast<size_t>(i)];
      std::string text = "I loved the " + factors.names[static_cast<size_t>(m_star)] + ": " +
                         terms[static_cast<size_t>(m_star)] + ".";
      for (int m = 0; m < M; ++m) {
        if (m == m_star) continue;
        if (rng.uniform01() < cfg.filler_prob) {
          const auto& words = vocab[static_cast<size_t>(m)];
          const std::string& said = weights[static_cast<size_t>(m)] > 0
                                        ? terms[static_cast<size_t>(m)]
                                        : words[rng.uniform_int(words.size())];
          text += " The " + factors.names[static_cast<size_t>(m)] + " was " + said + " again.";
        }
      }

      Review r;
      r.id = review_id++;
      r.user_id = synth_user_id(u);
      r.item_id = synth_item_id(i);
      r.text = std::move(text);
      const bool match = terms[static_cast<size_t>(m_star)] == term;
      r.rating = match ? 5.0 : 3.0 + static_cast<double>(rng.uniform_int(3));
      r.timestamp = r.id;
      out.reviews.push_back(std::move(r));
      ++out.interactions;
    }
  }
  return out;
}

void write_ground_truth(const std::string& path, const SynthGroundTruth& truth,
                        const FactorSet& factors) {
  ordered_json j;
  j["users"] = ordered_json::array();
  for (size_t u = 0; u < truth.user_dominant.size(); ++u) {
    ordered_json e;
    e["id"] = "u" + std::to_string(u);
    e["dominant_factor"] = factors.names[static_cast<size_t>(truth.user_dominant[u])];
    e["dominant_index"] = truth.user_dominant[u];
    e["term"] = truth.user_term[u];
    j["users"].push_back(e);
  }
  j["items"] = ordered_json::array();
  for (size_t i = 0; i < truth.item_terms.size(); ++i) {
    ordered_json e;
    e["id"] = "i" + std::to_string(i);
    ordered_json terms = ordered_json::object();
    for (int m = 0; m < factors.size(); ++m)
      terms[factors.names[static_cast<size_t>(m)]] = truth.item_terms[i][static_cast<size_t>(m)];
    e["terms"] = terms;
    j["items"].push_back(e);
  }
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace reform
