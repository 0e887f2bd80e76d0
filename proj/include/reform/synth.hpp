#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"
#include "reform/profile_gen.hpp"

namespace reform {

// Synthetic review corpus with planted factor preferences: every user favors
// one dominant factor and a preferred term for it; items carry one term per
// factor; interactions are biased toward items matching the user's preference.
struct SynthConfig {
  int num_users = 200;
  int num_items = 300;
  std::vector<double> dominant_weights;  // per factor; empty → uniform
  double interactions_per_user = 20.0;   // expected interactions per user
  double interaction_noise = 0.1;        // share of interactions that ignore the preference
  double filler_prob = 0.35;             // chance a review mentions each non-dominant factor
  int terms_per_factor = 6;
  int min_interactions = 2;  // floor enforced per user (keeps k-core from emptying)
  // With a shared vocabulary every factor draws terms from one opinion-word
  // list, so a term only identifies an item together with the factor it was
  // said about; per-factor vocabularies make terms globally unambiguous.
  bool shared_vocabulary = false;
  // Paired preference: a user likes an item only when it carries their term
  // on the dominant factor AND their second term on a second factor (drawn
  // from the remaining positive-weight factors). Taste pools become close to
  // user-specific instead of being shared by a cohort.
  bool paired_preference = false;

  void validate(int M) const;
};

struct SynthGroundTruth {
  std::vector<int> user_dominant;                    // factor index per user
  std::vector<std::string> user_term;                // preferred term per user
  std::vector<int> user_secondary;                   // second factor (paired mode; else empty)
  std::vector<std::string> user_term2;               // second term (paired mode; else empty)
  std::vector<std::vector<std::string>> item_terms;  // item × factor
};

struct SynthResult {
  std::vector<Review> reviews;  // one per interaction; user/item ids "u…"/"i…"
  SynthGroundTruth truth;
  int64_t interactions = 0;
};

// Vocabulary for factor m (themed lists for the first factors, generated
// otherwise); deterministic.
std::vector<std::string> synth_vocabulary(int factor, int terms);

SynthResult generate_synthetic(const SynthConfig& cfg, const FactorSet& factors, uint64_t seed);

void write_ground_truth(const std::string& path, const SynthGroundTruth& truth,
                        const FactorSet& factors);

}  // namespace reform
