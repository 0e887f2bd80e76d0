#pragma once

#include "reform/common.hpp"

#include <optional>
#include <unordered_map>

namespace reform {

struct Review {
  int64_t id = -1;  // ordinal position in the source corpus
  std::string user_id;
  std::string item_id;
  std::string text;
  std::optional<double> rating;
  std::optional<int64_t> timestamp;
};

enum class ReviewFormat { Jsonl, Tsv };

struct LoadStats {
  int64_t total_lines = 0;
  int64_t malformed = 0;
  int64_t duplicates = 0;  // repeated (user, item, timestamp) triples
};

// Parses a review corpus line by line. Malformed lines are counted, not
// silently dropped; more than 50% malformed is a fatal format error.
std::vector<Review> load_reviews(const std::string& path, ReviewFormat format,
                                 LoadStats* stats = nullptr);

void write_reviews_jsonl(const std::string& path, const std::vector<Review>& reviews);

// Iteratively removes users and items with fewer than k distinct interactions
// until a fixed point. All review texts of surviving (user, item) pairs are kept.
std::vector<Review> k_core_filter(const std::vector<Review>& reviews, int k);

struct IdMap {
  std::unordered_map<std::string, int> users;
  std::unordered_map<std::string, int> items;
  std::vector<std::string> user_names;  // dense index -> original id
  std::vector<std::string> item_names;

  int num_users() const { return static_cast<int>(user_names.size()); }
  int num_items() const { return static_cast<int>(item_names.size()); }
};

// Dense indices in first-appearance order over the review list.
IdMap build_id_map(const std::vector<Review>& reviews);

void write_id_map(const std::string& path, const IdMap& ids);
IdMap read_id_map(const std::string& path);

struct Interaction {
  int user = 0;
  int item = 0;
};

struct SplitRatios {
  int train = 3;
  int val = 1;
  int test = 1;
};

struct DataSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> val;
  std::vector<Interaction> test;
};

// Per-user random partition of the distinct (user, item) pairs. Validation and
// test sizes floor to their ratio share; remainders go to train, so every user
// keeps at least one training interaction.
DataSplit split_interactions(const std::vector<Review>& reviews, const IdMap& ids,
                             SplitRatios ratios, uint64_t seed);

void write_split_tsv(const std::string& path, const DataSplit& split);
DataSplit read_split_tsv(const std::string& path);

struct InteractionGraph {
  int num_users = 0;
  int num_items = 0;
  // CSR user->items and the transposed item->users view; columns sorted ascending.
  std::vector<int64_t> user_offsets;
  std::vector<int32_t> user_items;
  std::vector<int64_t> item_offsets;
  std::vector<int32_t> item_users;
  std::vector<int32_t> user_degree;
  std::vector<int32_t> item_degree;
  // 1/sqrt(degree); zero for isolated nodes so propagation stays finite.
  std::vector<double> user_norm;
  std::vector<double> item_norm;

  std::span<const int32_t> items_of(int u) const {
    return {user_items.data() + user_offsets[u],
            static_cast<size_t>(user_offsets[u + 1] - user_offsets[u])};
  }
  std::span<const int32_t> users_of(int i) const {
    return {item_users.data() + item_offsets[i],
            static_cast<size_t>(item_offsets[i + 1] - item_offsets[i])};
  }
  bool has_edge(int u, int i) const;
  int64_t num_edges() const { return static_cast<int64_t>(user_items.size()); }
};

// Builds the bipartite graph from the TRAIN interactions only.
InteractionGraph build_graph(const DataSplit& split, int num_users, int num_items);

}  // namespace reform
