#include "reform/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

using json = nlohmann::json;

namespace reform {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_jsonl_review(const std::string& line, Review* out) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  if (!j.contains("user_id") || !j.contains("item_id") || !j.contains("text")) return false;
  if (!j["user_id"].is_string() || !j["item_id"].is_string() || !j["text"].is_string())
    return false;
  out->user_id = j["user_id"].get<std::string>();
  out->item_id = j["item_id"].get<std::string>();
  out->text = j["text"].get<std::string>();
  if (j.contains("rating") && j["rating"].is_number()) {
    double r = j["rating"].get<double>();
    if (r < 1.0 || r > 5.0) return false;
    out->rating = r;
  }
  if (j.contains("timestamp") && j["timestamp"].is_number_integer())
    out->timestamp = j["timestamp"].get<int64_t>();
  return !out->user_id.empty() && !out->item_id.empty() && !trim(out->text).empty();
}

// user_id \t item_id \t text [\t rating [\t timestamp]]
bool parse_tsv_review(const std::string& line, Review* out) {
  std::vector<std::string> cols;
  size_t start = 0;
  for (;;) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (cols.size() < 3 || cols.size() > 5) return false;
  out->user_id = cols[0];
  out->item_id = cols[1];
  out->text = cols[2];
  try {
    if (cols.size() >= 4 && !cols[3].empty()) {
      double r = std::stod(cols[3]);
      if (r < 1.0 || r > 5.0) return false;
      out->rating = r;
    }
    if (cols.size() == 5 && !cols[4].empty()) out->timestamp = std::stoll(cols[4]);
  } catch (const std::exception&) {
    return false;
  }
  return !out->user_id.empty() && !out->item_id.empty() && !trim(out->text).empty();
}

}  // namespace

std::vector<Review> load_reviews(const std::string& path, ReviewFormat format,
                                 LoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open reviews file: " + path);

  std::vector<Review> reviews;
  LoadStats local;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++local.total_lines;
    Review r;
    bool ok = (format == ReviewFormat::Jsonl) ? parse_jsonl_review(line, &r)
                                              : parse_tsv_review(line, &r);
    if (!ok) {
      ++local.malformed;
      continue;
    }
    std::string key = r.user_id + '\x1f' + r.item_id + '\x1f' +
                      (r.timestamp ? std::to_string(*r.timestamp) : std::string("-"));
    if (!seen.insert(key).second) {
      ++local.duplicates;
      continue;
    }
    r.id = static_cast<int64_t>(reviews.size());
    reviews.push_back(std::move(r));
  }
  if (local.total_lines > 0 && local.malformed * 2 > local.total_lines) {
    throw FormatError("more than 50% malformed lines in " + path + " (" +
                      std::to_string(local.malformed) + "/" + std::to_string(local.total_lines) +
                      ")");
  }
  if (local.malformed > 0)
    log_warn(std::to_string(local.malformed) + " malformed line(s) skipped in " + path);
  if (stats) *stats = local;
  return reviews;
}

void write_reviews_jsonl(const std::string& path, const std::vector<Review>& reviews) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write reviews file: " + path);
  for (const auto& r : reviews) {
    json j;
    j["user_id"] = r.user_id;
    j["item_id"] = r.item_id;
    j["text"] = r.text;
    if (r.rating) j["rating"] = *r.rating;
    if (r.timestamp) j["timestamp"] = *r.timestamp;
    out << j.dump() << '\n';
  }
}

std::vector<Review> k_core_filter(const std::vector<Review>& reviews, int k) {
  if (k < 1) throw ConfigError("k-core threshold must be >= 1");

  std::unordered_map<std::string, std::set<std::string>> user_nbrs, item_nbrs;
  for (const auto& r : reviews) {
    user_nbrs[r.user_id].insert(r.item_id);
    item_nbrs[r.item_id].insert(r.user_id);
  }

  // Alternate peeling passes until neither side changes.
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = user_nbrs.begin(); it != user_nbrs.end();) {
      if (static_cast<int>(it->second.size()) < k) {
        for (const auto& item : it->second) {
          auto jt = item_nbrs.find(item);
          if (jt != item_nbrs.end()) jt->second.erase(it->first);
        }
        it = user_nbrs.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    for (auto it = item_nbrs.begin(); it != item_nbrs.end();) {
      if (static_cast<int>(it->second.size()) < k) {
        for (const auto& user : it->second) {
          auto jt = user_nbrs.find(user);
          if (jt != user_nbrs.end()) jt->second.erase(it->first);
        }
        it = item_nbrs.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }

  std::vector<Review> surviving;
  for (const auto& r : reviews) {
    auto it = user_nbrs.find(r.user_id);
    if (it != user_nbrs.end() && it->second.count(r.item_id)) surviving.push_back(r);
  }
  if (surviving.empty() && !reviews.empty())
    log_warn("k-core filtering with k=" + std::to_string(k) + " removed every interaction");
  return surviving;
}

IdMap build_id_map(const std::vector<Review>& reviews) {
  IdMap ids;
  for (const auto& r : reviews) {
    if (ids.users.emplace(r.user_id, static_cast<int>(ids.user_names.size())).second)
      ids.user_names.push_back(r.user_id);
    if (ids.items.emplace(r.item_id, static_cast<int>(ids.item_names.size())).second)
      ids.item_names.push_back(r.item_id);
  }
  return ids;
}

void write_id_map(const std::string& path, const IdMap& ids) {
  json users = json::object(), items = json::object();
  for (int u = 0; u < ids.num_users(); ++u) users[ids.user_names[u]] = u;
  for (int i = 0; i < ids.num_items(); ++i) items[ids.item_names[i]] = i;
  json j;
  j["users"] = users;
  j["items"] = items;
  write_text_file(path, j.dump(2) + "\n");
}

IdMap read_id_map(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("users") || !j.contains("items"))
    throw FormatError("invalid id-map file: " + path);
  IdMap ids;
  ids.user_names.resize(j["users"].size());
  ids.item_names.resize(j["items"].size());
  for (auto& [name, idx] : j["users"].items()) {
    int v = idx.get<int>();
    ids.users[name] = v;
    ids.user_names[v] = name;
  }
  for (auto& [name, idx] : j["items"].items()) {
    int v = idx.get<int>();
    ids.items[name] = v;
    ids.item_names[v] = name;
  }
  return ids;
}

DataSplit split_interactions(const std::vector<Review>& reviews, const IdMap& ids,
                             SplitRatios ratios, uint64_t seed) {
  const int denom = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 1 || ratios.val < 0 || ratios.test < 0)
    throw ConfigError("invalid split ratios");

  // Distinct (user, item) pairs per user, in first-appearance order.
  std::vector<std::vector<int>> per_user(ids.num_users());
  std::vector<std::unordered_set<int>> seen(ids.num_users());
  for (const auto& r : reviews) {
    int u = ids.users.at(r.user_id);
    int i = ids.items.at(r.item_id);
    if (seen[u].insert(i).second) per_user[u].push_back(i);
  }

  DataSplit split;
  for (int u = 0; u < ids.num_users(); ++u) {
    auto items = per_user[u];
    if (items.empty()) continue;
    Rng rng(derive_seed(seed, "split", static_cast<uint64_t>(u)));
    rng.shuffle(items);
    const int n = static_cast<int>(items.size());
    const int n_val = n * ratios.val / denom;
    const int n_test = n * ratios.test / denom;
    const int n_train = n - n_val - n_test;
    for (int idx = 0; idx < n; ++idx) {
      Interaction inter{u, items[idx]};
      if (idx < n_train)
        split.train.push_back(inter);
      else if (idx < n_train + n_val)
        split.val.push_back(inter);
      else
        split.test.push_back(inter);
    }
  }
  return split;
}

void write_split_tsv(const std::string& path, const DataSplit& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write split file: " + path);
  auto dump = [&](const std::vector<Interaction>& v, const char* tag) {
    for (const auto& x : v) out << x.user << '\t' << x.item << '\t' << tag << '\n';
  };
  dump(split.train, "train");
  dump(split.val, "val");
  dump(split.test, "test");
}

DataSplit read_split_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open split file: " + path);
  DataSplit split;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    Interaction x;
    std::string tag;
    if (!(ss >> x.user >> x.item >> tag))
      throw FormatError("bad split line " + std::to_string(lineno) + " in " + path);
    if (tag == "train")
      split.train.push_back(x);
    else if (tag == "val")
      split.val.push_back(x);
    else if (tag == "test")
      split.test.push_back(x);
    else
      throw FormatError("unknown split tag '" + tag + "' at line " + std::to_string(lineno) +
                        " in " + path);
  }
  return split;
}

bool InteractionGraph::has_edge(int u, int i) const {
  auto row = items_of(u);
  return std::binary_search(row.begin(), row.end(), static_cast<int32_t>(i));
}

InteractionGraph build_graph(const DataSplit& split, int num_users, int num_items) {
  if (split.train.empty()) throw ConfigError("cannot build interaction graph: train set empty");

  InteractionGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  g.user_degree.assign(num_users, 0);
  g.item_degree.assign(num_items, 0);
  for (const auto& x : split.train) {
    ++g.user_degree[x.user];
    ++g.item_degree[x.item];
  }
  g.user_offsets.assign(num_users + 1, 0);
  g.item_offsets.assign(num_items + 1, 0);
  for (int u = 0; u < num_users; ++u) g.user_offsets[u + 1] = g.user_offsets[u] + g.user_degree[u];
  for (int i = 0; i < num_items; ++i) g.item_offsets[i + 1] = g.item_offsets[i] + g.item_degree[i];
  g.user_items.resize(split.train.size());
  g.item_users.resize(split.train.size());
  std::vector<int64_t> ucur(g.user_offsets.begin(), g.user_offsets.end() - 1);
  std::vector<int64_t> icur(g.item_offsets.begin(), g.item_offsets.end() - 1);
  for (const auto& x : split.train) {
    g.user_items[ucur[x.user]++] = x.item;
    g.item_users[icur[x.item]++] = x.user;
  }
  for (int u = 0; u < num_users; ++u)
    std::sort(g.user_items.begin() + g.user_offsets[u], g.user_items.begin() + g.user_offsets[u + 1]);
  for (int i = 0; i < num_items; ++i)
    std::sort(g.item_users.begin() + g.item_offsets[i], g.item_users.begin() + g.item_offsets[i + 1]);

  g.user_norm.resize(num_users);
  g.item_norm.resize(num_items);
  for (int u = 0; u < num_users; ++u)
    g.user_norm[u] = g.user_degree[u] > 0 ? 1.0 / std::sqrt(static_cast<double>(g.user_degree[u])) : 0.0;
  for (int i = 0; i < num_items; ++i)
    g.item_norm[i] = g.item_degree[i] > 0 ? 1.0 / std::sqrt(static_cast<double>(g.item_degree[i])) : 0.0;
  return g;
}

}  // namespace reform
