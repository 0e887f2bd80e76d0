#include "reform/common.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace reform {

namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_log_mutex;
}  // namespace

void set_log_quiet(bool quiet) { g_quiet = quiet; }

void log_warn(const std::string& msg) {
  if (g_quiet) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::fprintf(stderr, "[warn] %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
  if (g_quiet) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

uint64_t derive_seed(uint64_t root, std::string_view stream) {
  return splitmix64(root ^ fnv1a64(stream));
}

uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t a) {
  return splitmix64(derive_seed(root, stream) ^ splitmix64(a ^ 0xa5a5a5a5a5a5a5a5ULL));
}

uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t a, uint64_t b) {
  return splitmix64(derive_seed(root, stream, a) ^ splitmix64(b ^ 0x5a5a5a5a5a5a5a5aULL));
}

uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t a, uint64_t b, uint64_t c) {
  return splitmix64(derive_seed(root, stream, a, b) ^ splitmix64(c ^ 0x3c3c3c3c3c3c3c3cULL));
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  if (k >= n) {
    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = i;
    shuffle(all);
    return all;
  }
  // Partial Fisher-Yates over an index map; O(k) memory on the map side.
  std::vector<size_t> picked;
  picked.reserve(k);
  std::unordered_map<size_t, size_t> moved;
  size_t remaining = n;
  for (size_t i = 0; i < k; ++i) {
    size_t j = static_cast<size_t>(uniform_int(remaining));
    auto it = moved.find(j);
    size_t value = (it == moved.end()) ? j : it->second;
    size_t last = remaining - 1;
    auto lt = moved.find(last);
    moved[j] = (lt == moved.end()) ? last : lt->second;
    picked.push_back(value);
    --remaining;
  }
  return picked;
}

std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return std::string(buf);
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t nthreads = std::min<size_t>(static_cast<size_t>(threads), n);
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace reform
