// Python bindings for the numeric core: graph propagation, factor attention,
// ranking metrics, the paired t-test, and the deterministic text encoder.
// Everything crosses the boundary as numpy arrays or plain containers.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reform/evaluation.hpp"
#include "reform/graph_conv.hpp"
#include "reform/mfa.hpp"
#include "reform/profile_gen.hpp"
#include "reform/text_encoder.hpp"
#include "reform/trainer.hpp"

#include <unordered_set>

namespace py = pybind11;
using namespace reform;

namespace {

InteractionGraph graph_from_edges(const std::vector<std::pair<int, int>>& edges, int num_users,
                                  int num_items) {
  DataSplit split;
  split.train.reserve(edges.size());
  for (const auto& [u, i] : edges) split.train.push_back({u, i});
  return build_graph(split, num_users, num_items);
}

}  // namespace

PYBIND11_MODULE(_reform, m) {
  m.doc() = "Numeric core bindings: propagation, factor attention, metrics.";

  m.def(
      "propagate",
      [](const Mat& users0, const Mat& items0, const std::vector<std::pair<int, int>>& edges,
         int layers, bool include_layer0) {
        InteractionGraph g =
            graph_from_edges(edges, static_cast<int>(users0.rows()),
                             static_cast<int>(items0.rows()));
        PropagatedEmbeddings pe = propagate(g, users0, items0, layers, include_layer0);
        return py::make_tuple(pe.users, pe.items);
      },
      py::arg("users0"), py::arg("items0"), py::arg("edges"), py::arg("layers") = 3,
      py::arg("include_layer0") = false,
      "Symmetric-normalized bipartite propagation; returns the layer-summed "
      "(user, item) tables.");

  m.def(
      "mfa_forward",
      [](const Mat& Q, const std::vector<Mat>& keys, const Mat& V, bool avg) {
        MfaForward f = mfa_forward(Q, keys, V, avg ? PoolMode::Avg : PoolMode::Max);
        return py::make_tuple(f.output, f.pooled, f.argmax);
      },
      py::arg("Q"), py::arg("keys"), py::arg("V"), py::arg("avg") = false,
      "Multi-key cross attention; returns (output M×d*, pooled map M×M, argmax "
      "sources M×M; argmax is -1 under mean pooling).");

  m.def("factor_average", &factor_average, py::arg("output"),
        "Mean over the M factor rows -> the anchor embedding.");

  m.def("bpr_loss", &bpr_loss, py::arg("pos"), py::arg("neg"),
        "Numerically stable -ln sigmoid(pos - neg).");

  m.def(
      "recall_at_k",
      [](const std::vector<int>& ranked, const std::vector<int>& relevant, int K) {
        std::unordered_set<int> rel(relevant.begin(), relevant.end());
        return recall_at_k(ranked, rel, K);
      },
      py::arg("ranked"), py::arg("relevant"), py::arg("K"));

  m.def(
      "ndcg_at_k",
      [](const std::vector<int>& ranked, const std::vector<int>& relevant, int K) {
        std::unordered_set<int> rel(relevant.begin(), relevant.end());
        return ndcg_at_k(ranked, rel, K);
      },
      py::arg("ranked"), py::arg("relevant"), py::arg("K"));

  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        TTestResult r = paired_t_test(a, b);
        py::dict d;
        d["t"] = r.t;
        d["df"] = r.df;
        d["p"] = r.p;
        d["degenerate"] = r.degenerate;
        return d;
      },
      py::arg("a"), py::arg("b"), "Two-sided paired t-test over aligned samples.");

  m.def("regularized_incomplete_beta", &regularized_incomplete_beta, py::arg("a"), py::arg("b"),
        py::arg("x"));

  m.def(
      "hash_encode",
      [](const std::vector<std::string>& texts, int d, uint64_t seed) {
        HashMockEncoder enc(d, seed);
        Mat out(static_cast<Eigen::Index>(texts.size()), d);
        for (size_t i = 0; i < texts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) =
            enc.encode(texts[i]).transpose();
        return out;
      },
      py::arg("texts"), py::arg("d") = 32, py::arg("seed") = 0,
      "Deterministic mock sentence encoder: L2-normalized sum of per-token "
      "directions.");

  m.def(
      "inject_noise",
      [](const std::vector<std::string>& own, const std::vector<std::string>& pool, double ratio,
         uint64_t seed) {
        std::vector<Review> own_r, pool_r;
        int64_t id = 0;
        for (const auto& t : own) own_r.push_back({id++, "u", "i", t, {}, {}});
        for (const auto& t : pool) pool_r.push_back({id++, "u2", "i", t, {}, {}});
        std::vector<Review> noised = inject_noise(own_r, pool_r, ratio, seed);
        std::vector<std::string> out;
        out.reserve(noised.size());
        for (const auto& r : noised) out.push_back(r.text);
        return out;
      },
      py::arg("own"), py::arg("pool"), py::arg("ratio"), py::arg("seed") = 0,
      "Replaces round(ratio*len(own)) entries with texts drawn from the pool.");

  m.def(
      "kcore",
      [](const std::vector<std::pair<std::string, std::string>>& pairs, int k) {
        std::vector<Review> reviews;
        int64_t id = 0;
        for (const auto& [u, i] : pairs) reviews.push_back({id++, u, i, "", {}, {}});
        std::vector<Review> kept = k_core_filter(reviews, k);
        std::vector<std::pair<std::string, std::string>> out;
        out.reserve(kept.size());
        for (const auto& r : kept) out.emplace_back(r.user_id, r.item_id);
        return out;
      },
      py::arg("pairs"), py::arg("k"),
      "Iterative k-core filter over (user, item) pairs; returns surviving pairs.");
}
