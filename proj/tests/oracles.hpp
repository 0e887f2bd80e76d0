// Independent reference implementations the production code is checked
// against. Everything here is written the slow, obvious way on purpose:
// dense matrices, explicit loops, no shared helpers with src/.
#pragma once

#include "reform/dataset.hpp"
#include "reform/trainer.hpp"

#include <cmath>
#include <functional>
#include <set>
#include <vector>

namespace oracle {

using reform::Mat;
using reform::Vec;

// Dense symmetric-normalized adjacency over the stacked [users; items] index
// space, powered L times; returns the layer sum.
inline std::pair<Mat, Mat> dense_propagate(const std::vector<std::pair<int, int>>& edges,
                                           const Mat& users0, const Mat& items0, int L,
                                           bool include_layer0) {
  const int U = static_cast<int>(users0.rows());
  const int I = static_cast<int>(items0.rows());
  const int N = U + I;
  Mat A = Mat::Zero(N, N);
  std::vector<int> deg(N, 0);
  for (const auto& [u, i] : edges) {
    ++deg[u];
    ++deg[U + i];
  }
  for (const auto& [u, i] : edges) {
    const double w = 1.0 / (std::sqrt(static_cast<double>(deg[u])) *
                            std::sqrt(static_cast<double>(deg[U + i])));
    A(u, U + i) = w;
    A(U + i, u) = w;
  }
  Mat E(N, users0.cols());
  E.topRows(U) = users0;
  E.bottomRows(I) = items0;

  Mat acc = include_layer0 ? E : Mat(Mat::Zero(N, E.cols()));
  Mat cur = E;
  for (int l = 1; l <= L; ++l) {
    cur = A * cur;
    acc += cur;
  }
  return {acc.topRows(U), acc.bottomRows(I)};
}

// Brute-force multi-key attention: plain exp softmax, explicit max loop,
// explicit matrix product.
inline Mat brute_mfa(const Mat& Q, const std::vector<Mat>& keys, const Mat& V, bool avg) {
  const int M = static_cast<int>(Q.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  std::vector<Mat> maps;
  for (const Mat& K : keys) {
    Mat logits = Q * K.transpose() * scale;
    Mat A(M, M);
    for (int r = 0; r < M; ++r) {
      double denom = 0;
      for (int c = 0; c < M; ++c) denom += std::exp(logits(r, c));
      for (int c = 0; c < M; ++c) A(r, c) = std::exp(logits(r, c)) / denom;
    }
    maps.push_back(A);
  }
  Mat pooled = Mat::Zero(M, M);
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) {
      if (avg) {
        double s = 0;
        for (const Mat& A : maps) s += A(r, c);
        pooled(r, c) = s / static_cast<double>(maps.size());
      } else {
        double best = maps[0](r, c);
        for (const Mat& A : maps) best = std::max(best, A(r, c));
        pooled(r, c) = best;
      }
    }
  Mat out = Mat::Zero(M, V.cols());
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < static_cast<int>(V.cols()); ++c)
      for (int k = 0; k < M; ++k) out(r, c) += pooled(r, k) * V(k, c);
  return out;
}

// Central finite differences of a scalar function over every entry of every
// model tensor; returns the max relative error against the analytic gradient,
// with |analytic| + |numeric| below `floor` treated as agreement.
inline double fd_max_rel_err(reform::ModelParams& params,
                             const std::function<double()>& loss_fn,
                             const std::vector<Mat>& analytic, double h = 1e-4,
                             double floor = 1e-8) {
  double worst = 0;
  auto tensors = params.tensors();
  for (size_t t = 0; t < tensors.size(); ++t) {
    Mat& W = *tensors[t];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        const double keep = W(r, c);
        W(r, c) = keep + h;
        const double up = loss_fn();
        W(r, c) = keep - h;
        const double down = loss_fn();
        W(r, c) = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double exact = analytic[t](r, c);
        const double denom = std::max(std::abs(numeric) + std::abs(exact), floor);
        worst = std::max(worst, std::abs(numeric - exact) / denom);
      }
  }
  return worst;
}

// Set-intersection recall, no ranking helpers shared with the library.
inline double set_recall(const std::vector<int>& ranked, const std::set<int>& relevant, int K) {
  if (relevant.empty()) return 0.0;
  int hits = 0;
  for (int p = 0; p < K && p < static_cast<int>(ranked.size()); ++p)
    if (relevant.count(ranked[p])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

}  // namespace oracle
