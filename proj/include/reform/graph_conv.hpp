#pragma once

#include "reform/common.hpp"
#include "reform/dataset.hpp"

namespace reform {

// Symmetric-normalized bipartite propagation: one layer sends each node the
// degree-scaled sum of its neighbors' rows,
//   next_u = sum_{i in N(u)} rows_i / (sqrt|N(u)| sqrt|N(i)|),
// and the mirrored update for items. No transform, no nonlinearity.
void propagate_layer(const InteractionGraph& graph, const Mat& users_l, const Mat& items_l,
                     Mat* users_next, Mat* items_next);

struct PropagatedEmbeddings {
  std::vector<Mat> user_layers;  // index l = 0..L
  std::vector<Mat> item_layers;
  Mat users;  // aggregated output e^g
  Mat items;
};

// Runs L layers from the base tables and sums layers 1..L into the output
// (layer 0 is excluded by default; include_layer0 adds the base table too).
PropagatedEmbeddings propagate(const InteractionGraph& graph, const Mat& users0,
                               const Mat& items0, int L, bool include_layer0 = false);

// Gradient of the aggregated output with respect to the base tables. The
// propagation operator is linear and symmetric, so the adjoint is the same
// layer-sum applied to the output gradients.
void backprop_graph(const InteractionGraph& graph, int L, bool include_layer0,
                    const Mat& grad_users, const Mat& grad_items, Mat* grad_users0,
                    Mat* grad_items0);

}  // namespace reform
