#include "reform/graph_conv.hpp"

namespace reform {

void propagate_layer(const InteractionGraph& graph, const Mat& users_l, const Mat& items_l,
                     Mat* users_next, Mat* items_next) {
  if (users_l.rows() != graph.num_users || items_l.rows() != graph.num_items ||
      users_l.cols() != items_l.cols())
    throw ConfigError("propagate_layer: embedding shapes do not match the graph");

  users_next->setZero(users_l.rows(), users_l.cols());
  items_next->setZero(items_l.rows(), items_l.cols());

  for (int u = 0; u < graph.num_users; ++u) {
    auto row = users_next->row(u);
    const double nu = graph.user_norm[static_cast<size_t>(u)];
    for (int32_t i : graph.items_of(u))
      row += nu * graph.item_norm[static_cast<size_t>(i)] * items_l.row(i);
  }
  for (int i = 0; i < graph.num_items; ++i) {
    auto row = items_next->row(i);
    const double ni = graph.item_norm[static_cast<size_t>(i)];
    for (int32_t u : graph.users_of(i))
      row += ni * graph.user_norm[static_cast<size_t>(u)] * users_l.row(u);
  }
}

PropagatedEmbeddings propagate(const InteractionGraph& graph, const Mat& users0,
                               const Mat& items0, int L, bool include_layer0) {
  if (L < 1) throw ConfigError("propagate: L must be >= 1");

  PropagatedEmbeddings out;
  out.user_layers.reserve(static_cast<size_t>(L) + 1);
  out.item_layers.reserve(static_cast<size_t>(L) + 1);
  out.user_layers.push_back(users0);
  out.item_layers.push_back(items0);

  out.users = include_layer0 ? users0 : Mat::Zero(users0.rows(), users0.cols()).eval();
  out.items = include_layer0 ? items0 : Mat::Zero(items0.rows(), items0.cols()).eval();

  for (int l = 1; l <= L; ++l) {
    Mat next_users, next_items;
    propagate_layer(graph, out.user_layers.back(), out.item_layers.back(), &next_users,
                    &next_items);
    out.users += next_users;
    out.items += next_items;
    out.user_layers.push_back(std::move(next_users));
    out.item_layers.push_back(std::move(next_items));
  }
  return out;
}

void backprop_graph(const InteractionGraph& graph, int L, bool include_layer0,
                    const Mat& grad_users, const Mat& grad_items, Mat* grad_users0,
                    Mat* grad_items0) {
  PropagatedEmbeddings adjoint = propagate(graph, grad_users, grad_items, L, include_layer0);
  *grad_users0 = std::move(adjoint.users);
  *grad_items0 = std::move(adjoint.items);
}

}  // namespace reform
