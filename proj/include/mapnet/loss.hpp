#pragma once

#include "mapnet/graph.hpp"

namespace mapnet {

// Per-position binary cross-entropy of sigmoid(z) against y, in the stable
// form max(z,0) - z*y + log(1 + exp(-|z|)).
double bce_with_logits(double z, double y);

// Mean binary cross-entropy over all n*H*W positions; gradient w.r.t. the
// logits is (sigmoid(z) - y) / (n*H*W). Labels must be exactly 0 or 1.
template <typename T>
Var bce_loss(Graph<T>& g, Var logits, const Tensor<T>& labels);

}  // namespace mapnet
