#pragma once

#include "mimic/tensor.hpp"

namespace mimic {

// Self-attention block over flattened spatial positions of a feature map:
// softmax-normalized exponentiated dot products between learned embeddings of
// every position pair, value aggregation, output embedding, and a residual
// connection. All embeddings are bias-free 1x1 convolutions.
struct RelationalParams {
  Tensor wq;  // [C/2, C, 1, 1]
  Tensor wk;  // [C/2, C, 1, 1]
  Tensor wv;  // [Cv,  C, 1, 1]
  Tensor we;  // [C,  Cv, 1, 1]; zero at construction so the block starts as identity
};

// Row-stochastic attention matrix [N, H*W, H*W]; entry (i, j) weights the
// contribution of position j to position i. Positions are flattened row-major.
Tensor attention_weights(const Tensor& u, const Tensor& wq, const Tensor& wk);

// Attention-weighted aggregation of value embeddings, [N, Cv, H, W].
Tensor non_local_mean(const Tensor& u, const Tensor& wq, const Tensor& wk, const Tensor& wv);

// Full block: embed the aggregated values back to C channels and add the
// input. Output shape equals input shape.
Tensor relational_forward(const Tensor& u, const RelationalParams& p);

}  // namespace mimic
