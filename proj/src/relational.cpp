#include "mimic/relational.hpp"

#include <stdexcept>
#include <string>

#include "mimic/ops.hpp"

namespace mimic {

namespace {

void check_embed_weight(const Tensor& w, int64_t in_c, const char* name) {
  if (w.ndim() != 4 || w.dim(2) != 1 || w.dim(3) != 1) {
    throw std::invalid_argument(std::string(name) + " must be a [out, in, 1, 1] weight");
  }
  if (w.dim(1) != in_c) {
    throw std::invalid_argument(std::string(name) + " expects " + std::to_string(w.dim(1)) +
                                " input channels, feature map has " + std::to_string(in_c));
  }
}

// [N, C, H, W] -> [N, H*W, C]
Tensor flatten_positions(const Tensor& x) {
  const int64_t n = x.dim(0), c = x.dim(1), p = x.dim(2) * x.dim(3);
  return transpose_bmm(reshape(x, {n, c, p}));
}

}  // namespace

Tensor attention_weights(const Tensor& u, const Tensor& wq, const Tensor& wk) {
  if (u.ndim() != 4) throw std::invalid_argument("attention_weights expects [N, C, H, W]");
  if (u.dim(1) % 2 != 0) {
    throw std::invalid_argument("attention_weights: channel count must be even, got " +
                                std::to_string(u.dim(1)));
  }
  check_embed_weight(wq, u.dim(1), "wq");
  check_embed_weight(wk, u.dim(1), "wk");
  if (wq.dim(0) != wk.dim(0)) {
    throw std::invalid_argument("wq and wk must embed to the same dimension");
  }
  Tensor q = flatten_positions(conv2d(u, wq, 1, 1, 0, 0));        // [N, P, C/2]
  Tensor k = reshape(conv2d(u, wk, 1, 1, 0, 0),
                     {u.dim(0), wk.dim(0), u.dim(2) * u.dim(3)});  // [N, C/2, P]
  Tensor logits = bmm(q, k);                                 // [N, P, P]
  const int64_t n = logits.dim(0), p = logits.dim(1);
  return reshape(softmax_rows(reshape(logits, {n * p, p})), {n, p, p});
}

Tensor non_local_mean(const Tensor& u, const Tensor& wq, const Tensor& wk, const Tensor& wv) {
  Tensor attn = attention_weights(u, wq, wk);                // [N, P, P]
  check_embed_weight(wv, u.dim(1), "wv");
  Tensor v = flatten_positions(conv2d(u, wv, 1, 1, 0, 0));         // [N, P, Cv]
  Tensor mixed = transpose_bmm(bmm(attn, v));                // [N, Cv, P]
  return reshape(mixed, {u.dim(0), wv.dim(0), u.dim(2), u.dim(3)});
}

Tensor relational_forward(const Tensor& u, const RelationalParams& p) {
  Tensor nlm = non_local_mean(u, p.wq, p.wk, p.wv);
  check_embed_weight(p.we, nlm.dim(1), "we");
  if (p.we.dim(0) != u.dim(1)) {
    throw std::invalid_argument("we must embed back to the input channel count");
  }
  return add(conv2d(nlm, p.we, 1, 1, 0, 0), u);
}

}  // namespace mimic
