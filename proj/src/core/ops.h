#pragma once

#include <vector>

#include "core/graph.h"

namespace pa {

// Elementwise / scalar
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var silu(const Var& x);
Var sigmoid(const Var& x);

// Shape
Var reshape(const Var& x, std::vector<int64_t> shape);
Var permute(const Var& x, const std::vector<int>& perm);
Var concat(const std::vector<Var>& xs, int axis);
Var slice(const Var& x, int axis, int64_t start, int64_t end);
// (B, ...) -> (repeat*B, ...) by tiling the whole tensor; backward sums tiles.
Var tile_batch(const Var& x, int64_t repeat);

// Linear algebra
Var matmul(const Var& a, const Var& b);                    // (M,K)x(K,N)
Var bmm(const Var& a, const Var& b);                       // (B,M,K)x(B,K,N)
Var linear(const Var& x, const Var& w, const Var& b);      // (N,Din), w (Dout,Din)

// Conv / resize / pool; x is (F,C,H,W)
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest2x(const Var& x);
Var resize_bilinear(const Var& x, int64_t oh, int64_t ow);
Var global_avg_pool(const Var& x);                         // -> (F,C)

// Normalization / activation over rows
Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, float eps = 1e-5f);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);
Var softmax_lastdim(const Var& x);

// Broadcast arithmetic
Var add_channel_bias(const Var& x, const Var& b);          // x(F,C,H,W) + b(C)
Var channel_affine(const Var& x, const Var& s, const Var& t);  // x*(1+s)+t, s/t (C)
Var add_broadcast_rows(const Var& x, const Var& p);        // x(B,T,D) + p(T,D)

// Loss; returns a scalar of shape (1)
Var mse(const Var& pred, const Var& target);

// Tensor-level helpers (no tape)
Tensor bilinear_resize_value(const Tensor& x, int64_t oh, int64_t ow);

}  // namespace pa
