// Double-precision reference implementations used as test oracles.
// Deliberately naive (plain loops, no BLAS, no shared code with the engine)
// so that agreement between the two is meaningful evidence of correctness.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace refops {

struct DTensor {
    std::vector<int64_t> shape;
    std::vector<double> v;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
    int64_t dim(int i) const { return shape[(size_t)i]; }
};

inline DTensor make(std::vector<int64_t> shape) {
    DTensor t;
    t.shape = std::move(shape);
    t.v.assign((size_t)t.numel(), 0.0);
    return t;
}

// Lift float32 engine data into the double-precision domain.
inline DTensor lift(const std::vector<int64_t>& shape, const float* data, int64_t n) {
    DTensor t;
    t.shape = shape;
    t.v.resize((size_t)n);
    for (int64_t i = 0; i < n; ++i) t.v[(size_t)i] = (double)data[(size_t)i];
    return t;
}

// ---- elementwise ----

inline DTensor ew_add(const DTensor& a, const DTensor& b) {
    DTensor o = a;
    for (size_t i = 0; i < o.v.size(); ++i) o.v[i] += b.v[i];
    return o;
}

inline DTensor ew_mul(const DTensor& a, const DTensor& b) {
    DTensor o = a;
    for (size_t i = 0; i < o.v.size(); ++i) o.v[i] *= b.v[i];
    return o;
}

inline DTensor silu(const DTensor& a) {
    DTensor o = a;
    for (double& x : o.v) x = x / (1.0 + std::exp(-x));
    return o;
}

inline DTensor sigmoid(const DTensor& a) {
    DTensor o = a;
    for (double& x : o.v) x = 1.0 / (1.0 + std::exp(-x));
    return o;
}

// ---- linear algebra ----

// a: (M,K), b: (K,N) -> (M,N)
inline DTensor matmul(const DTensor& a, const DTensor& b) {
    int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    DTensor o = make({M, N});
    for (int64_t i = 0; i < M; ++i)
        for (int64_t j = 0; j < N; ++j) {
            double acc = 0.0;
            for (int64_t k = 0; k < K; ++k)
                acc += a.v[(size_t)(i * K + k)] * b.v[(size_t)(k * N + j)];
            o.v[(size_t)(i * N + j)] = acc;
        }
    return o;
}

// x: (N,Din), w: (Dout,Din), b: (Dout) or empty -> (N,Dout)
inline DTensor linear(const DTensor& x, const DTensor& w, const DTensor& b) {
    int64_t N = x.dim(0), Din = x.dim(1), Dout = w.dim(0);
    DTensor o = make({N, Dout});
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < Dout; ++j) {
            double acc = b.v.empty() ? 0.0 : b.v[(size_t)j];
            for (int64_t k = 0; k < Din; ++k)
                acc += x.v[(size_t)(i * Din + k)] * w.v[(size_t)(j * Din + k)];
            o.v[(size_t)(i * Dout + j)] = acc;
        }
    return o;
}

// ---- convolution ----

// x: (F,Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout) or empty.
inline DTensor conv2d(const DTensor& x, const DTensor& w, const DTensor& b,
                      int64_t stride, int64_t pad) {
    int64_t F = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    int64_t Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    DTensor o = make({F, Cout, Ho, Wo});
    for (int64_t f = 0; f < F; ++f)
        for (int64_t co = 0; co < Cout; ++co)
            for (int64_t oy = 0; oy < Ho; ++oy)
                for (int64_t ox = 0; ox < Wo; ++ox) {
                    double acc = b.v.empty() ? 0.0 : b.v[(size_t)co];
                    for (int64_t ci = 0; ci < Cin; ++ci)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                int64_t iy = oy * stride + ky - pad;
                                int64_t ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += x.v[(size_t)(((f * Cin + ci) * H + iy) * W + ix)] *
                                       w.v[(size_t)(((co * Cin + ci) * kh + ky) * kw + kx)];
                            }
                    o.v[(size_t)(((f * Cout + co) * Ho + oy) * Wo + ox)] = acc;
                }
    return o;
}

// ---- normalization ----

// x: (F,C,H,W); per-frame, per-group statistics; gamma/beta per channel.
inline DTensor group_norm(const DTensor& x, const DTensor& gamma, const DTensor& beta,
                          int64_t groups, double eps) {
    int64_t F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int64_t cpg = C / groups;
    DTensor o = make(x.shape);
    for (int64_t f = 0; f < F; ++f)
        for (int64_t g = 0; g < groups; ++g) {
            double sum = 0.0, sq = 0.0;
            int64_t n = cpg * H * W;
            for (int64_t c = g * cpg; c < (g + 1) * cpg; ++c)
                for (int64_t i = 0; i < H * W; ++i) {
                    double val = x.v[(size_t)((f * C + c) * H * W + i)];
                    sum += val;
                    sq += val * val;
                }
            double mean = sum / (double)n;
            double var = sq / (double)n - mean * mean;
            double inv = 1.0 / std::sqrt(var + eps);
            for (int64_t c = g * cpg; c < (g + 1) * cpg; ++c)
                for (int64_t i = 0; i < H * W; ++i) {
                    size_t idx = (size_t)((f * C + c) * H * W + i);
                    o.v[idx] = (x.v[idx] - mean) * inv * gamma.v[(size_t)c] + beta.v[(size_t)c];
                }
        }
    return o;
}

// x: (..., D); statistics over the last dimension.
inline DTensor layer_norm(const DTensor& x, const DTensor& gamma, const DTensor& beta,
                          double eps) {
    int64_t D = x.shape.back();
    int64_t rows = x.numel() / D;
    DTensor o = make(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
        double sum = 0.0, sq = 0.0;
        for (int64_t j = 0; j < D; ++j) {
            double val = x.v[(size_t)(r * D + j)];
            sum += val;
            sq += val * val;
        }
        double mean = sum / (double)D;
        double var = sq / (double)D - mean * mean;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int64_t j = 0; j < D; ++j) {
            size_t idx = (size_t)(r * D + j);
            o.v[idx] = (x.v[idx] - mean) * inv * gamma.v[(size_t)j] + beta.v[(size_t)j];
        }
    }
    return o;
}

inline DTensor softmax_lastdim(const DTensor& x) {
    int64_t D = x.shape.back();
    int64_t rows = x.numel() / D;
    DTensor o = make(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
        double mx = -1e300;
        for (int64_t j = 0; j < D; ++j) mx = std::max(mx, x.v[(size_t)(r * D + j)]);
        double z = 0.0;
        for (int64_t j = 0; j < D; ++j) z += std::exp(x.v[(size_t)(r * D + j)] - mx);
        for (int64_t j = 0; j < D; ++j)
            o.v[(size_t)(r * D + j)] = std::exp(x.v[(size_t)(r * D + j)] - mx) / z;
    }
    return o;
}

// ---- resampling ----

// Bilinear with half-pixel centers and edge clamping; x: (F,C,H,W).
inline DTensor resize_bilinear(const DTensor& x, int64_t Ho, int64_t Wo) {
    int64_t F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    DTensor o = make({F, C, Ho, Wo});
    for (int64_t f = 0; f < F; ++f)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t oy = 0; oy < Ho; ++oy)
                for (int64_t ox = 0; ox < Wo; ++ox) {
                    double sy = ((double)oy + 0.5) * (double)H / (double)Ho - 0.5;
                    double sx = ((double)ox + 0.5) * (double)W / (double)Wo - 0.5;
                    int64_t y0 = (int64_t)std::floor(sy), x0 = (int64_t)std::floor(sx);
                    double fy = sy - (double)y0, fx = sx - (double)x0;
                    auto at = [&](int64_t yy, int64_t xx) {
                        yy = std::min(std::max(yy, (int64_t)0), H - 1);
                        xx = std::min(std::max(xx, (int64_t)0), W - 1);
                        return x.v[(size_t)(((f * C + c) * H + yy) * W + xx)];
                    };
                    double top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
                    double bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
                    o.v[(size_t)(((f * C + c) * Ho + oy) * Wo + ox)] = top * (1.0 - fy) + bot * fy;
                }
    return o;
}

// ---- attention ----

// Multi-head attention matching the engine layer's layout:
//   q_tokens: (B,T,D), kv_tokens: (B,S,Dkv)
//   wq: (D,D), wk/wv: (D,Dkv), wo: (D,D), bo: (D)
// Projections are bias-free except the output projection.
inline DTensor attention(const DTensor& q_tokens, const DTensor& kv_tokens,
                         const DTensor& wq, const DTensor& wk, const DTensor& wv,
                         const DTensor& wo, const DTensor& bo, int64_t heads) {
    int64_t B = q_tokens.dim(0), T = q_tokens.dim(1), D = q_tokens.dim(2);
    int64_t S = kv_tokens.dim(1), Dkv = kv_tokens.dim(2);
    int64_t dh = D / heads;
    double scale = 1.0 / std::sqrt((double)dh);
    DTensor o = make({B, T, D});
    std::vector<double> q((size_t)(T * D)), k((size_t)(S * D)), v((size_t)(S * D));
    for (int64_t b = 0; b < B; ++b) {
        // project
        for (int64_t t = 0; t < T; ++t)
            for (int64_t j = 0; j < D; ++j) {
                double acc = 0.0;
                for (int64_t i = 0; i < D; ++i)
                    acc += q_tokens.v[(size_t)((b * T + t) * D + i)] * wq.v[(size_t)(j * D + i)];
                q[(size_t)(t * D + j)] = acc;
            }
        for (int64_t s = 0; s < S; ++s)
            for (int64_t j = 0; j < D; ++j) {
                double ka = 0.0, va = 0.0;
                for (int64_t i = 0; i < Dkv; ++i) {
                    double tok = kv_tokens.v[(size_t)((b * S + s) * Dkv + i)];
                    ka += tok * wk.v[(size_t)(j * Dkv + i)];
                    va += tok * wv.v[(size_t)(j * Dkv + i)];
                }
                k[(size_t)(s * D + j)] = ka;
                v[(size_t)(s * D + j)] = va;
            }
        // per-head softmax(QK^T/sqrt(dh)) V
        std::vector<double> att((size_t)(T * D), 0.0);
        for (int64_t h = 0; h < heads; ++h) {
            for (int64_t t = 0; t < T; ++t) {
                std::vector<double> logits((size_t)S);
                double mx = -1e300;
                for (int64_t s = 0; s < S; ++s) {
                    double acc = 0.0;
                    for (int64_t e = 0; e < dh; ++e)
                        acc += q[(size_t)(t * D + h * dh + e)] * k[(size_t)(s * D + h * dh + e)];
                    logits[(size_t)s] = acc * scale;
                    mx = std::max(mx, logits[(size_t)s]);
                }
                double z = 0.0;
                for (int64_t s = 0; s < S; ++s) z += std::exp(logits[(size_t)s] - mx);
                for (int64_t e = 0; e < dh; ++e) {
                    double acc = 0.0;
                    for (int64_t s = 0; s < S; ++s)
                        acc += std::exp(logits[(size_t)s] - mx) / z * v[(size_t)(s * D + h * dh + e)];
                    att[(size_t)(t * D + h * dh + e)] = acc;
                }
            }
        }
        // output projection
        for (int64_t t = 0; t < T; ++t)
            for (int64_t j = 0; j < D; ++j) {
                double acc = bo.v.empty() ? 0.0 : bo.v[(size_t)j];
                for (int64_t i = 0; i < D; ++i)
                    acc += att[(size_t)(t * D + i)] * wo.v[(size_t)(j * D + i)];
                o.v[(size_t)((b * T + t) * D + j)] = acc;
            }
    }
    return o;
}

// ---- shape movement ----

inline DTensor permute(const DTensor& x, const std::vector<int>& perm) {
    int r = (int)x.shape.size();
    std::vector<int64_t> oshape(r);
    for (int i = 0; i < r; ++i) oshape[(size_t)i] = x.dim(perm[(size_t)i]);
    DTensor o = make(oshape);
    std::vector<int64_t> istrides(r, 1), ostrides(r, 1);
    for (int i = r - 2; i >= 0; --i) {
        istrides[(size_t)i] = istrides[(size_t)i + 1] * x.dim(i + 1);
        ostrides[(size_t)i] = ostrides[(size_t)i + 1] * oshape[(size_t)i + 1];
    }
    for (int64_t oi = 0; oi < o.numel(); ++oi) {
        int64_t rem = oi, ii = 0;
        for (int i = 0; i < r; ++i) {
            int64_t c = rem / ostrides[(size_t)i];
            rem %= ostrides[(size_t)i];
            ii += c * istrides[(size_t)perm[(size_t)i]];
        }
        o.v[(size_t)oi] = x.v[(size_t)ii];
    }
    return o;
}

inline DTensor concat(const std::vector<DTensor>& xs, int axis) {
    std::vector<int64_t> oshape = xs[0].shape;
    oshape[(size_t)axis] = 0;
    for (const auto& x : xs) oshape[(size_t)axis] += x.dim(axis);
    DTensor o = make(oshape);
    int64_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= oshape[(size_t)i];
    int64_t inner = 1;
    for (size_t i = (size_t)axis + 1; i < oshape.size(); ++i) inner *= oshape[i];
    int64_t orow = oshape[(size_t)axis] * inner;
    int64_t off = 0;
    for (const auto& x : xs) {
        int64_t xrow = x.dim(axis) * inner;
        for (int64_t u = 0; u < outer; ++u)
            for (int64_t j = 0; j < xrow; ++j)
                o.v[(size_t)(u * orow + off + j)] = x.v[(size_t)(u * xrow + j)];
        off += xrow;
    }
    return o;
}

inline DTensor slice(const DTensor& x, int axis, int64_t start, int64_t end) {
    std::vector<int64_t> oshape = x.shape;
    oshape[(size_t)axis] = end - start;
    DTensor o = make(oshape);
    int64_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    int64_t inner = 1;
    for (size_t i = (size_t)axis + 1; i < x.shape.size(); ++i) inner *= x.shape[i];
    for (int64_t u = 0; u < outer; ++u)
        for (int64_t j = 0; j < (end - start) * inner; ++j)
            o.v[(size_t)(u * (end - start) * inner + j)] =
                x.v[(size_t)(u * x.dim(axis) * inner + start * inner + j)];
    return o;
}

inline DTensor tile(const DTensor& x, int64_t repeat) {
    std::vector<int64_t> oshape = x.shape;
    oshape[0] *= repeat;
    DTensor o = make(oshape);
    for (int64_t r = 0; r < repeat; ++r)
        for (int64_t i = 0; i < x.numel(); ++i)
            o.v[(size_t)(r * x.numel() + i)] = x.v[(size_t)i];
    return o;
}

// ---- pooling / upsampling / broadcast arithmetic ----

inline DTensor upsample_nearest2x(const DTensor& x) {
    int64_t F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    DTensor o = make({F, C, 2 * H, 2 * W});
    for (int64_t fc = 0; fc < F * C; ++fc)
        for (int64_t y = 0; y < 2 * H; ++y)
            for (int64_t xw = 0; xw < 2 * W; ++xw)
                o.v[(size_t)((fc * 2 * H + y) * 2 * W + xw)] =
                    x.v[(size_t)((fc * H + y / 2) * W + xw / 2)];
    return o;
}

inline DTensor global_avg_pool(const DTensor& x) {
    int64_t F = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    DTensor o = make({F, C});
    for (int64_t fc = 0; fc < F * C; ++fc) {
        double acc = 0.0;
        for (int64_t i = 0; i < HW; ++i) acc += x.v[(size_t)(fc * HW + i)];
        o.v[(size_t)fc] = acc / (double)HW;
    }
    return o;
}

inline DTensor add_channel_bias(const DTensor& x, const DTensor& b) {
    int64_t F = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    DTensor o = x;
    for (int64_t f = 0; f < F; ++f)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < HW; ++i)
                o.v[(size_t)((f * C + c) * HW + i)] += b.v[(size_t)c];
    return o;
}

inline DTensor channel_affine(const DTensor& x, const DTensor& s, const DTensor& t) {
    int64_t F = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    DTensor o = x;
    for (int64_t f = 0; f < F; ++f)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < HW; ++i) {
                size_t idx = (size_t)((f * C + c) * HW + i);
                o.v[idx] = x.v[idx] * (1.0 + s.v[(size_t)c]) + t.v[(size_t)c];
            }
    return o;
}

inline DTensor add_broadcast_rows(const DTensor& x, const DTensor& p) {
    int64_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    DTensor o = x;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < T * D; ++i)
            o.v[(size_t)(b * T * D + i)] += p.v[(size_t)i];
    return o;
}

inline double mse(const DTensor& a, const DTensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    return acc / (double)a.v.size();
}

}  // namespace refops
