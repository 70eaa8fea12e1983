#include "core/ops.h"

#include <Eigen/Core>
#include <cmath>
#include <cstring>

#include "core/error.h"

namespace pa {

using MatXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatXf>;
using CMapM = Eigen::Map<const MatXf>;

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    PA_CHECK(a->value.same_shape(b->value),
             std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                 b->value.shape_str());
}

void axpy(Tensor& dst, const Tensor& src, float alpha = 1.0f) {
    float* d = dst.data();
    const float* s = src.data();
    int64_t n = dst.numel();
    for (int64_t i = 0; i < n; i++) d[i] += alpha * s[i];
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    const float* pa_ = a->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) po[i] = pa_[i] + pb[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) axpy(a->ensure_grad(), n.grad);
        if (b->requires_grad) axpy(b->ensure_grad(), n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    const float* pa_ = a->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) po[i] = pa_[i] - pb[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) axpy(a->ensure_grad(), n.grad);
        if (b->requires_grad) axpy(b->ensure_grad(), n.grad, -1.0f);
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    const float* pa_ = a->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) po[i] = pa_[i] * pb[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        int64_t m = n.value.numel();
        if (a->requires_grad) {
            float* g = a->ensure_grad().data();
            const float* bv = b->value.data();
            const float* ng = n.grad.data();
            for (int64_t i = 0; i < m; i++) g[i] += ng[i] * bv[i];
        }
        if (b->requires_grad) {
            float* g = b->ensure_grad().data();
            const float* av = a->value.data();
            const float* ng = n.grad.data();
            for (int64_t i = 0; i < m; i++) g[i] += ng[i] * av[i];
        }
    });
}

Var scale(const Var& a, float s) {
    Tensor out(a->value.shape());
    const float* pa_ = a->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) po[i] = pa_[i] * s;
    return make_node(std::move(out), {a}, [a, s](Node& n) {
        if (a->requires_grad) axpy(a->ensure_grad(), n.grad, s);
    });
}

Var silu(const Var& x) {
    Tensor out(x->value.shape());
    const float* px = x->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) {
        float sig = 1.0f / (1.0f + std::exp(-px[i]));
        po[i] = px[i] * sig;
    }
    return make_node(std::move(out), {x}, [x](Node& n) {
        if (!x->requires_grad) return;
        float* g = x->ensure_grad().data();
        const float* px = x->value.data();
        const float* ng = n.grad.data();
        for (int64_t i = 0; i < n.value.numel(); i++) {
            float sig = 1.0f / (1.0f + std::exp(-px[i]));
            g[i] += ng[i] * sig * (1.0f + px[i] * (1.0f - sig));
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor out(x->value.shape());
    const float* px = x->value.data();
    float* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) po[i] = 1.0f / (1.0f + std::exp(-px[i]));
    Tensor kept = out;  // shares buffer
    return make_node(std::move(out), {x}, [x, kept](Node& n) {
        if (!x->requires_grad) return;
        float* g = x->ensure_grad().data();
        const float* y = kept.data();
        const float* ng = n.grad.data();
        for (int64_t i = 0; i < n.value.numel(); i++) g[i] += ng[i] * y[i] * (1.0f - y[i]);
    });
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
    Tensor out = x->value.reshape(std::move(shape));
    std::vector<int64_t> xshape = x->value.shape();
    return make_node(std::move(out), {x}, [x, xshape](Node& n) {
        if (x->requires_grad) axpy(x->ensure_grad(), n.grad.reshape(xshape));
    });
}

namespace {

std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
    std::vector<int64_t> st(shape.size(), 1);
    for (int i = (int)shape.size() - 2; i >= 0; i--) st[i] = st[i + 1] * shape[i + 1];
    return st;
}

// dst[i_perm] = src[i]; dst shape = src shape permuted.
void permute_copy(const Tensor& src, Tensor& dst, const std::vector<int>& perm) {
    const auto& ss = src.shape();
    int r = (int)ss.size();
    auto sst = strides_of(ss);
    auto dst_shape = dst.shape();
    auto dstst = strides_of(dst_shape);
    // dst index composed from the source multi-index.
    std::vector<int64_t> dmap(r);
    for (int i = 0; i < r; i++) {
        // axis perm[i] of src becomes axis i of dst
        dmap[perm[i]] = dstst[i];
    }
    const float* s = src.data();
    float* d = dst.data();
    int64_t n = src.numel();
    for (int64_t lin = 0; lin < n; lin++) {
        int64_t doff = 0;
        int64_t rem = lin;
        for (int i = 0; i < r; i++) {
            int64_t c = rem / sst[i];
            rem -= c * sst[i];
            doff += c * dmap[i];
        }
        d[doff] = s[lin];
    }
}

}  // namespace

Var permute(const Var& x, const std::vector<int>& perm) {
    const auto& s = x->value.shape();
    PA_CHECK(perm.size() == s.size(), "permute: rank mismatch");
    std::vector<int64_t> oshape(s.size());
    for (size_t i = 0; i < perm.size(); i++) oshape[i] = s[(size_t)perm[i]];
    Tensor out(oshape);
    permute_copy(x->value, out, perm);
    return make_node(std::move(out), {x}, [x, perm](Node& n) {
        if (!x->requires_grad) return;
        // inverse permutation
        std::vector<int> inv(perm.size());
        for (size_t i = 0; i < perm.size(); i++) inv[(size_t)perm[i]] = (int)i;
        Tensor gx(x->value.shape());
        permute_copy(n.grad, gx, inv);
        axpy(x->ensure_grad(), gx);
    });
}

Var concat(const std::vector<Var>& xs, int axis) {
    PA_CHECK(!xs.empty(), "concat: empty input list");
    const auto& s0 = xs[0]->value.shape();
    int r = (int)s0.size();
    PA_CHECK(axis >= 0 && axis < r, "concat: bad axis");
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; i++) outer *= s0[(size_t)i];
    for (int i = axis + 1; i < r; i++) inner *= s0[(size_t)i];
    int64_t cat_dim = 0;
    for (const auto& x : xs) {
        const auto& s = x->value.shape();
        PA_CHECK((int)s.size() == r, "concat: rank mismatch");
        for (int i = 0; i < r; i++) {
            if (i != axis)
                PA_CHECK(s[(size_t)i] == s0[(size_t)i],
                         "concat: shape mismatch " + x->value.shape_str() + " vs " +
                             xs[0]->value.shape_str());
        }
        cat_dim += s[(size_t)axis];
    }
    std::vector<int64_t> oshape = s0;
    oshape[(size_t)axis] = cat_dim;
    Tensor out(oshape);
    float* po = out.data();
    int64_t row = cat_dim * inner;
    int64_t off = 0;
    for (const auto& x : xs) {
        int64_t blk = x->value.dim(axis) * inner;
        const float* px = x->value.data();
        for (int64_t o = 0; o < outer; o++)
            std::memcpy(po + o * row + off, px + o * blk, (size_t)blk * sizeof(float));
        off += blk;
    }
    return make_node(std::move(out), xs, [xs, outer, inner, cat_dim](Node& n) {
        int64_t row = cat_dim * inner;
        int64_t off = 0;
        const float* ng = n.grad.data();
        for (const auto& x : xs) {
            int64_t blk = x->value.numel() / outer;
            if (x->requires_grad) {
                float* g = x->ensure_grad().data();
                for (int64_t o = 0; o < outer; o++) {
                    const float* src = ng + o * row + off;
                    float* dst = g + o * blk;
                    for (int64_t i = 0; i < blk; i++) dst[i] += src[i];
                }
            }
            off += blk;
        }
    });
}

Var slice(const Var& x, int axis, int64_t start, int64_t end) {
    const auto& s = x->value.shape();
    int r = (int)s.size();
    PA_CHECK(axis >= 0 && axis < r, "slice: bad axis");
    PA_CHECK(start >= 0 && end <= s[(size_t)axis] && start < end, "slice: bad range");
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; i++) outer *= s[(size_t)i];
    for (int i = axis + 1; i < r; i++) inner *= s[(size_t)i];
    std::vector<int64_t> oshape = s;
    oshape[(size_t)axis] = end - start;
    Tensor out(oshape);
    const float* px = x->value.data();
    float* po = out.data();
    int64_t in_row = s[(size_t)axis] * inner;
    int64_t out_row = (end - start) * inner;
    for (int64_t o = 0; o < outer; o++)
        std::memcpy(po + o * out_row, px + o * in_row + start * inner,
                    (size_t)out_row * sizeof(float));
    return make_node(std::move(out), {x}, [x, outer, inner, in_row, out_row, start](Node& n) {
        if (!x->requires_grad) return;
        float* g = x->ensure_grad().data();
        const float* ng = n.grad.data();
        for (int64_t o = 0; o < outer; o++) {
            float* dst = g + o * in_row + start * inner;
            const float* src = ng + o * out_row;
            for (int64_t i = 0; i < out_row; i++) dst[i] += src[i];
        }
    });
}

Var tile_batch(const Var& x, int64_t repeat) {
    PA_CHECK(repeat >= 1, "tile_batch: repeat must be >= 1");
    const auto& s = x->value.shape();
    std::vector<int64_t> oshape = s;
    oshape[0] *= repeat;
    Tensor out(oshape);
    int64_t blk = x->value.numel();
    float* po = out.data();
    const float* px = x->value.data();
    for (int64_t r = 0; r < repeat; r++)
        std::memcpy(po + r * blk, px, (size_t)blk * sizeof(float));
    return make_node(std::move(out), {x}, [x, repeat, blk](Node& n) {
        if (!x->requires_grad) return;
        float* g = x->ensure_grad().data();
        const float* ng = n.grad.data();
        for (int64_t r = 0; r < repeat; r++)
            for (int64_t i = 0; i < blk; i++) g[i] += ng[r * blk + i];
    });
}

Var matmul(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    PA_CHECK(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0],
             "matmul: bad shapes " + a->value.shape_str() + " x " + b->value.shape_str());
    int64_t M = sa[0], K = sa[1], N = sb[1];
    Tensor out({M, N});
    CMapM A(a->value.data(), M, K), B(b->value.data(), K, N);
    MapM C(out.data(), M, N);
    C.noalias() = A * B;
    return make_node(std::move(out), {a, b}, [a, b, M, K, N](Node& n) {
        CMapM G(n.grad.data(), M, N);
        if (a->requires_grad) {
            MapM GA(a->ensure_grad().data(), M, K);
            CMapM B(b->value.data(), K, N);
            GA.noalias() += G * B.transpose();
        }
        if (b->requires_grad) {
            MapM GB(b->ensure_grad().data(), K, N);
            CMapM A(a->value.data(), M, K);
            GB.noalias() += A.transpose() * G;
        }
    });
}

Var bmm(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    PA_CHECK(sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1],
             "bmm: bad shapes " + a->value.shape_str() + " x " + b->value.shape_str());
    int64_t Bn = sa[0], M = sa[1], K = sa[2], N = sb[2];
    Tensor out({Bn, M, N});
    for (int64_t i = 0; i < Bn; i++) {
        CMapM A(a->value.data() + i * M * K, M, K), B(b->value.data() + i * K * N, K, N);
        MapM C(out.data() + i * M * N, M, N);
        C.noalias() = A * B;
    }
    return make_node(std::move(out), {a, b}, [a, b, Bn, M, K, N](Node& n) {
        for (int64_t i = 0; i < Bn; i++) {
            CMapM G(n.grad.data() + i * M * N, M, N);
            if (a->requires_grad) {
                MapM GA(a->ensure_grad().data() + i * M * K, M, K);
                CMapM B(b->value.data() + i * K * N, K, N);
                GA.noalias() += G * B.transpose();
            }
            if (b->requires_grad) {
                MapM GB(b->ensure_grad().data() + i * K * N, K, N);
                CMapM A(a->value.data() + i * M * K, M, K);
                GB.noalias() += A.transpose() * G;
            }
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const auto& sx = x->value.shape();
    const auto& sw = w->value.shape();
    PA_CHECK(sx.size() == 2 && sw.size() == 2 && sx[1] == sw[1],
             "linear: bad shapes " + x->value.shape_str() + " w " + w->value.shape_str());
    int64_t N = sx[0], Din = sx[1], Dout = sw[0];
    if (b) PA_CHECK(b->value.numel() == Dout, "linear: bias size mismatch");
    Tensor out({N, Dout});
    CMapM X(x->value.data(), N, Din), W(w->value.data(), Dout, Din);
    MapM O(out.data(), N, Dout);
    O.noalias() = X * W.transpose();
    if (b) {
        const float* pb = b->value.data();
        float* po = out.data();
        for (int64_t i = 0; i < N; i++)
            for (int64_t j = 0; j < Dout; j++) po[i * Dout + j] += pb[j];
    }
    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_node(std::move(out), std::move(parents), [x, w, b, N, Din, Dout](Node& n) {
        CMapM G(n.grad.data(), N, Dout);
        if (x->requires_grad) {
            MapM GX(x->ensure_grad().data(), N, Din);
            CMapM W(w->value.data(), Dout, Din);
            GX.noalias() += G * W;
        }
        if (w->requires_grad) {
            MapM GW(w->ensure_grad().data(), Dout, Din);
            CMapM X(x->value.data(), N, Din);
            GW.noalias() += G.transpose() * X;
        }
        if (b && b->requires_grad) {
            float* gb = b->ensure_grad().data();
            const float* ng = n.grad.data();
            for (int64_t i = 0; i < N; i++)
                for (int64_t j = 0; j < Dout; j++) gb[j] += ng[i * Dout + j];
        }
    });
}

namespace {

struct ConvDims {
    int64_t F, Cin, H, W, Cout, kh, kw, Ho, Wo;
    int stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    PA_CHECK(x.ndim() == 4 && w.ndim() == 4, "conv2d: x and w must be rank 4");
    ConvDims d;
    d.F = x.dim(0);
    d.Cin = x.dim(1);
    d.H = x.dim(2);
    d.W = x.dim(3);
    d.Cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    PA_CHECK(w.dim(1) == d.Cin, "conv2d: weight expects " + std::to_string(w.dim(1)) +
                                    " input channels, got " + std::to_string(d.Cin));
    d.Ho = (d.H + 2 * pad - d.kh) / stride + 1;
    d.Wo = (d.W + 2 * pad - d.kw) / stride + 1;
    PA_CHECK(d.Ho > 0 && d.Wo > 0, "conv2d: output dims not positive");
    return d;
}

// col is (Cin*kh*kw, Ho*Wo) row-major.
void im2col(const float* x, const ConvDims& d, float* col) {
    int64_t HoWo = d.Ho * d.Wo;
    for (int64_t c = 0; c < d.Cin; c++) {
        for (int64_t ky = 0; ky < d.kh; ky++) {
            for (int64_t kx = 0; kx < d.kw; kx++) {
                float* crow = col + ((c * d.kh + ky) * d.kw + kx) * HoWo;
                for (int64_t oy = 0; oy < d.Ho; oy++) {
                    int64_t iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.H) {
                        std::memset(crow + oy * d.Wo, 0, (size_t)d.Wo * sizeof(float));
                        continue;
                    }
                    const float* xrow = x + (c * d.H + iy) * d.W;
                    for (int64_t ox = 0; ox < d.Wo; ox++) {
                        int64_t ix = ox * d.stride + kx - d.pad;
                        crow[oy * d.Wo + ox] = (ix < 0 || ix >= d.W) ? 0.0f : xrow[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const float* col, const ConvDims& d, float* gx) {
    int64_t HoWo = d.Ho * d.Wo;
    for (int64_t c = 0; c < d.Cin; c++) {
        for (int64_t ky = 0; ky < d.kh; ky++) {
            for (int64_t kx = 0; kx < d.kw; kx++) {
                const float* crow = col + ((c * d.kh + ky) * d.kw + kx) * HoWo;
                for (int64_t oy = 0; oy < d.Ho; oy++) {
                    int64_t iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.H) continue;
                    float* xrow = gx + (c * d.H + iy) * d.W;
                    for (int64_t ox = 0; ox < d.Wo; ox++) {
                        int64_t ix = ox * d.stride + kx - d.pad;
                        if (ix >= 0 && ix < d.W) xrow[ix] += crow[oy * d.Wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    ConvDims d = conv_dims(x->value, w->value, stride, pad);
    if (b) PA_CHECK(b->value.numel() == d.Cout, "conv2d: bias size mismatch");
    int64_t K = d.Cin * d.kh * d.kw;
    int64_t N = d.Ho * d.Wo;
    Tensor out({d.F, d.Cout, d.Ho, d.Wo});
    std::vector<float> col((size_t)(K * N));
    CMapM Wm(w->value.data(), d.Cout, K);
    for (int64_t f = 0; f < d.F; f++) {
        im2col(x->value.data() + f * d.Cin * d.H * d.W, d, col.data());
        CMapM C(col.data(), K, N);
        MapM O(out.data() + f * d.Cout * N, d.Cout, N);
        O.noalias() = Wm * C;
        if (b) {
            const float* pb = b->value.data();
            float* po = out.data() + f * d.Cout * N;
            for (int64_t c = 0; c < d.Cout; c++)
                for (int64_t i = 0; i < N; i++) po[c * N + i] += pb[c];
        }
    }
    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_node(std::move(out), std::move(parents), [x, w, b, d, K, N](Node& n) {
        // im2col is recomputed here; caching it for every conv in the model
        // costs far more memory than the extra pass costs time.
        std::vector<float> col((size_t)(K * N));
        std::vector<float> gcol((size_t)(K * N));
        CMapM Wm(w->value.data(), d.Cout, K);
        for (int64_t f = 0; f < d.F; f++) {
            CMapM G(n.grad.data() + f * d.Cout * N, d.Cout, N);
            if (w->requires_grad || x->requires_grad)
                im2col(x->value.data() + f * d.Cin * d.H * d.W, d, col.data());
            if (w->requires_grad) {
                MapM GW(w->ensure_grad().data(), d.Cout, K);
                CMapM C(col.data(), K, N);
                GW.noalias() += G * C.transpose();
            }
            if (x->requires_grad) {
                MapM GC(gcol.data(), K, N);
                GC.noalias() = Wm.transpose() * G;
                col2im_add(gcol.data(), d, x->ensure_grad().data() + f * d.Cin * d.H * d.W);
            }
        }
        if (b && b->requires_grad) {
            float* gb = b->ensure_grad().data();
            const float* ng = n.grad.data();
            for (int64_t f = 0; f < d.F; f++)
                for (int64_t c = 0; c < d.Cout; c++) {
                    const float* row = ng + (f * d.Cout + c) * N;
                    float s = 0.0f;
                    for (int64_t i = 0; i < N; i++) s += row[i];
                    gb[c] += s;
                }
        }
    });
}

Var upsample_nearest2x(const Var& x) {
    const auto& s = x->value.shape();
    PA_CHECK(s.size() == 4, "upsample_nearest2x: rank 4 expected");
    int64_t F = s[0], C = s[1], H = s[2], W = s[3];
    Tensor out({F, C, H * 2, W * 2});
    const float* px = x->value.data();
    float* po = out.data();
    for (int64_t fc = 0; fc < F * C; fc++) {
        const float* xi = px + fc * H * W;
        float* oi = po + fc * 4 * H * W;
        for (int64_t y = 0; y < H; y++)
            for (int64_t xx = 0; xx < W; xx++) {
                float v = xi[y * W + xx];
                int64_t o = (2 * y) * (2 * W) + 2 * xx;
                oi[o] = v;
                oi[o + 1] = v;
                oi[o + 2 * W] = v;
                oi[o + 2 * W + 1] = v;
            }
    }
    return make_node(std::move(out), {x}, [x, F, C, H, W](Node& n) {
        if (!x->requires_grad) return;
        float* g = x->ensure_grad().data();
        const float* ng = n.grad.data();
        for (int64_t fc = 0; fc < F * C; fc++) {
            float* gi = g + fc * H * W;
            const float* no = ng + fc * 4 * H * W;
            for (int64_t y = 0; y < H; y++)
                for (int64_t xx = 0; xx < W; xx++) {
                    int64_t o = (2 * y) * (2 * W) + 2 * xx;
                    gi[y * W + xx] += no[o] + no[o + 1] + no[o + 2 * W] + no[o + 2 * W + 1];
                }
        }
    });
}

namespace {

struct BilinearTap {
    int64_t i0, i1;
    float w0, w1;
};

// Half-pixel sampling with edge clamping; identical output size is an exact
// identity.
std::vector<BilinearTap> bilinear_taps(int64_t in, int64_t out) {
    std::vector<BilinearTap> taps((size_t)out);
    double scale = (double)in / (double)out;
    for (int64_t o = 0; o < out; o++) {
        double src = ((double)o + 0.5) * scale - 0.5;
        if (src < 0) src = 0;
        if (src > (double)(in - 1)) src = (double)(in - 1);
        int64_t i0 = (int64_t)src;
        int64_t i1 = std::min(i0 + 1, in - 1);
        float w1 = (float)(src - (double)i0);
        taps[(size_t)o] = {i0, i1, 1.0f - w1, w1};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize_value(const Tensor& x, int64_t oh, int64_t ow) {
    PA_CHECK(x.ndim() == 4, "resize_bilinear: rank 4 expected");
    int64_t F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto ty = bilinear_taps(H, oh);
    auto tx = bilinear_taps(W, ow);
    Tensor out({F, C, oh, ow});
    const float* px = x.data();
    float* po = out.data();
    for (int64_t fc = 0; fc < F * C; fc++) {
        const float* xi = px + fc * H * W;
        float* oi = po + fc * oh * ow;
        for (int64_t y = 0; y < oh; y++) {
            const auto& t0 = ty[(size_t)y];
            for (int64_t xx = 0; xx < ow; xx++) {
                const auto& t1 = tx[(size_t)xx];
                float v = t0.w0 * (t1.w0 * xi[t0.i0 * W + t1.i0] + t1.w1 * xi[t0.i0 * W + t1.i1]) +
                          t0.w1 * (t1.w0 * xi[t0.i1 * W + t1.i0] + t1.w1 * xi[t0.i1 * W + t1.i1]);
                oi[y * ow + xx] = v;
            }
        }
    }
    return out;
}

Var resize_bilinear(const Var& x, int64_t oh, int64_t ow) {
    Tensor out = bilinear_resize_value(x->value, oh, ow);
    int64_t F = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    return make_node(std::move(out), {x}, [x, F, C, H, W, oh, ow](Node& n) {
        if (!x->requires_grad) return;
        auto ty = bilinear_taps(H, oh);
        auto tx = bilinear_taps(W, ow);
        float* g = x->ensure_grad().data();
        const float* ng = n.grad.data();
        for (int64_t fc = 0; fc < F * C; fc++) {
            float* gi = g + fc * H * W;
            const float* no = ng + fc * oh * ow;
            for (int64_t y = 0; y < oh; y++) {
                const auto& t0 = ty[(size_t)y];
                for (int64_t xx = 0; xx < ow; xx++) {
                    const auto& t1 = tx[(size_t)xx];
                    float gv = no[y * ow + xx];
                    gi[t0.i0 * W + t1.i0] += t0.w0 * t1.w0 * gv;
                    gi[t0.i0 * W + t1.i1] += t0.w0 * t1.w1 * gv;
                    gi[t0.i1 * W + t1.i0] += t0.w1 * t1.w0 * gv;
                    gi[t0.i1 * W + t1.i1] += t0.w1 * t1.w1 * gv;
                }
            }
        }
    });
}

Var global_avg_pool(const Var& x) {
    const auto& s = x->value.shape();
    PA_CHECK(s.size() == 4, "global_avg_pool: rank 4 expected");
    int64_t F = s[0], C = s[1], HW = s[2] * s[3];
    Tensor out({F, C});
    const float* px = x->value.data();
    float* po = out.data();
    for (int64_t fc = 0; fc < F * C; fc++) {
        double acc = 0.0;
        for (int64_t i = 0; i < HW; i++) acc += px[fc * HW + i];
        po[fc] = (float)(acc / (double)HW);
    }
    return make_node(std::move(out), {x}, [x, F, C, HW](Node& n) {
        if (!x->requires_grad) return;
        float* g = x->ensure_grad().data();
        const float* ng = n.grad.data();
        float inv = 1.0f / (float)HW;
        for (int64_t fc = 0; fc < F * C; fc++)
            for (int64_t i = 0; i < HW; i++) g[fc * HW + i] += ng[fc] * inv;
    });
}

Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, float eps) {
    const auto& s = x->value.shape();
    PA_CHECK(s.size() == 4, "group_norm: rank 4 expected");
    int64_t F = s[0], C = s[1], HW = s[2] * s[3];
    PA_CHECK(C % groups == 0, "group_norm: channels not divisible by groups");
    PA_CHECK(gamma->value.numel() == C && beta->value.numel() == C,
             "group_norm: affine size mismatch");
    int64_t cg = C / groups;   // channels per group
    int64_t m = cg * HW;       // elements per (frame, group)
    Tensor out(s);
    Tensor xhat(s);  // kept for backward
    std::vector<float> inv_std((size_t)(F * groups));
    const float* px = x->value.data();
    const float* pg = gamma->value.data();
    const float* pb = beta->value.data();
    float* po = out.data();
    float* ph = xhat.data();
    for (int64_t f = 0; f < F; f++) {
        for (int64_t g = 0; g < groups; g++) {
            const float* xi = px + (f * C + g * cg) * HW;
            double mean = 0.0;
            for (int64_t i = 0; i < m; i++) mean += xi[i];
            mean /= (double)m;
            double var = 0.0;
            for (int64_t i = 0; i < m; i++) {
                double dlt = xi[i] - mean;
                var += dlt * dlt;
            }
            var /= (double)m;
            float is = (float)(1.0 / std::sqrt(var + (double)eps));
            inv_std[(size_t)(f * groups + g)] = is;
            float mu = (float)mean;
            float* hi = ph + (f * C + g * cg) * HW;
            float* oi = po + (f * C + g * cg) * HW;
            for (int64_t c = 0; c < cg; c++) {
                float ga = pg[g * cg + c];
                float be = pb[g * cg + c];
                for (int64_t i = 0; i < HW; i++) {
                    float h = (xi[c * HW + i] - mu) * is;
                    hi[c * HW + i] = h;
                    oi[c * HW + i] = ga * h + be;
                }
            }
        }
    }
    return make_node(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, xhat, inv_std, F, C, HW, groups, cg, m](Node& n) {
        const float* ng = n.grad.data();
        const float* ph = xhat.data();
        const float* pg = gamma->value.data();
        if (gamma->requires_grad) {
            float* gg = gamma->ensure_grad().data();
            for (int64_t f = 0; f < F; f++)
                for (int64_t c = 0; c < C; c++) {
                    const float* gr = ng + (f * C + c) * HW;
                    const float* hr = ph + (f * C + c) * HW;
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; i++) s += (double)gr[i] * hr[i];
                    gg[c] += (float)s;
                }
        }
        if (beta->requires_grad) {
            float* gb = beta->ensure_grad().data();
            for (int64_t f = 0; f < F; f++)
                for (int64_t c = 0; c < C; c++) {
                    const float* gr = ng + (f * C + c) * HW;
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; i++) s += gr[i];
                    gb[c] += (float)s;
                }
        }
        if (x->requires_grad) {
            float* gx = x->ensure_grad().data();
            for (int64_t f = 0; f < F; f++) {
                for (int64_t g = 0; g < groups; g++) {
                    float is = inv_std[(size_t)(f * groups + g)];
                    const float* gr = ng + (f * C + g * cg) * HW;
                    const float* hr = ph + (f * C + g * cg) * HW;
                    // dL/dxhat = g * gamma; reduce its mean and its
                    // correlation with xhat over the group.
                    double sum_d = 0.0, sum_dh = 0.0;
                    for (int64_t c = 0; c < cg; c++) {
                        float ga = pg[g * cg + c];
                        for (int64_t i = 0; i < HW; i++) {
                            double dv = (double)gr[c * HW + i] * ga;
                            sum_d += dv;
                            sum_dh += dv * hr[c * HW + i];
                        }
                    }
                    float mean_d = (float)(sum_d / (double)m);
                    float mean_dh = (float)(sum_dh / (double)m);
                    float* gxi = gx + (f * C + g * cg) * HW;
                    for (int64_t c = 0; c < cg; c++) {
                        float ga = pg[g * cg + c];
                        for (int64_t i = 0; i < HW; i++) {
                            float dv = gr[c * HW + i] * ga;
                            gxi[c * HW + i] +=
                                is * (dv - mean_d - hr[c * HW + i] * mean_dh);
                        }
                    }
                }
            }
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
    const auto& s = x->value.shape();
    PA_CHECK(!s.empty(), "layer_norm: rank >= 1 expected");
    int64_t D = s.back();
    int64_t R = x->value.numel() / D;
    PA_CHECK(gamma->value.numel() == D && beta->value.numel() == D,
             "layer_norm: affine size mismatch");
    Tensor out(s);
    Tensor xhat(s);
    std::vector<float> inv_std((size_t)R);
    const float* px = x->value.data();
    const float* pg = gamma->value.data();
    const float* pb = beta->value.data();
    float* po = out.data();
    float* ph = xhat.data();
    for (int64_t r = 0; r < R; r++) {
        const float* xi = px + r * D;
        double mean = 0.0;
        for (int64_t i = 0; i < D; i++) mean += xi[i];
        mean /= (double)D;
        double var = 0.0;
        for (int64_t i = 0; i < D; i++) {
            double dlt = xi[i] - mean;
            var += dlt * dlt;
        }
        var /= (double)D;
        float is = (float)(1.0 / std::sqrt(var + (double)eps));
        inv_std[(size_t)r] = is;
        float mu = (float)mean;
        for (int64_t i = 0; i < D; i++) {
            float h = (xi[i] - mu) * is;
            ph[r * D + i] = h;
            po[r * D + i] = pg[i] * h + pb[i];
        }
    }
    return make_node(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, xhat, inv_std, R, D](Node& n) {
        const float* ng = n.grad.data();
        const float* ph = xhat.data();
        const float* pg = gamma->value.data();
        if (gamma->requires_grad) {
            float* gg = gamma->ensure_grad().data();
            for (int64_t r = 0; r < R; r++)
                for (int64_t i = 0; i < D; i++) gg[i] += ng[r * D + i] * ph[r * D + i];
        }
        if (beta->requires_grad) {
            float* gb = beta->ensure_grad().data();
            for (int64_t r = 0; r < R; r++)
                for (int64_t i = 0; i < D; i++) gb[i] += ng[r * D + i];
        }
        if (x->requires_grad) {
            float* gx = x->ensure_grad().data();
            for (int64_t r = 0; r < R; r++) {
                float is = inv_std[(size_t)r];
                const float* gr = ng + r * D;
                const float* hr = ph + r * D;
                double sum_d = 0.0, sum_dh = 0.0;
                for (int64_t i = 0; i < D; i++) {
                    double dv = (double)gr[i] * pg[i];
                    sum_d += dv;
                    sum_dh += dv * hr[i];
                }
                float mean_d = (float)(sum_d / (double)D);
                float mean_dh = (float)(sum_dh / (double)D);
                for (int64_t i = 0; i < D; i++) {
                    float dv = gr[i] * pg[i];
                    gx[r * D + i] += is * (dv - mean_d - hr[i] * mean_dh);
                }
            }
        }
    });
}

Var softmax_lastdim(const Var& x) {
    const auto& s = x->value.shape();
    int64_t D = s.back();
    int64_t R = x->value.numel() / D;
    Tensor out(s);
    const float* px = x->value.data();
    float* po = out.data();
    for (int64_t r = 0; r < R; r++) {
        const float* xi = px + r * D;
        float* oi = po + r * D;
        float mx = xi[0];
        for (int64_t i = 1; i < D; i++) mx = std::max(mx, xi[i]);
        double z = 0.0;
        for (int64_t i = 0; i < D; i++) {
            float e = std::exp(xi[i] - mx);
            oi[i] = e;
            z += e;
        }
        float inv = (float)(1.0 / z);
        for (int64_t i = 0; i < D; i++) oi[i] *= inv;
    }
    Tensor y = out;  // shares buffer
    return make_node(std::move(out), {x}, [x, y, R, D](Node& n) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float* ng = n.grad.data();
        const float* py = y.data();
        for (int64_t r = 0; r < R; r++) {
            const float* gr = ng + r * D;
            const float* yr = py + r * D;
            double dot = 0.0;
            for (int64_t i = 0; i < D; i++) dot += (double)gr[i] * yr[i];
            for (int64_t i = 0; i < D; i++) gx[r * D + i] += yr[i] * (gr[i] - (float)dot);
        }
    });
}

Var add_channel_bias(const Var& x, const Var& b) {
    const auto& s = x->value.shape();
    PA_CHECK(s.size() == 4, "add_channel_bias: rank 4 expected");
    int64_t F = s[0], C = s[1], HW = s[2] * s[3];
    PA_CHECK(b->value.numel() == C, "add_channel_bias: size mismatch");
    Tensor out(s);
    const float* px = x->value.data();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t f = 0; f < F; f++)
        for (int64_t c = 0; c < C; c++) {
            float bv = pb[c];
            const float* xi = px + (f * C + c) * HW;
            float* oi = po + (f * C + c) * HW;
            for (int64_t i = 0; i < HW; i++) oi[i] = xi[i] + bv;
        }
    return make_node(std::move(out), {x, b}, [x, b, F, C, HW](Node& n) {
        const float* ng = n.grad.data();
        if (x->requires_grad) axpy(x->ensure_grad(), n.grad);
        if (b->requires_grad) {
            float* gb = b->ensure_grad().data();
            for (int64_t f = 0; f < F; f++)
                for (int64_t c = 0; c < C; c++) {
                    const float* gr = ng + (f * C + c) * HW;
                    double sum = 0.0;
                    for (int64_t i = 0; i < HW; i++) sum += gr[i];
                    gb[c] += (float)sum;
                }
        }
    });
}

Var channel_affine(const Var& x, const Var& s, const Var& t) {
    const auto& sh = x->value.shape();
    PA_CHECK(sh.size() == 4, "channel_affine: rank 4 expected");
    int64_t F = sh[0], C = sh[1], HW = sh[2] * sh[3];
    PA_CHECK(s->value.numel() == C && t->value.numel() == C, "channel_affine: size mismatch");
    Tensor out(sh);
    const float* px = x->value.data();
    const float* ps = s->value.data();
    const float* pt = t->value.data();
    float* po = out.data();
    for (int64_t f = 0; f < F; f++)
        for (int64_t c = 0; c < C; c++) {
            float sc = 1.0f + ps[c];
            float sh_ = pt[c];
            const float* xi = px + (f * C + c) * HW;
            float* oi = po + (f * C + c) * HW;
            for (int64_t i = 0; i < HW; i++) oi[i] = xi[i] * sc + sh_;
        }
    return make_node(std::move(out), {x, s, t}, [x, s, t, F, C, HW](Node& n) {
        const float* ng = n.grad.data();
        const float* px = x->value.data();
        const float* ps = s->value.data();
        if (x->requires_grad) {
            float* gx = x->ensure_grad().data();
            for (int64_t f = 0; f < F; f++)
                for (int64_t c = 0; c < C; c++) {
                    float sc = 1.0f + ps[c];
                    const float* gr = ng + (f * C + c) * HW;
                    float* gi = gx + (f * C + c) * HW;
                    for (int64_t i = 0; i < HW; i++) gi[i] += gr[i] * sc;
                }
        }
        if (s->requires_grad) {
            float* gs = s->ensure_grad().data();
            for (int64_t f = 0; f < F; f++)
                for (int64_t c = 0; c < C; c++) {
                    const float* gr = ng + (f * C + c) * HW;
                    const float* xi = px + (f * C + c) * HW;
                    double sum = 0.0;
                    for (int64_t i = 0; i < HW; i++) sum += (double)gr[i] * xi[i];
                    gs[c] += (float)sum;
                }
        }
        if (t->requires_grad) {
            float* gt = t->ensure_grad().data();
            for (int64_t f = 0; f < F; f++)
                for (int64_t c = 0; c < C; c++) {
                    const float* gr = ng + (f * C + c) * HW;
                    double sum = 0.0;
                    for (int64_t i = 0; i < HW; i++) sum += gr[i];
                    gt[c] += (float)sum;
                }
        }
    });
}

Var add_broadcast_rows(const Var& x, const Var& p) {
    const auto& s = x->value.shape();
    PA_CHECK(s.size() == 3, "add_broadcast_rows: rank 3 expected");
    int64_t B = s[0], T = s[1], D = s[2];
    PA_CHECK(p->value.ndim() == 2 && p->value.dim(0) == T && p->value.dim(1) == D,
             "add_broadcast_rows: shape mismatch");
    Tensor out(s);
    const float* px = x->value.data();
    const float* pp = p->value.data();
    float* po = out.data();
    int64_t TD = T * D;
    for (int64_t b = 0; b < B; b++)
        for (int64_t i = 0; i < TD; i++) po[b * TD + i] = px[b * TD + i] + pp[i];
    return make_node(std::move(out), {x, p}, [x, p, B, TD](Node& n) {
        const float* ng = n.grad.data();
        if (x->requires_grad) axpy(x->ensure_grad(), n.grad);
        if (p->requires_grad) {
            float* gp = p->ensure_grad().data();
            for (int64_t b = 0; b < B; b++)
                for (int64_t i = 0; i < TD; i++) gp[i] += ng[b * TD + i];
        }
    });
}

Var mse(const Var& pred, const Var& target) {
    check_same_shape(pred, target, "mse");
    int64_t n = pred->value.numel();
    const float* pp = pred->value.data();
    const float* pt = target->value.data();
    double acc = 0.0;
    for (int64_t i = 0; i < n; i++) {
        double d = (double)pp[i] - (double)pt[i];
        acc += d * d;
    }
    Tensor out({1});
    out[0] = (float)(acc / (double)n);
    return make_node(std::move(out), {pred, target}, [pred, target, n](Node& nd) {
        float g = nd.grad[0] * 2.0f / (float)n;
        const float* pp = pred->value.data();
        const float* pt = target->value.data();
        if (pred->requires_grad) {
            float* gp = pred->ensure_grad().data();
            for (int64_t i = 0; i < n; i++) gp[i] += g * (pp[i] - pt[i]);
        }
        if (target->requires_grad) {
            float* gt = target->ensure_grad().data();
            for (int64_t i = 0; i < n; i++) gt[i] -= g * (pp[i] - pt[i]);
        }
    });
}

}  // namespace pa
