// Every differentiable op is checked two ways against the double-precision
// oracles in tests/oracles/ref_ops.h: forward values elementwise, and
// gradients by central finite differences of the oracle's scalar loss.
#include <array>
#include <vector>

#include "core/layers.h"
#include "core/module.h"
#include "core/ops.h"
#include "doctest.h"
#include "test_util.h"

using namespace pa;
namespace R = refops;

namespace {

// Engine loss and oracle loss share one definition: mean squared error
// against a fixed random target.
Var engine_loss(const Var& out, const Tensor& target) { return mse(out, leaf(target)); }

}  // namespace

TEST_CASE("elementwise chain: silu, sigmoid, mul, add, scale") {
    Rng rng(101);
    Tensor at = random_tensor({3, 5}, rng, -2.0f, 2.0f);
    Tensor bt = random_tensor({3, 5}, rng, -2.0f, 2.0f);
    Tensor tgt = random_tensor({3, 5}, rng);

    Var a = leaf(at, true), b = leaf(bt, true);
    Var out = add(mul(silu(a), b), scale(sigmoid(sub(a, b)), 0.5f));
    Var loss = engine_loss(out, tgt);
    backward(loss);

    R::DTensor A = lift(at), B = lift(bt), T = lift(tgt);
    auto fwd = [&]() {
        R::DTensor s = R::ew_mul(R::silu(A), B);
        R::DTensor d = A;
        for (size_t i = 0; i < d.v.size(); ++i) d.v[i] -= B.v[i];
        d = R::sigmoid(d);
        for (size_t i = 0; i < s.v.size(); ++i) s.v[i] += 0.5 * d.v[i];
        return s;
    };
    check_close(out->value, fwd());
    CHECK(loss->value[0] == doctest::Approx(R::mse(fwd(), T)).epsilon(1e-5));

    auto f = [&]() { return R::mse(fwd(), T); };
    check_grad(a->grad, A, f);
    check_grad(b->grad, B, f);
}

TEST_CASE("matmul forward and gradients") {
    Rng rng(102);
    Tensor at = random_tensor({4, 6}, rng);
    Tensor bt = random_tensor({6, 5}, rng);
    Tensor tgt = random_tensor({4, 5}, rng);

    Var a = leaf(at, true), b = leaf(bt, true);
    Var out = matmul(a, b);
    backward(engine_loss(out, tgt));

    R::DTensor A = lift(at), B = lift(bt), T = lift(tgt);
    check_close(out->value, R::matmul(A, B));
    auto f = [&]() { return R::mse(R::matmul(A, B), T); };
    check_grad(a->grad, A, f);
    check_grad(b->grad, B, f);
}

TEST_CASE("bmm forward and gradients") {
    Rng rng(103);
    Tensor at = random_tensor({3, 4, 5}, rng);
    Tensor bt = random_tensor({3, 5, 2}, rng);
    Tensor tgt = random_tensor({3, 4, 2}, rng);

    Var a = leaf(at, true), b = leaf(bt, true);
    Var out = bmm(a, b);
    backward(engine_loss(out, tgt));

    R::DTensor A = lift(at), B = lift(bt), T = lift(tgt);
    auto fwd = [&]() {
        R::DTensor o = R::make({3, 4, 2});
        for (int64_t i = 0; i < 3; ++i) {
            R::DTensor ai = R::make({4, 5}), bi = R::make({5, 2});
            std::copy(A.v.begin() + i * 20, A.v.begin() + (i + 1) * 20, ai.v.begin());
            std::copy(B.v.begin() + i * 10, B.v.begin() + (i + 1) * 10, bi.v.begin());
            R::DTensor oi = R::matmul(ai, bi);
            std::copy(oi.v.begin(), oi.v.end(), o.v.begin() + i * 8);
        }
        return o;
    };
    check_close(out->value, fwd());
    auto f = [&]() { return R::mse(fwd(), T); };
    check_grad(a->grad, A, f);
    check_grad(b->grad, B, f);
}

TEST_CASE("linear with and without bias") {
    Rng rng(104);
    Tensor xt = random_tensor({7, 4}, rng);
    Tensor wt = random_tensor({3, 4}, rng);
    Tensor bt = random_tensor({3}, rng);
    Tensor tgt = random_tensor({7, 3}, rng);

    R::DTensor X = lift(xt), W = lift(wt), B = lift(bt), T = lift(tgt);

    SUBCASE("bias") {
        Var x = leaf(xt, true), w = leaf(wt, true), b = leaf(bt, true);
        Var out = linear(x, w, b);
        backward(engine_loss(out, tgt));
        check_close(out->value, R::linear(X, W, B));
        auto f = [&]() { return R::mse(R::linear(X, W, B), T); };
        check_grad(x->grad, X, f);
        check_grad(w->grad, W, f);
        check_grad(b->grad, B, f);
    }
    SUBCASE("no bias") {
        Var x = leaf(xt, true), w = leaf(wt, true);
        Var out = linear(x, w, nullptr);
        backward(engine_loss(out, tgt));
        R::DTensor none;
        check_close(out->value, R::linear(X, W, none));
        auto f = [&]() { return R::mse(R::linear(X, W, none), T); };
        check_grad(x->grad, X, f);
        check_grad(w->grad, W, f);
    }
}

TEST_CASE("conv2d across stride, padding and kernel configurations") {
    Rng rng(105);
    struct Cfg {
        int64_t cin, cout, h, w;
        int k, stride, pad;
        bool bias;
    };
    // 3x3/s1/p1 is the backbone block shape; 4x4/s2/p1 is the frame encoder
    // shape; 1x1 covers projections.
    std::vector<Cfg> cfgs = {
        {3, 4, 6, 6, 3, 1, 1, true},
        {2, 3, 8, 7, 4, 2, 1, true},
        {3, 2, 5, 5, 1, 1, 0, false},
        {2, 2, 6, 6, 3, 2, 1, true},
    };
    for (const auto& c : cfgs) {
        CAPTURE(c.k);
        CAPTURE(c.stride);
        Tensor xt = random_tensor({2, c.cin, c.h, c.w}, rng);
        Tensor wt = random_tensor({c.cout, c.cin, c.k, c.k}, rng, -0.5f, 0.5f);
        Tensor bt = random_tensor({c.cout}, rng);

        Var x = leaf(xt, true), w = leaf(wt, true);
        Var b = c.bias ? leaf(bt, true) : nullptr;
        Var out = conv2d(x, w, b, c.stride, c.pad);

        R::DTensor X = lift(xt), W = lift(wt);
        R::DTensor B = c.bias ? lift(bt) : R::DTensor{};
        R::DTensor ref = R::conv2d(X, W, B, c.stride, c.pad);
        REQUIRE(out->value.shape() == ref.shape);
        check_close(out->value, ref);

        Tensor tgt = random_tensor(ref.shape, rng);
        backward(engine_loss(out, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::conv2d(X, W, B, c.stride, c.pad), T); };
        check_grad(x->grad, X, f);
        check_grad(w->grad, W, f);
        if (c.bias) check_grad(b->grad, B, f);
    }
}

TEST_CASE("conv2d rejects mismatched channel counts") {
    Var x = leaf(Tensor({1, 3, 4, 4}));
    Var w = leaf(Tensor({2, 4, 3, 3}));
    CHECK_THROWS_AS((void)conv2d(x, w, nullptr, 1, 1), std::runtime_error);
}

TEST_CASE("group_norm matches the oracle and differentiates through the statistics") {
    Rng rng(106);
    Tensor xt = random_tensor({2, 6, 3, 4}, rng, -2.0f, 2.0f);
    Tensor gt = random_tensor({6}, rng, 0.5f, 1.5f);
    Tensor bt = random_tensor({6}, rng, -0.3f, 0.3f);
    Tensor tgt = random_tensor({2, 6, 3, 4}, rng);

    Var x = leaf(xt, true), g = leaf(gt, true), b = leaf(bt, true);
    Var out = group_norm(x, 3, g, b);
    backward(engine_loss(out, tgt));

    R::DTensor X = lift(xt), G = lift(gt), B = lift(bt), T = lift(tgt);
    check_close(out->value, R::group_norm(X, G, B, 3, 1e-5));
    auto f = [&]() { return R::mse(R::group_norm(X, G, B, 3, 1e-5), T); };
    check_grad(x->grad, X, f);
    check_grad(g->grad, G, f);
    check_grad(b->grad, B, f);
}

TEST_CASE("layer_norm matches the oracle and differentiates through the statistics") {
    Rng rng(107);
    Tensor xt = random_tensor({3, 4, 8}, rng, -2.0f, 2.0f);
    Tensor gt = random_tensor({8}, rng, 0.5f, 1.5f);
    Tensor bt = random_tensor({8}, rng, -0.3f, 0.3f);
    Tensor tgt = random_tensor({3, 4, 8}, rng);

    Var x = leaf(xt, true), g = leaf(gt, true), b = leaf(bt, true);
    Var out = layer_norm(x, g, b);
    backward(engine_loss(out, tgt));

    R::DTensor X = lift(xt), G = lift(gt), B = lift(bt), T = lift(tgt);
    check_close(out->value, R::layer_norm(X, G, B, 1e-5));
    auto f = [&]() { return R::mse(R::layer_norm(X, G, B, 1e-5), T); };
    check_grad(x->grad, X, f);
    check_grad(g->grad, G, f);
    check_grad(b->grad, B, f);
}

TEST_CASE("softmax_lastdim matches the oracle, rows sum to one, grads check out") {
    Rng rng(108);
    Tensor xt = random_tensor({4, 7}, rng, -3.0f, 3.0f);
    Tensor tgt = random_tensor({4, 7}, rng);

    Var x = leaf(xt, true);
    Var out = softmax_lastdim(x);
    backward(engine_loss(out, tgt));

    R::DTensor X = lift(xt), T = lift(tgt);
    check_close(out->value, R::softmax_lastdim(X));
    for (int64_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < 7; ++j) s += (double)out->value[r * 7 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }
    auto f = [&]() { return R::mse(R::softmax_lastdim(X), T); };
    check_grad(x->grad, X, f);
}

TEST_CASE("shape ops: reshape, permute, concat, slice, tile_batch") {
    Rng rng(109);
    Tensor xt = random_tensor({2, 3, 4}, rng);
    Tensor yt = random_tensor({2, 5, 4}, rng);
    R::DTensor X = lift(xt), Y = lift(yt);

    SUBCASE("permute round trip and gradient") {
        Var x = leaf(xt, true);
        Var p = permute(x, {2, 0, 1});
        CHECK(p->value.shape() == std::vector<int64_t>{4, 2, 3});
        check_close(p->value, R::permute(X, {2, 0, 1}));

        Tensor tgt = random_tensor({4, 2, 3}, rng);
        backward(engine_loss(p, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::permute(X, {2, 0, 1}), T); };
        check_grad(x->grad, X, f);
    }
    SUBCASE("concat along middle axis and gradient to every input") {
        Var x = leaf(xt, true), y = leaf(yt, true);
        Var c = concat({x, y}, 1);
        CHECK(c->value.shape() == std::vector<int64_t>{2, 8, 4});
        check_close(c->value, R::concat({X, Y}, 1));

        Tensor tgt = random_tensor({2, 8, 4}, rng);
        backward(engine_loss(c, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::concat({X, Y}, 1), T); };
        check_grad(x->grad, X, f);
        check_grad(y->grad, Y, f);
    }
    SUBCASE("slice keeps the selected block and routes gradient back") {
        Var y = leaf(yt, true);
        Var s = slice(y, 1, 1, 4);
        CHECK(s->value.shape() == std::vector<int64_t>{2, 3, 4});
        check_close(s->value, R::slice(Y, 1, 1, 4));

        Tensor tgt = random_tensor({2, 3, 4}, rng);
        backward(engine_loss(s, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::slice(Y, 1, 1, 4), T); };
        check_grad(y->grad, Y, f);
    }
    SUBCASE("slice of concat is the identity on the second block") {
        Var x = leaf(xt), y = leaf(yt);
        Var back = slice(concat({x, y}, 1), 1, 3, 8);
        for (int64_t i = 0; i < back->value.numel(); ++i)
            CHECK(back->value[i] == yt[i]);
    }
    SUBCASE("tile_batch repeats and its gradient sums the repeats") {
        Var x = leaf(xt, true);
        Var t3 = tile_batch(x, 3);
        CHECK(t3->value.shape() == std::vector<int64_t>{6, 3, 4});
        check_close(t3->value, R::tile(X, 3));

        Tensor tgt = random_tensor({6, 3, 4}, rng);
        backward(engine_loss(t3, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::tile(X, 3), T); };
        check_grad(x->grad, X, f);
    }
    SUBCASE("reshape gradient flows through unchanged") {
        Var x = leaf(xt, true);
        Var r = reshape(x, {6, 4});
        Tensor tgt = random_tensor({6, 4}, rng);
        backward(engine_loss(r, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() {
            R::DTensor o = X;
            o.shape = {6, 4};
            return R::mse(o, T);
        };
        check_grad(x->grad, X, f);
    }
}

TEST_CASE("upsample_nearest2x and global_avg_pool") {
    Rng rng(110);
    Tensor xt = random_tensor({2, 3, 4, 5}, rng);
    R::DTensor X = lift(xt);

    SUBCASE("upsample") {
        Var x = leaf(xt, true);
        Var u = upsample_nearest2x(x);
        CHECK(u->value.shape() == std::vector<int64_t>{2, 3, 8, 10});
        check_close(u->value, R::upsample_nearest2x(X));
        Tensor tgt = random_tensor({2, 3, 8, 10}, rng);
        backward(engine_loss(u, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::upsample_nearest2x(X), T); };
        check_grad(x->grad, X, f);
    }
    SUBCASE("global average pool") {
        Var x = leaf(xt, true);
        Var p = global_avg_pool(x);
        CHECK(p->value.shape() == std::vector<int64_t>{2, 3});
        check_close(p->value, R::global_avg_pool(X));
        Tensor tgt = random_tensor({2, 3}, rng);
        backward(engine_loss(p, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::global_avg_pool(X), T); };
        check_grad(x->grad, X, f);
    }
}

TEST_CASE("resize_bilinear matches the oracle; same-size resize is exact") {
    Rng rng(111);
    Tensor xt = random_tensor({1, 2, 5, 7}, rng);
    R::DTensor X = lift(xt);

    SUBCASE("downscale") {
        Var x = leaf(xt, true);
        Var o = resize_bilinear(x, 3, 4);
        check_close(o->value, R::resize_bilinear(X, 3, 4));
        Tensor tgt = random_tensor({1, 2, 3, 4}, rng);
        backward(engine_loss(o, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::resize_bilinear(X, 3, 4), T); };
        check_grad(x->grad, X, f);
    }
    SUBCASE("upscale") {
        Var x = leaf(xt);
        Var o = resize_bilinear(x, 9, 11);
        check_close(o->value, R::resize_bilinear(X, 9, 11));
    }
    SUBCASE("identity when sizes match") {
        Tensor o = bilinear_resize_value(xt, 5, 7);
        for (int64_t i = 0; i < xt.numel(); ++i) CHECK(o[i] == xt[i]);
    }
}

TEST_CASE("broadcast arithmetic: channel bias, channel affine, row add") {
    Rng rng(112);
    Tensor xt = random_tensor({2, 3, 2, 2}, rng);
    Tensor bt = random_tensor({3}, rng);
    Tensor st = random_tensor({3}, rng, -0.5f, 0.5f);
    R::DTensor X = lift(xt), B = lift(bt), S = lift(st);

    SUBCASE("add_channel_bias") {
        Var x = leaf(xt, true), b = leaf(bt, true);
        Var o = add_channel_bias(x, b);
        check_close(o->value, R::add_channel_bias(X, B));
        Tensor tgt = random_tensor({2, 3, 2, 2}, rng);
        backward(engine_loss(o, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::add_channel_bias(X, B), T); };
        check_grad(x->grad, X, f);
        check_grad(b->grad, B, f);
    }
    SUBCASE("channel_affine is identity at zero parameters") {
        Var x = leaf(xt);
        Var o = channel_affine(x, leaf(Tensor({3})), leaf(Tensor({3})));
        for (int64_t i = 0; i < xt.numel(); ++i) CHECK(o->value[i] == xt[i]);
    }
    SUBCASE("channel_affine gradients") {
        Var x = leaf(xt, true), s = leaf(st, true), t = leaf(bt, true);
        Var o = channel_affine(x, s, t);
        check_close(o->value, R::channel_affine(X, S, B));
        Tensor tgt = random_tensor({2, 3, 2, 2}, rng);
        backward(engine_loss(o, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::channel_affine(X, S, B), T); };
        check_grad(x->grad, X, f);
        check_grad(s->grad, S, f);
        check_grad(t->grad, B, f);
    }
    SUBCASE("add_broadcast_rows") {
        Tensor pt = random_tensor({3, 4}, rng);
        Tensor x3 = random_tensor({2, 3, 4}, rng);
        R::DTensor P = lift(pt), X3 = lift(x3);
        Var x = leaf(x3, true), p = leaf(pt, true);
        Var o = add_broadcast_rows(x, p);
        check_close(o->value, R::add_broadcast_rows(X3, P));
        Tensor tgt = random_tensor({2, 3, 4}, rng);
        backward(engine_loss(o, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() { return R::mse(R::add_broadcast_rows(X3, P), T); };
        check_grad(x->grad, X3, f);
        check_grad(p->grad, P, f);
    }
}

TEST_CASE("mse value matches the oracle") {
    Rng rng(113);
    Tensor a = random_tensor({5, 5}, rng);
    Tensor b = random_tensor({5, 5}, rng);
    Var l = mse(leaf(a), leaf(b));
    CHECK(l->value.numel() == 1);
    CHECK(l->value[0] == doctest::Approx(R::mse(lift(a), lift(b))).epsilon(1e-6));
}

TEST_CASE("multi-head attention matches the oracle for self and cross shapes") {
    Rng rng(114);
    ParamStore ps;
    const int64_t D = 12, Dkv = 6;
    const int heads = 3;

    AttentionHead self_attn;
    self_attn.build(ps, "self", D, D, heads, rng);
    AttentionHead cross_attn;
    cross_attn.build(ps, "cross", D, Dkv, heads, rng);

    Tensor qt = random_tensor({2, 5, D}, rng);
    Tensor kt = random_tensor({2, 7, Dkv}, rng);
    R::DTensor Q = lift(qt), KV = lift(kt);

    auto weights = [&](const AttentionHead& h) {
        return std::array<R::DTensor, 5>{lift(h.wq.w->value), lift(h.wk.w->value),
                                         lift(h.wv.w->value), lift(h.wo.w->value),
                                         lift(h.wo.b->value)};
    };

    SUBCASE("self attention forward and input gradient") {
        Var q = leaf(qt, true);
        Var out = self_attn.forward(q, q);
        auto W = weights(self_attn);
        check_close(out->value, R::attention(Q, Q, W[0], W[1], W[2], W[3], W[4], heads));

        Tensor tgt = random_tensor({2, 5, D}, rng);
        backward(engine_loss(out, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() {
            return R::mse(R::attention(Q, Q, W[0], W[1], W[2], W[3], W[4], heads), T);
        };
        check_grad(q->grad, Q, f);
    }
    SUBCASE("cross attention with a narrower key/value dimension") {
        Var q = leaf(qt, true), kv = leaf(kt, true);
        Var out = cross_attn.forward(q, kv);
        auto W = weights(cross_attn);
        check_close(out->value, R::attention(Q, KV, W[0], W[1], W[2], W[3], W[4], heads));

        Tensor tgt = random_tensor({2, 5, D}, rng);
        backward(engine_loss(out, tgt));
        R::DTensor T = lift(tgt);
        auto f = [&]() {
            return R::mse(R::attention(Q, KV, W[0], W[1], W[2], W[3], W[4], heads), T);
        };
        check_grad(q->grad, Q, f);
        check_grad(kv->grad, KV, f);
    }
    SUBCASE("weight gradients flow") {
        Var q = leaf(qt, true);
        Var out = self_attn.forward(q, q);
        backward(engine_loss(out, random_tensor({2, 5, D}, rng)));
        auto Wq = lift(self_attn.wq.w->value);
        CHECK(self_attn.wq.w->grad.defined());
        CHECK(self_attn.wq.w->grad.max_abs() > 0.0f);
        (void)Wq;
    }
}

TEST_CASE("param store registers, orders, and hashes parameters") {
    Rng rng(115);
    ParamStore ps;
    Var a = ps.add("block.w", random_tensor({3, 3}, rng), true);
    Var b = ps.add("block.b", Tensor({3}), false);
    CHECK(ps.size() == 2);
    CHECK(ps.get("block.w") == a);
    CHECK(ps.has("block.b"));
    CHECK_FALSE(ps.has("missing"));
    CHECK_THROWS_AS((void)ps.add("block.w", Tensor({1})), std::runtime_error);
    CHECK(a->requires_grad);
    CHECK_FALSE(b->requires_grad);
    CHECK(ps.total_elements() == 12);
    CHECK(ps.with_prefix("block.").size() == 2);

    uint64_t h1 = ParamStore::hash_param(a);
    uint64_t h2 = ParamStore::hash_param(a);
    CHECK(h1 == h2);
    a->value[0] += 1.0f;
    CHECK(ParamStore::hash_param(a) != h1);
    uint64_t hs = ps.hash_named({"block.w", "block.b"});
    CHECK(hs != 0);
}

TEST_CASE("timestep embedding is deterministic and bounded") {
    Tensor e1 = timestep_embedding(17, 32);
    Tensor e2 = timestep_embedding(17, 32);
    Tensor e3 = timestep_embedding(18, 32);
    CHECK(e1.numel() == 32);
    bool same = true, diff = false;
    for (int64_t i = 0; i < 32; ++i) {
        same &= (e1[i] == e2[i]);
        diff |= (e1[i] != e3[i]);
        CHECK(std::abs(e1[i]) <= 1.0f);
    }
    CHECK(same);
    CHECK(diff);
}
