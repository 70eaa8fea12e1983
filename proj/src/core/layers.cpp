#include "core/layers.h"

#include <cmath>

#include "core/error.h"

namespace pa {

Tensor uniform_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    float bound = 1.0f / std::sqrt((float)fan_in);
    rng.fill_uniform(t.data(), t.numel(), -bound, bound);
    return t;
}

void Linear::build(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
                   Init init, bool bias, bool trainable) {
    Tensor wt = init == Init::zeros ? Tensor::zeros({out, in}) : uniform_init({out, in}, in, rng);
    w = ps.add(name + ".weight", std::move(wt), trainable);
    if (bias) b = ps.add(name + ".bias", Tensor::zeros({out}), trainable);
}

void Conv2dLayer::build(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout, int k,
                        int stride_, int pad_, Rng& rng, Init init, bool bias, bool trainable) {
    stride = stride_;
    pad = pad_;
    int64_t fan_in = cin * k * k;
    Tensor wt = init == Init::zeros ? Tensor::zeros({cout, cin, k, k})
                                    : uniform_init({cout, cin, k, k}, fan_in, rng);
    w = ps.add(name + ".weight", std::move(wt), trainable);
    if (bias) b = ps.add(name + ".bias", Tensor::zeros({cout}), trainable);
}

void GroupNormLayer::build(ParamStore& ps, const std::string& name, int64_t channels, int groups_,
                           bool trainable) {
    groups = groups_;
    gamma = ps.add(name + ".gamma", Tensor::full({channels}, 1.0f), trainable);
    beta = ps.add(name + ".beta", Tensor::zeros({channels}), trainable);
}

void LayerNormLayer::build(ParamStore& ps, const std::string& name, int64_t dim, bool trainable) {
    gamma = ps.add(name + ".gamma", Tensor::full({dim}, 1.0f), trainable);
    beta = ps.add(name + ".beta", Tensor::zeros({dim}), trainable);
}

void AttentionHead::build(ParamStore& ps, const std::string& name, int64_t dim_, int64_t kv_dim_,
                          int heads_, Rng& rng, bool trainable) {
    heads = heads_;
    dim = dim_;
    kv_dim = kv_dim_;
    PA_CHECK(dim % heads == 0, "attention dim not divisible by head count");
    wq.build(ps, name + ".wq", dim, dim, rng, Init::uniform_fan_in, false, trainable);
    wk.build(ps, name + ".wk", kv_dim, dim, rng, Init::uniform_fan_in, false, trainable);
    wv.build(ps, name + ".wv", kv_dim, dim, rng, Init::uniform_fan_in, false, trainable);
    wo.build(ps, name + ".wo", dim, dim, rng, Init::uniform_fan_in, true, trainable);
}

Var AttentionHead::forward(const Var& q_tokens, const Var& kv_tokens) const {
    const auto& qs = q_tokens->value.shape();
    const auto& ks = kv_tokens->value.shape();
    PA_CHECK(qs.size() == 3 && ks.size() == 3, "attention: rank-3 token tensors expected");
    PA_CHECK(qs[0] == ks[0], "attention: batch mismatch");
    PA_CHECK(qs[2] == dim && ks[2] == kv_dim,
             "attention: token dim mismatch, q " + q_tokens->value.shape_str() + " kv " +
                 kv_tokens->value.shape_str());
    int64_t B = qs[0], T = qs[1], S = ks[1];
    int64_t dh = dim / heads;

    auto split_heads = [&](const Var& t, int64_t len) {
        // (B*len, dim) -> (B, len, H, dh) -> (B, H, len, dh) -> (B*H, len, dh)
        Var r = reshape(t, {B, len, heads, dh});
        r = permute(r, {0, 2, 1, 3});
        return reshape(r, {B * heads, len, dh});
    };

    Var q = split_heads(wq.forward(reshape(q_tokens, {B * T, dim})), T);
    Var k = split_heads(wk.forward(reshape(kv_tokens, {B * S, kv_dim})), S);
    Var v = split_heads(wv.forward(reshape(kv_tokens, {B * S, kv_dim})), S);

    Var scores = bmm(q, permute(k, {0, 2, 1}));          // (B*H, T, S)
    scores = scale(scores, 1.0f / std::sqrt((float)dh));
    Var att = softmax_lastdim(scores);
    Var ctx = bmm(att, v);                               // (B*H, T, dh)

    Var out = reshape(ctx, {B, heads, T, dh});
    out = permute(out, {0, 2, 1, 3});
    out = reshape(out, {B * T, dim});
    out = wo.forward(out);
    return reshape(out, {B, T, dim});
}

Tensor sinusoidal_embedding(int64_t n, int64_t dim, float max_period) {
    PA_CHECK(dim % 2 == 0, "sinusoidal embedding dim must be even");
    Tensor t({n, dim});
    int64_t half = dim / 2;
    for (int64_t p = 0; p < n; p++) {
        for (int64_t i = 0; i < half; i++) {
            double freq = std::exp(-std::log((double)max_period) * (double)i / (double)half);
            double a = (double)p * freq;
            t[p * dim + i] = (float)std::sin(a);
            t[p * dim + half + i] = (float)std::cos(a);
        }
    }
    return t;
}

Tensor timestep_embedding(int64_t t, int64_t dim, float max_period) {
    PA_CHECK(dim % 2 == 0, "timestep embedding dim must be even");
    Tensor e({1, dim});
    int64_t half = dim / 2;
    for (int64_t i = 0; i < half; i++) {
        double freq = std::exp(-std::log((double)max_period) * (double)i / (double)half);
        double a = (double)t * freq;
        e[i] = (float)std::sin(a);
        e[half + i] = (float)std::cos(a);
    }
    return e;
}

}  // namespace pa
