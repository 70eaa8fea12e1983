#pragma once

#include "core/module.h"
#include "core/ops.h"

namespace pa {

enum class Init { uniform_fan_in, zeros };

struct Linear {
    Var w, b;  // w (out,in); b may be null
    void build(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
               Init init = Init::uniform_fan_in, bool bias = true, bool trainable = true);
    Var forward(const Var& x) const { return linear(x, w, b); }
};

struct Conv2dLayer {
    Var w, b;  // w (cout,cin,k,k)
    int stride = 1, pad = 0;
    void build(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout, int k,
               int stride, int pad, Rng& rng, Init init = Init::uniform_fan_in,
               bool bias = true, bool trainable = true);
    Var forward(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

struct GroupNormLayer {
    Var gamma, beta;
    int groups = 1;
    void build(ParamStore& ps, const std::string& name, int64_t channels, int groups,
               bool trainable = true);
    Var forward(const Var& x) const { return group_norm(x, groups, gamma, beta); }
};

struct LayerNormLayer {
    Var gamma, beta;
    void build(ParamStore& ps, const std::string& name, int64_t dim, bool trainable = true);
    Var forward(const Var& x) const { return layer_norm(x, gamma, beta); }
};

// Multi-head attention over token sequences. q_tokens (B,T,D) attends to
// kv_tokens (B,S,D); result (B,T,D). D must be divisible by heads.
struct AttentionHead {
    Linear wq, wk, wv, wo;
    int heads = 1;
    int64_t dim = 0, kv_dim = 0;
    void build(ParamStore& ps, const std::string& name, int64_t dim, int64_t kv_dim, int heads,
               Rng& rng, bool trainable = true);
    Var forward(const Var& q_tokens, const Var& kv_tokens) const;
};

// (n, dim) sinusoidal table; position i in [0, n). Standard transformer
// half-sin half-cos layout.
Tensor sinusoidal_embedding(int64_t n, int64_t dim, float max_period = 10000.0f);
// Single position variant for diffusion timesteps.
Tensor timestep_embedding(int64_t t, int64_t dim, float max_period = 10000.0f);

Tensor uniform_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng);

}  // namespace pa
