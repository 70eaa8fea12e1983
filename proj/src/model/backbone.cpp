#include "model/backbone.h"

#include <cstring>

#include "core/error.h"

namespace pa {

void UNetConfig::validate() const {
    PA_CHECK(c_lat > 0, "unet config: c_lat must be positive");
    PA_CHECK(c_extra >= 0, "unet config: c_extra must be non-negative");
    PA_CHECK(base_channels > 0, "unet config: base_channels must be positive");
    PA_CHECK(levels() >= 2, "unet config: at least two resolution levels required");
    for (int64_t m : channel_mult)
        PA_CHECK(m > 0, "unet config: channel multipliers must be positive");
    PA_CHECK(norm_groups > 0, "unet config: norm_groups must be positive");
    PA_CHECK(heads > 0, "unet config: heads must be positive");
    for (int64_t l = 0; l < levels(); l++) {
        PA_CHECK(channels_at(l) % norm_groups == 0, "unet config: channels not divisible by norm groups");
        PA_CHECK(channels_at(l) % heads == 0, "unet config: channels not divisible by head count");
    }
    PA_CHECK(context_dim > 0, "unet config: context_dim must be positive");
    PA_CHECK(temb_dim > 0 && temb_dim % 2 == 0, "unet config: temb_dim must be positive and even");
    PA_CHECK(base_channels % 2 == 0, "unet config: base_channels must be even");
    PA_CHECK(latent_hw >= (int64_t{1} << (levels() - 1)), "unet config: latent size too small for level count");
}

namespace detail {

void ResBlock::build(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout,
                     int64_t groups, int64_t temb_dim, Rng& rng) {
    n1.build(ps, name + ".norm1", cin, (int)groups);
    c1.build(ps, name + ".conv1", cin, cout, 3, 1, 1, rng);
    temb_proj.build(ps, name + ".temb", temb_dim, cout, rng);
    n2.build(ps, name + ".norm2", cout, (int)groups);
    c2.build(ps, name + ".conv2", cout, cout, 3, 1, 1, rng, Init::zeros);
    has_skip = cin != cout;
    if (has_skip) skip.build(ps, name + ".skip", cin, cout, 1, 1, 0, rng);
}

Var ResBlock::forward(const Var& x, const Var& temb) const {
    Var h = c1.forward(silu(n1.forward(x)));
    Var bias = reshape(temb_proj.forward(silu(temb)), {h->value.dim(1)});
    h = add_channel_bias(h, bias);
    h = c2.forward(silu(n2.forward(h)));
    Var base = has_skip ? skip.forward(x) : x;
    return add(base, h);
}

void TransformerBlock::build(ParamStore& ps, const std::string& name, int64_t channels_,
                             int64_t heads, int64_t context_dim, Rng& rng) {
    channels = channels_;
    ln_self.build(ps, name + ".norm_self", channels);
    self_attn.build(ps, name + ".self", channels, channels, (int)heads, rng);
    ln_cross.build(ps, name + ".norm_cross", channels);
    cross_attn.build(ps, name + ".cross", channels, context_dim, (int)heads, rng);
    ln_ff.build(ps, name + ".norm_ff", channels);
    ff1.build(ps, name + ".ff1", channels, 4 * channels, rng);
    ff2.build(ps, name + ".ff2", 4 * channels, channels, rng);
}

Var TransformerBlock::forward(const Var& x, const Var& ctx, const Var* inject, Var* capture,
                              AttentionAudit* audit, const std::string& site_id) const {
    int64_t F = x->value.dim(0), C = x->value.dim(1);
    int64_t H = x->value.dim(2), W = x->value.dim(3);
    PA_CHECK(C == channels, "transformer block: channel mismatch at " + site_id);
    int64_t HW = H * W;

    Var tokens = permute(reshape(x, {F, C, HW}), {0, 2, 1});  // (F, HW, C)
    if (capture) *capture = tokens;                           // pre-attention hidden state

    // Self-attention; injected reference tokens pass through this block's own
    // norm so they live on the same scale as the query stream, then extend
    // the key/value sequence of every frame.
    Var qn = ln_self.forward(tokens);
    Var kv = qn;
    if (inject) {
        const Var& r = *inject;  // (1, S, C)
        PA_CHECK(r->value.ndim() == 3 && r->value.dim(0) == 1 && r->value.dim(2) == C,
                 "reference tokens have wrong shape at " + site_id);
        Var rn = ln_self.forward(r);
        kv = concat({qn, tile_batch(rn, F)}, 1);
    }
    if (audit) audit->events.push_back({site_id, "self", HW, kv->value.dim(1)});
    Var h = add(tokens, self_attn.forward(qn, kv));

    // Cross-attention over the shared conditioning tokens (already tiled to F).
    PA_CHECK(ctx->value.ndim() == 3 && ctx->value.dim(0) == F,
             "context tokens not tiled to frame count at " + site_id);
    if (audit) audit->events.push_back({site_id, "cross", HW, ctx->value.dim(1)});
    h = add(h, cross_attn.forward(ln_cross.forward(h), ctx));

    // Position-wise feed-forward.
    Var fn = reshape(ln_ff.forward(h), {F * HW, C});
    Var ff = ff2.forward(silu(ff1.forward(fn)));
    h = add(h, reshape(ff, {F, HW, C}));

    return reshape(permute(h, {0, 2, 1}), {F, C, H, W});
}

void TemporalLayer::build(ParamStore& ps, const std::string& name, int64_t channels_,
                          int64_t heads, Rng& rng) {
    channels = channels_;
    ln.build(ps, name + ".norm", channels);
    attn.build(ps, name + ".attn", channels, channels, (int)heads, rng);
    // Zero output projection: the residual path is exact identity until the
    // layer is trained, so inserting it cannot disturb a frame-wise model.
    attn.wo.w->value.zero();
    attn.wo.b->value.zero();
}

Var TemporalLayer::forward(const Var& x, AttentionAudit* audit, const std::string& site_id) const {
    int64_t F = x->value.dim(0), C = x->value.dim(1);
    int64_t H = x->value.dim(2), W = x->value.dim(3);
    PA_CHECK(C == channels, "temporal layer: channel mismatch at " + site_id);
    int64_t HW = H * W;

    // Tokens ordered (spatial position, frame, channel): attention mixes
    // frames independently at each spatial position.
    Var tokens = permute(reshape(x, {F, C, HW}), {2, 0, 1});  // (HW, F, C)
    Var pos = leaf(sinusoidal_embedding(F, C));
    Var qn = ln.forward(add_broadcast_rows(tokens, pos));
    if (audit) audit->events.push_back({site_id, "temporal", F, F});
    Var h = add(tokens, attn.forward(qn, qn));
    return reshape(permute(h, {1, 2, 0}), {F, C, H, W});
}

}  // namespace detail

UNet::UNet(ParamStore& ps, std::string prefix, const UNetConfig& cfg, Rng& rng)
    : cfg_(cfg), prefix_(std::move(prefix)), ps_(&ps) {
    cfg_.validate();
    const int64_t L = cfg_.levels();
    const std::string p = prefix_ + ".";

    conv_in_.build(ps, p + "conv_in", cfg_.c_lat + cfg_.c_extra, cfg_.base_channels, 3, 1, 1, rng);
    temb1_.build(ps, p + "temb1", cfg_.base_channels, cfg_.temb_dim, rng);
    temb2_.build(ps, p + "temb2", cfg_.temb_dim, cfg_.temb_dim, rng);

    down_res_.resize(L);
    down_trans_.resize(L);
    downsample_.resize(L - 1);
    for (int64_t l = 0; l < L; l++) {
        std::string site = "down" + std::to_string(l);
        int64_t ch = cfg_.channels_at(l);
        down_res_[l].build(ps, p + site + ".res", ch, ch, cfg_.norm_groups, cfg_.temb_dim, rng);
        down_trans_[l].build(ps, p + site + ".attn", ch, cfg_.heads, cfg_.context_dim, rng);
        sites_.push_back({site, "down", l, cfg_.latent_hw >> l, ch, false});
        if (l < L - 1)
            downsample_[l].build(ps, p + site + ".downsample", ch, cfg_.channels_at(l + 1), 3, 2, 1,
                                 rng);
    }

    int64_t mid_ch = cfg_.channels_at(L - 1);
    mid_res_.build(ps, p + "mid.res", mid_ch, mid_ch, cfg_.norm_groups, cfg_.temb_dim, rng);
    mid_trans_.build(ps, p + "mid.attn", mid_ch, cfg_.heads, cfg_.context_dim, rng);
    sites_.push_back({"mid", "mid", L - 1, cfg_.latent_hw >> (L - 1), mid_ch, true});

    up_res_.resize(L);
    up_trans_.resize(L);
    upsample_.resize(L - 1);
    for (int64_t l = L - 1; l >= 0; l--) {
        std::string site = "up" + std::to_string(l);
        int64_t ch = cfg_.channels_at(l);
        // Input is the running stream concatenated with the skip from the
        // matching down level, so the res block halves the channel count.
        up_res_[l].build(ps, p + site + ".res", 2 * ch, ch, cfg_.norm_groups, cfg_.temb_dim, rng);
        up_trans_[l].build(ps, p + site + ".attn", ch, cfg_.heads, cfg_.context_dim, rng);
        sites_.push_back({site, "up", l, cfg_.latent_hw >> l, ch, true});
        if (l > 0)
            upsample_[l - 1].build(ps, p + site + ".upsample", ch, cfg_.channels_at(l - 1), 3, 1, 1,
                                   rng);
    }

    out_norm_.build(ps, p + "out.norm", cfg_.base_channels, (int)cfg_.norm_groups);
    out_conv_.build(ps, p + "out.conv", cfg_.base_channels, cfg_.c_lat, 3, 1, 1, rng, Init::zeros);
}

void UNet::expand_conv_in(int64_t c_extra) {
    PA_CHECK(!expanded_, "conv-in already expanded");
    PA_CHECK(c_extra > 0, "conv-in expansion needs a positive channel count");
    const Tensor& old = conv_in_.w->value;
    int64_t cout = old.dim(0), cin = old.dim(1), k = old.dim(2);
    Tensor next = Tensor::zeros({cout, cin + c_extra, k, k});
    // Original input channels keep their weights bitwise; new channels start
    // at zero so the expanded network initially ignores the extra planes.
    for (int64_t co = 0; co < cout; co++)
        for (int64_t ci = 0; ci < cin; ci++)
            std::memcpy(next.data() + ((co * (cin + c_extra) + ci) * k * k),
                        old.data() + ((co * cin + ci) * k * k), sizeof(float) * k * k);
    conv_in_.w->value = next;
    conv_in_.w->grad = Tensor();
    cfg_.c_extra = c_extra;
    expanded_ = true;
}

void UNet::insert_temporal_layers(Rng& rng) {
    PA_CHECK(!has_temporal_, "temporal layers already inserted");
    temporal_.resize(sites_.size());
    for (size_t i = 0; i < sites_.size(); i++)
        temporal_[i].build(*ps_, prefix_ + "." + sites_[i].site_id + ".temporal",
                           sites_[i].channels, cfg_.heads, rng);
    has_temporal_ = true;
}

Var UNet::apply_temporal(const Var& h, int64_t site_index, AttentionAudit* audit) const {
    if (!has_temporal_) return h;
    return temporal_[site_index].forward(h, audit, sites_[site_index].site_id);
}

Var UNet::forward(const Var& x, int64_t timestep, const Var& context_tokens,
                  const ReferenceBank* bank, AttentionAudit* audit) const {
    return run(x, timestep, context_tokens, bank, nullptr, audit);
}

ReferenceBank UNet::extract_reference(const Var& ref_latent, const Var& context_tokens,
                                      AttentionAudit* audit) const {
    PA_CHECK(ref_latent->value.ndim() == 4 && ref_latent->value.dim(0) == 1,
             "reference extraction expects a single frame");
    ReferenceBank bank;
    run(ref_latent, 0, context_tokens, nullptr, &bank, audit);
    return bank;
}

Var UNet::run(const Var& x, int64_t timestep, const Var& context_tokens,
              const ReferenceBank* inject, ReferenceBank* capture, AttentionAudit* audit) const {
    const Tensor& xv = x->value;
    PA_CHECK(xv.ndim() == 4, "unet input must be (frames, channels, h, w)");
    PA_CHECK(xv.dim(1) == cfg_.c_lat + cfg_.c_extra,
             "unet input has " + std::to_string(xv.dim(1)) + " channels, expected " +
                 std::to_string(cfg_.c_lat + cfg_.c_extra));
    int64_t F = xv.dim(0);
    int64_t div = int64_t{1} << (cfg_.levels() - 1);
    PA_CHECK(xv.dim(2) % div == 0 && xv.dim(3) % div == 0,
             "unet input spatial dims must be divisible by " + std::to_string(div));
    PA_CHECK(timestep >= 0, "unet timestep must be non-negative");

    Var ctx = context_tokens;
    if (ctx->value.ndim() == 2) ctx = reshape(ctx, {1, ctx->value.dim(0), ctx->value.dim(1)});
    PA_CHECK(ctx->value.ndim() == 3 && ctx->value.dim(0) == 1,
             "context tokens must be (tokens, dim)");
    PA_CHECK(ctx->value.dim(2) == cfg_.context_dim, "context token dim mismatch");
    Var ctx_f = tile_batch(ctx, F);

    auto bank_entry = [&](const std::string& site_id) -> const Var* {
        if (!inject) return nullptr;
        auto it = inject->find(site_id);
        PA_CHECK(it != inject->end(), "reference bank missing entry for site " + site_id);
        return &it->second;
    };
    auto capture_slot = [&](const std::string& site_id) -> Var* {
        return capture ? &(*capture)[site_id] : nullptr;
    };

    Var temb = temb2_.forward(silu(temb1_.forward(leaf(timestep_embedding(timestep, cfg_.base_channels)))));

    Var h = conv_in_.forward(x);
    const int64_t L = cfg_.levels();
    std::vector<Var> skips(L);
    int64_t site = 0;
    for (int64_t l = 0; l < L; l++, site++) {
        h = down_res_[l].forward(h, temb);
        // Down sites never receive or produce reference tokens.
        h = down_trans_[l].forward(h, ctx_f, nullptr, nullptr, audit, sites_[site].site_id);
        h = apply_temporal(h, site, audit);
        skips[l] = h;
        if (l < L - 1) h = downsample_[l].forward(h);
    }

    h = mid_res_.forward(h, temb);
    h = mid_trans_.forward(h, ctx_f, bank_entry("mid"), capture_slot("mid"), audit, "mid");
    h = apply_temporal(h, site, audit);
    site++;

    for (int64_t l = L - 1; l >= 0; l--, site++) {
        h = concat({h, skips[l]}, 1);
        h = up_res_[l].forward(h, temb);
        const std::string& id = sites_[site].site_id;
        h = up_trans_[l].forward(h, ctx_f, bank_entry(id), capture_slot(id), audit, id);
        h = apply_temporal(h, site, audit);
        if (l > 0) h = upsample_[l - 1].forward(upsample_nearest2x(h));
    }

    return out_conv_.forward(silu(out_norm_.forward(h)));
}

// Mirrors the declaration sequence of the constructor exactly; the unit test
// pins plan == store contents for a built network, so the full-profile plan
// can be trusted without allocating it.
std::vector<std::pair<std::string, std::vector<int64_t>>> plan_unet_params(
    const UNetConfig& cfg, const std::string& prefix) {
    cfg.validate();
    std::vector<std::pair<std::string, std::vector<int64_t>>> out;
    auto add = [&](const std::string& n, std::vector<int64_t> s) {
        out.emplace_back(n, std::move(s));
    };
    auto linear_p = [&](const std::string& n, int64_t in, int64_t o, bool bias = true) {
        add(n + ".weight", {o, in});
        if (bias) add(n + ".bias", {o});
    };
    auto conv_p = [&](const std::string& n, int64_t cin, int64_t cout, int64_t k) {
        add(n + ".weight", {cout, cin, k, k});
        add(n + ".bias", {cout});
    };
    auto norm_p = [&](const std::string& n, int64_t ch) {
        add(n + ".gamma", {ch});
        add(n + ".beta", {ch});
    };
    auto res_p = [&](const std::string& n, int64_t cin, int64_t cout) {
        norm_p(n + ".norm1", cin);
        conv_p(n + ".conv1", cin, cout, 3);
        linear_p(n + ".temb", cfg.temb_dim, cout);
        norm_p(n + ".norm2", cout);
        conv_p(n + ".conv2", cout, cout, 3);
        if (cin != cout) conv_p(n + ".skip", cin, cout, 1);
    };
    auto attn_p = [&](const std::string& n, int64_t dim, int64_t kv_dim) {
        linear_p(n + ".wq", dim, dim, false);
        linear_p(n + ".wk", kv_dim, dim, false);
        linear_p(n + ".wv", kv_dim, dim, false);
        linear_p(n + ".wo", dim, dim, true);
    };
    auto trans_p = [&](const std::string& n, int64_t ch) {
        norm_p(n + ".norm_self", ch);
        attn_p(n + ".self", ch, ch);
        norm_p(n + ".norm_cross", ch);
        attn_p(n + ".cross", ch, cfg.context_dim);
        norm_p(n + ".norm_ff", ch);
        linear_p(n + ".ff1", ch, 4 * ch);
        linear_p(n + ".ff2", 4 * ch, ch);
    };

    const std::string p = prefix + ".";
    const int64_t L = cfg.levels();
    conv_p(p + "conv_in", cfg.c_lat + cfg.c_extra, cfg.base_channels, 3);
    linear_p(p + "temb1", cfg.base_channels, cfg.temb_dim);
    linear_p(p + "temb2", cfg.temb_dim, cfg.temb_dim);
    for (int64_t l = 0; l < L; l++) {
        std::string site = p + "down" + std::to_string(l);
        int64_t ch = cfg.channels_at(l);
        res_p(site + ".res", ch, ch);
        trans_p(site + ".attn", ch);
        if (l < L - 1) conv_p(site + ".downsample", ch, cfg.channels_at(l + 1), 3);
    }
    res_p(p + "mid.res", cfg.channels_at(L - 1), cfg.channels_at(L - 1));
    trans_p(p + "mid.attn", cfg.channels_at(L - 1));
    for (int64_t l = L - 1; l >= 0; l--) {
        std::string site = p + "up" + std::to_string(l);
        int64_t ch = cfg.channels_at(l);
        res_p(site + ".res", 2 * ch, ch);
        trans_p(site + ".attn", ch);
        if (l > 0) conv_p(site + ".upsample", ch, cfg.channels_at(l - 1), 3);
    }
    norm_p(p + "out.norm", cfg.base_channels);
    conv_p(p + "out.conv", cfg.base_channels, cfg.c_lat, 3);
    return out;
}

}  // namespace pa
