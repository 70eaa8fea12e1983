#include "model/context.h"

#include <cstring>

#include "core/error.h"
#include "core/ops.h"

namespace pa {

void ContextConfig::validate() const {
    PA_CHECK(image_hw > 0 && patch > 0, "context config: sizes must be positive");
    PA_CHECK(image_hw % patch == 0, "context config: patch must divide image size");
    PA_CHECK(dim > 0 && dim % 2 == 0, "context config: dim must be positive and even");
    PA_CHECK(heads > 0 && dim % heads == 0, "context config: dim not divisible by heads");
    PA_CHECK(depth >= 1, "context config: depth must be at least 1");
}

ContextEncoder::ContextEncoder(ParamStore& ps, std::string prefix, const ContextConfig& cfg,
                               Rng& rng)
    : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
    const std::string p = prefix_ + ".";
    const int64_t in_dim = 3 * cfg_.patch * cfg_.patch;

    // Frozen throughout: stage 1 freezes the image encoder and no later stage
    // unfreezes it, so every parameter is declared non-trainable.
    patch_embed_.build(ps, p + "patch_embed", in_dim, cfg_.dim, rng, Init::uniform_fan_in, true,
                       /*trainable=*/false);
    cls_ = ps.add(p + "cls", uniform_init({cfg_.dim}, cfg_.dim, rng), /*trainable=*/false);
    pos_ = sinusoidal_embedding(cfg_.token_count(), cfg_.dim);

    blocks_.resize(cfg_.depth);
    for (int64_t i = 0; i < cfg_.depth; i++) {
        std::string bp = p + "block" + std::to_string(i);
        Block& b = blocks_[i];
        b.ln1.build(ps, bp + ".norm1", cfg_.dim, false);
        b.attn.build(ps, bp + ".attn", cfg_.dim, cfg_.dim, (int)cfg_.heads, rng, false);
        b.ln2.build(ps, bp + ".norm2", cfg_.dim, false);
        b.ff1.build(ps, bp + ".ff1", cfg_.dim, 4 * cfg_.dim, rng, Init::uniform_fan_in, true, false);
        b.ff2.build(ps, bp + ".ff2", 4 * cfg_.dim, cfg_.dim, rng, Init::uniform_fan_in, true, false);
    }
    ln_out_.build(ps, p + "norm_out", cfg_.dim, false);

    merge_.build(ps, p + "merge", cfg_.dim, cfg_.dim, rng, Init::uniform_fan_in, true, false);
    Tensor& mw = merge_.w->value;
    mw.zero();
    for (int64_t i = 0; i < cfg_.dim; i++) mw[i * cfg_.dim + i] = 1.0f;
}

Tensor ContextEncoder::transform(const Tensor& background) const {
    const int64_t hw = cfg_.image_hw, p = cfg_.patch, n = cfg_.patches_per_side();
    const int64_t P = cfg_.patch_count(), D = cfg_.dim;

    // Patchify: row per patch, values ordered (channel, y, x) within a patch.
    Tensor patches({P, 3 * p * p});
    for (int64_t py = 0; py < n; py++)
        for (int64_t px = 0; px < n; px++) {
            float* row = patches.data() + (py * n + px) * 3 * p * p;
            for (int64_t c = 0; c < 3; c++)
                for (int64_t y = 0; y < p; y++)
                    std::memcpy(row + (c * p + y) * p,
                                background.data() + (c * hw + py * p + y) * hw + px * p,
                                sizeof(float) * p);
        }

    NoGradGuard ng;
    Var emb = patch_embed_.forward(leaf(patches));              // (P, D)
    Var toks = concat({reshape(cls_, {1, 1, D}), reshape(emb, {1, P, D})}, 1);
    toks = add_broadcast_rows(toks, leaf(pos_));                // (1, 1+P, D)
    for (const Block& b : blocks_) {
        Var qn = b.ln1.forward(toks);
        toks = add(toks, b.attn.forward(qn, qn));
        Var fn = reshape(b.ln2.forward(toks), {1 + P, D});
        toks = add(toks, reshape(b.ff2.forward(silu(b.ff1.forward(fn))), {1, 1 + P, D}));
    }
    toks = ln_out_.forward(toks);
    return reshape(toks, {1 + P, D})->value;
}

Tensor ContextEncoder::encode_background(const Tensor& reference, const Tensor& fg_mask) const {
    PA_CHECK(reference.ndim() == 3 && reference.dim(0) == 3 &&
                 reference.dim(1) == cfg_.image_hw && reference.dim(2) == cfg_.image_hw,
             "context encoder: reference must be (3," + std::to_string(cfg_.image_hw) + "," +
                 std::to_string(cfg_.image_hw) + ")");
    PA_CHECK(fg_mask.ndim() == 3 && fg_mask.dim(0) == 1 && fg_mask.dim(1) == reference.dim(1) &&
                 fg_mask.dim(2) == reference.dim(2),
             "context encoder: mask dims do not match the reference");

    const int64_t hw = cfg_.image_hw;
    Tensor background({3, hw, hw});
    for (int64_t i = 0; i < hw * hw; i++) {
        float m = fg_mask[i];
        PA_CHECK(m == 0.0f || m == 1.0f, "context encoder: mask must be binary");
        float keep = 1.0f - m;
        for (int64_t c = 0; c < 3; c++) background[c * hw * hw + i] = reference[c * hw * hw + i] * keep;
    }

    Tensor toks = transform(background);
    const int64_t P = cfg_.patch_count(), D = cfg_.dim;
    Tensor cls({D}), patch_toks({P, D});
    std::memcpy(cls.data(), toks.data(), sizeof(float) * D);
    std::memcpy(patch_toks.data(), toks.data() + D, sizeof(float) * P * D);
    return merge_tokens(cls, patch_toks);
}

Tensor ContextEncoder::merge_tokens(const Tensor& cls, const Tensor& patches) const {
    const int64_t D = cfg_.dim;
    PA_CHECK((cls.ndim() == 1 && cls.dim(0) == D) ||
                 (cls.ndim() == 2 && cls.dim(0) == 1 && cls.dim(1) == D),
             "merge: cls token must have the context dim");
    int64_t P = 0;
    if (patches.defined() && patches.numel() > 0) {
        PA_CHECK(patches.ndim() == 2 && patches.dim(1) == D, "merge: patch token dim mismatch");
        P = patches.dim(0);
    }
    Tensor stacked({1 + P, D});
    std::memcpy(stacked.data(), cls.data(), sizeof(float) * D);
    if (P > 0) std::memcpy(stacked.data() + D, patches.data(), sizeof(float) * P * D);

    NoGradGuard ng;
    return merge_.forward(leaf(stacked))->value;
}

}  // namespace pa
