#include "model/motion.h"

#include "core/error.h"
#include "core/ops.h"

namespace pa {

void MotionEncoder::ConvStack::build(ParamStore& ps, const std::string& name, Rng& rng) {
    c1.build(ps, name + ".conv1", 3, 16, 4, 2, 1, rng);
    c2.build(ps, name + ".conv2", 16, 32, 4, 2, 1, rng);
    c3.build(ps, name + ".conv3", 32, 64, 4, 2, 1, rng);
    c4.build(ps, name + ".conv4", 64, kMotionChannels, 4, 2, 1, rng);
}

Var MotionEncoder::ConvStack::forward(const Var& x) const {
    Var h = silu(c1.forward(x));
    h = silu(c2.forward(h));
    h = silu(c3.forward(h));
    return silu(c4.forward(h));
}

MotionEncoder::MotionEncoder(ParamStore& ps, std::string prefix, Rng& rng)
    : prefix_(std::move(prefix)) {
    const std::string p = prefix_ + ".";
    driven_.build(ps, p + "driven", rng);
    align_.build(ps, p + "align", kMotionChannels, kMotionChannels, 1, 1, 0, rng);
    ref_enc_.build(ps, p + "refenc", rng);
    mod1_.build(ps, p + "mod1", kMotionChannels, kMotionChannels, rng);
    mod2_.build(ps, p + "mod2", kMotionChannels, 2 * kMotionChannels, rng, Init::zeros);
}

Var MotionEncoder::encode_motion(const Var& frames, std::string* debug_warning) const {
    const Tensor& v = frames->value;
    PA_CHECK(v.ndim() == 4 && v.dim(1) == 3, "motion encoder: input must be (F,3,H,W)");
    PA_CHECK(v.dim(2) % 16 == 0 && v.dim(3) % 16 == 0,
             "motion encoder: spatial dims must be divisible by 16");
    if (debug_warning) {
        // Masked driving frames black out everything beyond the face box, so
        // a plausible input has plenty of all-zero pixels. This is only a
        // heuristic leak detector, never a hard failure.
        int64_t hw = v.dim(2) * v.dim(3), zeros = 0;
        const float* d = v.data();
        for (int64_t f = 0; f < v.dim(0); f++)
            for (int64_t i = 0; i < hw; i++) {
                const float* px = d + (f * 3) * hw + i;
                if (px[0] == 0.0f && px[hw] == 0.0f && px[2 * hw] == 0.0f) zeros++;
            }
        if (zeros < v.dim(0) * hw / 100)
            *debug_warning = "driving frames look unmasked: fewer than 1% of pixels are black";
        else
            debug_warning->clear();
    }
    return driven_.forward(frames);
}

Var MotionEncoder::align_to_latent(const Var& raw, int64_t h, int64_t w) const {
    PA_CHECK(raw->value.ndim() == 4 && raw->value.dim(1) == kMotionChannels,
             "align: raw motion features must be (F,128,h,w)");
    return align_.forward(resize_bilinear(raw, h, w));
}

std::pair<Var, Var> MotionEncoder::modulation_params(const Var& reference) const {
    const Tensor& v = reference->value;
    PA_CHECK(v.ndim() == 3 || (v.ndim() == 4 && v.dim(0) == 1),
             "modulation: reference must be a single frame");
    Var img = v.ndim() == 3 ? reshape(reference, {1, v.dim(0), v.dim(1), v.dim(2)}) : reference;
    Var pooled = global_avg_pool(ref_enc_.forward(img));   // (1, 128)
    Var out = mod2_.forward(silu(mod1_.forward(pooled)));  // (1, 256)
    Var s = reshape(slice(out, 1, 0, kMotionChannels), {kMotionChannels});
    Var t = reshape(slice(out, 1, kMotionChannels, 2 * kMotionChannels), {kMotionChannels});
    return {s, t};
}

Var MotionEncoder::modulate(const Var& motion, const Var& reference) const {
    PA_CHECK(motion->value.ndim() == 4 && motion->value.dim(1) == kMotionChannels,
             "modulate: motion features must be (F,128,h,w)");
    auto [s, t] = modulation_params(reference);
    return channel_affine(motion, s, t);
}

Var MotionEncoder::motion_features(const Var& frames, const Var& reference, int64_t h, int64_t w,
                                   std::string* debug_warning) const {
    Var raw = encode_motion(frames, debug_warning);
    return modulate(align_to_latent(raw, h, w), reference);
}

Var assemble(const Var& noise, const Var& motion, const Var& ref_latent, const Var& mask) {
    const Tensor& nv = noise->value;
    const Tensor& mv = motion->value;
    const Tensor& rv = ref_latent->value;
    const Tensor& kv = mask->value;
    PA_CHECK(nv.ndim() == 4, "assemble: noise must be (F,C_lat,h,w)");
    int64_t F = nv.dim(0), h = nv.dim(2), w = nv.dim(3);
    PA_CHECK(mv.ndim() == 4 && mv.dim(0) == F && mv.dim(1) == kMotionChannels && mv.dim(2) == h &&
                 mv.dim(3) == w,
             "assemble: motion features disagree with noise dims");
    PA_CHECK(rv.ndim() == 4 && rv.dim(0) == 1 && rv.dim(1) == nv.dim(1) && rv.dim(2) == h &&
                 rv.dim(3) == w,
             "assemble: reference latent disagrees with noise dims");
    PA_CHECK(kv.ndim() == 3 && kv.dim(0) == 1 && kv.dim(1) == h && kv.dim(2) == w,
             "assemble: mask must be (1,h,w) on the latent grid");
    for (int64_t i = 0; i < kv.numel(); i++)
        PA_CHECK(kv[i] == 0.0f || kv[i] == 1.0f, "assemble: mask must be binary");

    Var ref_f = tile_batch(ref_latent, F);
    Var mask_f = tile_batch(reshape(mask, {1, 1, h, w}), F);
    return concat({noise, motion, ref_f, mask_f}, 1);
}

Tensor downsample_mask(const Tensor& fg_mask, int64_t factor) {
    PA_CHECK(fg_mask.ndim() == 3 && fg_mask.dim(0) == 1, "mask must be (1,H,W)");
    PA_CHECK(factor >= 1, "mask downsample factor must be >= 1");
    int64_t H = fg_mask.dim(1), W = fg_mask.dim(2);
    PA_CHECK(H % factor == 0 && W % factor == 0, "mask dims must be divisible by the factor");
    int64_t h = H / factor, w = W / factor;
    Tensor out = Tensor::zeros({1, h, w});
    for (int64_t y = 0; y < H; y++)
        for (int64_t x = 0; x < W; x++) {
            float v = fg_mask[y * W + x];
            PA_CHECK(v == 0.0f || v == 1.0f, "mask must be binary");
            if (v == 1.0f) out[(y / factor) * w + x / factor] = 1.0f;
        }
    return out;
}

}  // namespace pa
