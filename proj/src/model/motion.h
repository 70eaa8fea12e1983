#pragma once

#include <string>
#include <utility>

#include "core/layers.h"
#include "core/module.h"

namespace pa {

constexpr int64_t kMotionChannels = 128;

// Stacked-input channel plan: [noise C_lat | motion 128 | ref_latent C_lat | mask 1].
// The order is fixed so checkpoints and the conv-in expansion stay portable.
struct ChannelPlan {
    int64_t c_lat = 0;
    int64_t c_mot = kMotionChannels;
    int64_t noise_begin() const { return 0; }
    int64_t motion_begin() const { return c_lat; }
    int64_t ref_begin() const { return c_lat + c_mot; }
    int64_t mask_begin() const { return 2 * c_lat + c_mot; }
    int64_t total() const { return 2 * c_lat + c_mot + 1; }
};

// Motion pathway: per-frame conv encoder over masked driving frames, bilinear
// alignment to the latent grid, and per-channel modulation derived from the
// reference image. Zero-initialised modulation MLP makes modulate() exact
// identity at init.
class MotionEncoder {
public:
    MotionEncoder(ParamStore& ps, std::string prefix, Rng& rng);

    // (F,3,H,W) masked driving frames -> (F,128,H/16,W/16); frames never mix.
    // When debug_warning is given, input that does not look masked (almost no
    // all-zero pixels) stores a leakage note there instead of failing.
    Var encode_motion(const Var& frames, std::string* debug_warning = nullptr) const;

    // Bilinear resample to the latent grid followed by a 1x1 conv.
    Var align_to_latent(const Var& raw, int64_t h, int64_t w) const;

    // scale/shift (each (128)) from the reference image via the twin conv
    // stack, global average pooling and the zero-initialised MLP.
    std::pair<Var, Var> modulation_params(const Var& reference) const;

    // motion * (1 + scale) + shift, broadcast per channel.
    Var modulate(const Var& motion, const Var& reference) const;

    // Full pathway: encode, align to (h,w), modulate.
    Var motion_features(const Var& frames, const Var& reference, int64_t h, int64_t w,
                        std::string* debug_warning = nullptr) const;

private:
    struct ConvStack {  // 3 -> 16 -> 32 -> 64 -> 128, 4x4 kernels, stride 2, SiLU after each
        Conv2dLayer c1, c2, c3, c4;
        void build(ParamStore& ps, const std::string& name, Rng& rng);
        Var forward(const Var& x) const;
    };

    std::string prefix_;
    ConvStack driven_, ref_enc_;
    Conv2dLayer align_;
    Linear mod1_, mod2_;  // mod2 zero-initialised: scale = shift = 0 at init
};

// Channel-concatenated denoiser input. noise (F,C_lat,h,w), motion
// (F,128,h,w), ref_latent (1,C_lat,h,w) and mask (1,h,w) broadcast over F.
Var assemble(const Var& noise, const Var& motion, const Var& ref_latent, const Var& mask);

// Block-max downsample of a binary (1,H,W) mask by an integer factor; a block
// containing any foreground pixel stays foreground.
Tensor downsample_mask(const Tensor& fg_mask, int64_t factor);

}  // namespace pa
