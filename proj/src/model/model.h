#pragma once

#include <memory>
#include <string>

#include "codec/codec.h"
#include "model/backbone.h"
#include "model/context.h"
#include "model/motion.h"

namespace pa {

// Everything needed to build the full generator deterministically from one
// seed. Latent geometry (c_lat, latent grid) is derived from the codec and
// the image size rather than stated twice.
struct PortraitModelConfig {
    std::string codec_id = "space_to_depth";
    uint64_t codec_seed = 1;
    int64_t image_hw = 64;

    int64_t base_channels = 32;
    std::vector<int64_t> channel_mult = {1, 2, 4};
    int64_t norm_groups = 8;
    int64_t heads = 4;
    int64_t context_dim = 64;
    int64_t temb_dim = 128;

    int64_t context_patch = 8;
    int64_t context_heads = 4;
    int64_t context_depth = 1;

    uint64_t seed = 1;
    bool temporal = false;  // insert frame-axis attention at build time
};

// UNet geometry implied by a model config (consults the codec for latent
// channel count and spatial reduction). Validated before return.
UNetConfig derive_unet_config(const PortraitModelConfig& cfg);

// The generator: codec + denoising UNet (conv-in expanded for the stacked
// conditioning input) + reference UNet + motion encoder + frozen context
// encoder, all registered in one ParamStore under distinct prefixes.
class PortraitModel {
public:
    explicit PortraitModel(const PortraitModelConfig& cfg);

    const PortraitModelConfig& config() const { return cfg_; }
    int64_t c_lat() const { return codec->c_lat(); }
    int64_t latent_hw() const { return cfg_.image_hw / codec->f(); }
    ChannelPlan channel_plan() const { return ChannelPlan{c_lat()}; }

    // Adds the temporal layers after construction (stage-2 transition).
    // Parameter values are identical to building with temporal = true.
    void insert_temporal();
    bool has_temporal() const { return denoiser->has_temporal(); }

    // Per-sample conditioning, computed once per reference image and shared
    // by every frame and denoising step. Under grad mode the bank stays
    // connected to the reference network for training.
    struct Conditioning {
        Tensor context_tokens;  // (1+P, D)
        Var ref_latent;         // (1, c_lat, h, w) leaf
        Tensor mask_lat;        // (1, h, w) binary, latent grid
        ReferenceBank bank;
    };
    Conditioning condition(const Tensor& reference, const Tensor& fg_mask,
                           AttentionAudit* audit = nullptr) const;

    ParamStore params;
    std::unique_ptr<Codec> codec;
    std::unique_ptr<UNet> denoiser;
    std::unique_ptr<UNet> refnet;
    std::unique_ptr<MotionEncoder> motion;
    std::unique_ptr<ContextEncoder> context;

private:
    PortraitModelConfig cfg_;
};

}  // namespace pa
