#include "model/model.h"

#include "core/error.h"

namespace pa {

UNetConfig derive_unet_config(const PortraitModelConfig& cfg) {
    std::unique_ptr<Codec> codec = make_codec(cfg.codec_id, cfg.codec_seed);
    PA_CHECK(cfg.image_hw > 0 && cfg.image_hw % codec->f() == 0,
             "model config: image size must be divisible by the codec factor");
    PA_CHECK(cfg.image_hw % 16 == 0, "model config: image size must be divisible by 16 "
                                     "(motion encoder stride)");
    UNetConfig ucfg;
    ucfg.c_lat = codec->c_lat();
    ucfg.base_channels = cfg.base_channels;
    ucfg.channel_mult = cfg.channel_mult;
    ucfg.norm_groups = cfg.norm_groups;
    ucfg.heads = cfg.heads;
    ucfg.context_dim = cfg.context_dim;
    ucfg.temb_dim = cfg.temb_dim;
    ucfg.latent_hw = cfg.image_hw / codec->f();
    ucfg.validate();
    return ucfg;
}

PortraitModel::PortraitModel(const PortraitModelConfig& cfg) : cfg_(cfg) {
    UNetConfig ucfg = derive_unet_config(cfg_);
    codec = make_codec(cfg_.codec_id, cfg_.codec_seed);

    ContextConfig ccfg;
    ccfg.image_hw = cfg_.image_hw;
    ccfg.patch = cfg_.context_patch;
    ccfg.dim = cfg_.context_dim;
    ccfg.heads = cfg_.context_heads;
    ccfg.depth = cfg_.context_depth;
    ccfg.validate();

    Rng root(cfg_.seed);
    Rng r_den = root.child("denoiser");
    Rng r_ref = root.child("refnet");
    Rng r_mot = root.child("motion");
    Rng r_ctx = root.child("context");

    // The denoiser is declared for bare latents, then widened for the
    // stacked conditioning channels — mirroring how a pretrained image
    // backbone would be adapted.
    denoiser = std::make_unique<UNet>(params, "denoiser", ucfg, r_den);
    denoiser->expand_conv_in(kMotionChannels + codec->c_lat() + 1);
    refnet = std::make_unique<UNet>(params, "refnet", ucfg, r_ref);
    motion = std::make_unique<MotionEncoder>(params, "motion", r_mot);
    context = std::make_unique<ContextEncoder>(params, "context", ccfg, r_ctx);

    if (cfg_.temporal) insert_temporal();
}

void PortraitModel::insert_temporal() {
    Rng root(cfg_.seed);
    Rng r_tmp = root.child("temporal");
    denoiser->insert_temporal_layers(r_tmp);
    cfg_.temporal = true;
}

PortraitModel::Conditioning PortraitModel::condition(const Tensor& reference,
                                                     const Tensor& fg_mask,
                                                     AttentionAudit* audit) const {
    PA_CHECK(reference.ndim() == 3 && reference.dim(0) == 3 && reference.dim(1) == cfg_.image_hw &&
                 reference.dim(2) == cfg_.image_hw,
             "condition: reference must be (3," + std::to_string(cfg_.image_hw) + "," +
                 std::to_string(cfg_.image_hw) + ")");
    Conditioning c;
    c.context_tokens = context->encode_background(reference, fg_mask);
    Tensor ref4 = reference.reshape({1, 3, cfg_.image_hw, cfg_.image_hw});
    c.ref_latent = leaf(codec->encode(ref4));
    c.mask_lat = downsample_mask(fg_mask, codec->f());
    c.bank = refnet->extract_reference(c.ref_latent, leaf(c.context_tokens), audit);
    return c;
}

}  // namespace pa
