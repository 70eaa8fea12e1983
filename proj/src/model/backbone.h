#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "audit/audit.h"
#include "core/layers.h"
#include "core/module.h"
#include "core/ops.h"

namespace pa {

// Denoising UNet over latent frames. Data layout everywhere is (F, C, H, W)
// with F the frame axis; attention blocks flatten H*W into a token axis and
// keep F as the batch. The same class doubles as the reference feature
// extractor: run in capture mode it records the pre-attention hidden tokens
// at every injection site instead of consuming a bank.
struct UNetConfig {
    int64_t c_lat = 48;                             // latent channels in and out
    int64_t c_extra = 0;                            // extra input channels after conv-in expansion
    int64_t base_channels = 32;                     // channels at the finest level
    std::vector<int64_t> channel_mult = {1, 2, 4};  // one entry per level, finest first
    int64_t norm_groups = 8;
    int64_t heads = 4;
    int64_t context_dim = 64;   // width of the cross-attention token stream
    int64_t temb_dim = 128;     // timestep embedding width after the MLP
    int64_t latent_hw = 16;     // nominal latent resolution, used for site metadata only

    int64_t levels() const { return static_cast<int64_t>(channel_mult.size()); }
    int64_t channels_at(int64_t level) const { return base_channels * channel_mult[level]; }
    void validate() const;
};

struct AttentionSite {
    std::string site_id;  // "down0", "down1", ..., "mid", "up2", ..., "up0"
    std::string stage;    // "down" | "mid" | "up"
    int64_t level = 0;    // distance from the finest resolution
    int64_t resolution = 0;  // spatial side at the nominal latent size
    int64_t channels = 0;
    bool injection = false;  // receives reference tokens (mid and up stages only)
};

// Reference feature bank: site_id -> hidden tokens of shape (1, S, C) taken
// before the self-attention of that site. Entries are graph nodes so the
// reference branch trains through them.
using ReferenceBank = std::map<std::string, Var>;

namespace detail {

struct ResBlock {
    GroupNormLayer n1, n2;
    Conv2dLayer c1, c2;
    Linear temb_proj;
    Conv2dLayer skip;  // 1x1, only when cin != cout
    bool has_skip = false;

    void build(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout,
               int64_t groups, int64_t temb_dim, Rng& rng);
    Var forward(const Var& x, const Var& temb) const;
};

struct TransformerBlock {
    LayerNormLayer ln_self, ln_cross, ln_ff;
    AttentionHead self_attn, cross_attn;
    Linear ff1, ff2;
    int64_t channels = 0;

    void build(ParamStore& ps, const std::string& name, int64_t channels, int64_t heads,
               int64_t context_dim, Rng& rng);
    // x: (F, C, H, W); ctx: (F, T, D). inject, when non-null, points at the
    // token matrix concatenated into self-attention keys/values. capture,
    // when non-null, receives the pre-attention hidden tokens (1, S, C).
    Var forward(const Var& x, const Var& ctx, const Var* inject, Var* capture,
                AttentionAudit* audit, const std::string& site_id) const;
};

struct TemporalLayer {
    LayerNormLayer ln;
    AttentionHead attn;  // output projection zero-initialised: identity at init
    int64_t channels = 0;

    void build(ParamStore& ps, const std::string& name, int64_t channels, int64_t heads,
               Rng& rng);
    // Attention runs along the frame axis independently per spatial position.
    Var forward(const Var& x, AttentionAudit* audit, const std::string& site_id) const;
};

}  // namespace detail

class UNet {
public:
    // Declares all parameters under `prefix` ("denoiser" / "refnet") in ps.
    UNet(ParamStore& ps, std::string prefix, const UNetConfig& cfg, Rng& rng);

    // Widens conv-in by c_extra zero-initialised input channels, preserving
    // the original weights bitwise. Rejected if already expanded.
    void expand_conv_in(int64_t c_extra);

    // Adds one frame-axis attention layer after every attention site, all
    // zero-initialised so the expanded network reproduces the frame-wise
    // output exactly. Rejected if already inserted.
    void insert_temporal_layers(Rng& rng);
    bool has_temporal() const { return has_temporal_; }

    const UNetConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }
    const std::vector<AttentionSite>& sites() const { return sites_; }

    // x: (F, c_lat + c_extra, h, w) -> (F, c_lat, h, w). context_tokens is
    // (T, D) or (1, T, D) and is shared by every frame. bank, when given,
    // must hold one entry per injection site.
    Var forward(const Var& x, int64_t timestep, const Var& context_tokens,
                const ReferenceBank* bank = nullptr, AttentionAudit* audit = nullptr) const;

    // Reference pass: single frame, timestep fixed to 0, no bank consumed.
    // Returns the captured tokens for every injection site.
    ReferenceBank extract_reference(const Var& ref_latent, const Var& context_tokens,
                                    AttentionAudit* audit = nullptr) const;

private:
    Var run(const Var& x, int64_t timestep, const Var& context_tokens,
            const ReferenceBank* inject, ReferenceBank* capture, AttentionAudit* audit) const;
    Var apply_temporal(const Var& h, int64_t site_index, AttentionAudit* audit) const;

    UNetConfig cfg_;
    std::string prefix_;
    bool expanded_ = false;
    bool has_temporal_ = false;

    Conv2dLayer conv_in_;
    Linear temb1_, temb2_;
    std::vector<detail::ResBlock> down_res_;
    std::vector<detail::TransformerBlock> down_trans_;
    std::vector<Conv2dLayer> downsample_;
    detail::ResBlock mid_res_;
    detail::TransformerBlock mid_trans_;
    std::vector<detail::ResBlock> up_res_;      // indexed by level, applied deepest first
    std::vector<detail::TransformerBlock> up_trans_;
    std::vector<Conv2dLayer> upsample_;         // level l+1 -> l transition
    GroupNormLayer out_norm_;
    Conv2dLayer out_conv_;
    std::vector<AttentionSite> sites_;          // execution order
    std::vector<detail::TemporalLayer> temporal_;  // parallel to sites_ once inserted

    ParamStore* ps_ = nullptr;  // for conv-in expansion and temporal insertion
};

// Name and shape of every parameter a UNet with this config would declare,
// in declaration order, without allocating any of them. Lets tests pin the
// full-profile conv-in geometry that is never instantiated in this repo.
std::vector<std::pair<std::string, std::vector<int64_t>>> plan_unet_params(
    const UNetConfig& cfg, const std::string& prefix);

}  // namespace pa
