#pragma once

#include <string>
#include <vector>

#include "core/layers.h"
#include "core/module.h"

namespace pa {

// Background-only image encoder producing the token stream that stands in for
// text embeddings in cross-attention: one global token followed by P patch
// tokens, all of width dim. Parameters are frozen from construction; the
// encoder is a fixed random feature extractor in the toy profile.
struct ContextConfig {
    int64_t image_hw = 64;
    int64_t patch = 8;
    int64_t dim = 64;
    int64_t heads = 4;
    int64_t depth = 1;  // transformer blocks
    void validate() const;
    int64_t patches_per_side() const { return image_hw / patch; }
    int64_t patch_count() const { return patches_per_side() * patches_per_side(); }
    int64_t token_count() const { return 1 + patch_count(); }
};

class ContextEncoder {
public:
    ContextEncoder(ParamStore& ps, std::string prefix, const ContextConfig& cfg, Rng& rng);

    const ContextConfig& config() const { return cfg_; }

    // reference (3,H,W), fg_mask (1,H,W) binary. The encoder sees the
    // reference with every foreground pixel zeroed, so tokens are invariant
    // to any change confined to the foreground.
    Tensor encode_background(const Tensor& reference, const Tensor& fg_mask) const;

    // [cls; patches] along the token axis followed by the merge projection.
    // cls is (D) or (1,D); patches is (P,D), P = 0 allowed.
    Tensor merge_tokens(const Tensor& cls, const Tensor& patches) const;

private:
    struct Block {
        LayerNormLayer ln1, ln2;
        AttentionHead attn;
        Linear ff1, ff2;
    };
    Tensor transform(const Tensor& background) const;  // pre-merge tokens (1+P, D)

    ContextConfig cfg_;
    std::string prefix_;
    Linear patch_embed_;
    Var cls_;
    Tensor pos_;  // fixed sinusoidal positions, (1+P, D)
    std::vector<Block> blocks_;
    LayerNormLayer ln_out_;
    Linear merge_;  // identity-initialised square projection
};

}  // namespace pa
