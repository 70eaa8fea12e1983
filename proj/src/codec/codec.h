#pragma once

#include <memory>
#include <string>

#include "core/module.h"
#include "core/layers.h"

namespace pa {

// Frame <-> latent conversion. Frames are (F,3,H,W) float32 in [0,1] with
// H,W divisible by f; latents are (F,c_lat,H/f,W/f). Latents carry no hidden
// normalization: whatever constant a codec needs is the explicit
// latent_scale field (applied on encode, divided out on decode).
class Codec {
public:
    virtual ~Codec() = default;

    const std::string& id() const { return id_; }
    int64_t f() const { return f_; }
    int64_t c_lat() const { return c_lat_; }

    float latent_scale = 1.0f;

    // (F,3,H,W) in [0,1] -> (F,c_lat,H/f,W/f)
    Tensor encode(const Tensor& frames) const;
    // (F,c_lat,h,w) -> (F,3,h*f,w*f)
    Tensor decode(const Tensor& latent) const;

protected:
    Codec(std::string id, int64_t f, int64_t c_lat)
        : id_(std::move(id)), f_(f), c_lat_(c_lat) {}
    virtual Tensor encode_impl(const Tensor& frames) const = 0;
    virtual Tensor decode_impl(const Tensor& latent) const = 0;

private:
    std::string id_;
    int64_t f_;
    int64_t c_lat_;
};

// Lossless pixel rearrangement: each f×f block of each color channel becomes
// f² latent channels. Bijective, so every downstream round-trip invariant is
// exact. c_lat = 3·f².
class SpaceToDepthCodec final : public Codec {
public:
    explicit SpaceToDepthCodec(int64_t f = 4);

protected:
    Tensor encode_impl(const Tensor& frames) const override;
    Tensor decode_impl(const Tensor& latent) const override;
};

// Small trained conv autoencoder, c_lat = 4, f = 4. Decoder ends in a
// sigmoid so decoded pixels always land in [0,1].
class LearnedTinyCodec final : public Codec {
public:
    explicit LearnedTinyCodec(uint64_t seed = 1);

    ParamStore& params() { return ps_; }
    const ParamStore& params() const { return ps_; }

    // One reconstruction training step on frames (F,3,H,W); returns the MSE.
    float train_step(const Tensor& frames, class Adam& opt);

protected:
    Tensor encode_impl(const Tensor& frames) const override;
    Tensor decode_impl(const Tensor& latent) const override;

private:
    Var encode_graph(const Var& frames) const;
    Var decode_graph(const Var& latent) const;

    ParamStore ps_;
    Conv2dLayer enc1_, enc2_, enc3_;
    Conv2dLayer dec1_, dec2_, dec3_;
};

// codec_id ∈ {"space_to_depth", "learned_tiny"}; anything else is an error.
std::unique_ptr<Codec> make_codec(const std::string& codec_id, uint64_t seed = 1);

}  // namespace pa
