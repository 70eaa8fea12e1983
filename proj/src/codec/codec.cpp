#include "codec/codec.h"

#include "core/error.h"
#include "core/ops.h"
#include "train/adam.h"

namespace pa {

namespace {

void check_pixel_range(const Tensor& frames) {
    const float* p = frames.data();
    for (int64_t i = 0; i < frames.numel(); ++i)
        PA_CHECK(p[i] >= 0.0f && p[i] <= 1.0f,
                 "frame pixels must lie in [0,1], got " + std::to_string(p[i]));
}

}  // namespace

Tensor Codec::encode(const Tensor& frames) const {
    PA_CHECK(frames.ndim() == 4 && frames.dim(1) == 3,
             "encode expects frames (F,3,H,W), got " + frames.shape_str());
    PA_CHECK(frames.dim(2) % f_ == 0 && frames.dim(3) % f_ == 0,
             "frame dims " + std::to_string(frames.dim(2)) + "x" + std::to_string(frames.dim(3)) +
                 " not divisible by codec factor f=" + std::to_string(f_));
    PA_CHECK(frames.all_finite(), "encode: non-finite pixel values");
    check_pixel_range(frames);
    Tensor z = encode_impl(frames);
    if (latent_scale != 1.0f) {
        float* d = z.data();
        for (int64_t i = 0; i < z.numel(); ++i) d[i] *= latent_scale;
    }
    return z;
}

Tensor Codec::decode(const Tensor& latent) const {
    PA_CHECK(latent.ndim() == 4 && latent.dim(1) == c_lat_,
             "decode expects latents (F," + std::to_string(c_lat_) + ",h,w), got " +
                 latent.shape_str());
    PA_CHECK(latent.all_finite(), "decode: non-finite latent values");
    Tensor z = latent;
    if (latent_scale != 1.0f) {
        z = latent.clone();
        float* d = z.data();
        for (int64_t i = 0; i < z.numel(); ++i) d[i] /= latent_scale;
    }
    return decode_impl(z);
}

// ---- space_to_depth ----

SpaceToDepthCodec::SpaceToDepthCodec(int64_t f) : Codec("space_to_depth", f, 3 * f * f) {}

// Latent channel layout: c*f*f + dy*f + dx, i.e. color-major, then the
// position of the pixel inside its f×f block.
Tensor SpaceToDepthCodec::encode_impl(const Tensor& frames) const {
    const int64_t F = frames.dim(0), H = frames.dim(2), W = frames.dim(3);
    const int64_t fd = f(), h = H / fd, w = W / fd, C = c_lat();
    Tensor out({F, C, h, w});
    const float* src = frames.data();
    float* dst = out.data();
    for (int64_t fi = 0; fi < F; ++fi)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t dy = 0; dy < fd; ++dy)
                for (int64_t dx = 0; dx < fd; ++dx) {
                    const int64_t oc = c * fd * fd + dy * fd + dx;
                    for (int64_t y = 0; y < h; ++y)
                        for (int64_t x = 0; x < w; ++x)
                            dst[((fi * C + oc) * h + y) * w + x] =
                                src[((fi * 3 + c) * H + y * fd + dy) * W + x * fd + dx];
                }
    return out;
}

Tensor SpaceToDepthCodec::decode_impl(const Tensor& latent) const {
    const int64_t F = latent.dim(0), h = latent.dim(2), w = latent.dim(3);
    const int64_t fd = f(), H = h * fd, W = w * fd, C = c_lat();
    Tensor out({F, 3, H, W});
    const float* src = latent.data();
    float* dst = out.data();
    for (int64_t fi = 0; fi < F; ++fi)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t dy = 0; dy < fd; ++dy)
                for (int64_t dx = 0; dx < fd; ++dx) {
                    const int64_t ic = c * fd * fd + dy * fd + dx;
                    for (int64_t y = 0; y < h; ++y)
                        for (int64_t x = 0; x < w; ++x)
                            dst[((fi * 3 + c) * H + y * fd + dy) * W + x * fd + dx] =
                                src[((fi * C + ic) * h + y) * w + x];
                }
    return out;
}

// ---- learned_tiny ----

LearnedTinyCodec::LearnedTinyCodec(uint64_t seed) : Codec("learned_tiny", 4, 4) {
    Rng rng(seed);
    enc1_.build(ps_, "enc1", 3, 16, 3, 2, 1, rng);
    enc2_.build(ps_, "enc2", 16, 32, 3, 2, 1, rng);
    enc3_.build(ps_, "enc3", 32, 4, 3, 1, 1, rng);
    dec1_.build(ps_, "dec1", 4, 32, 3, 1, 1, rng);
    dec2_.build(ps_, "dec2", 32, 16, 3, 1, 1, rng);
    dec3_.build(ps_, "dec3", 16, 3, 3, 1, 1, rng);
}

Var LearnedTinyCodec::encode_graph(const Var& frames) const {
    Var h = silu(enc1_.forward(frames));
    h = silu(enc2_.forward(h));
    return enc3_.forward(h);
}

Var LearnedTinyCodec::decode_graph(const Var& latent) const {
    Var h = silu(dec1_.forward(latent));
    h = upsample_nearest2x(h);
    h = silu(dec2_.forward(h));
    h = upsample_nearest2x(h);
    return sigmoid(dec3_.forward(h));
}

Tensor LearnedTinyCodec::encode_impl(const Tensor& frames) const {
    NoGradGuard ng;
    return encode_graph(leaf(frames))->value;
}

Tensor LearnedTinyCodec::decode_impl(const Tensor& latent) const {
    NoGradGuard ng;
    return decode_graph(leaf(latent))->value;
}

float LearnedTinyCodec::train_step(const Tensor& frames, Adam& opt) {
    Var x = leaf(frames);
    Var loss = mse(decode_graph(encode_graph(x)), x);
    opt.zero_grad();
    backward(loss);
    opt.step();
    return loss->value[0];
}

std::unique_ptr<Codec> make_codec(const std::string& codec_id, uint64_t seed) {
    if (codec_id == "space_to_depth") return std::make_unique<SpaceToDepthCodec>();
    if (codec_id == "learned_tiny") return std::make_unique<LearnedTinyCodec>(seed);
    throw Error("unknown codec_id: " + codec_id);
}

}  // namespace pa
