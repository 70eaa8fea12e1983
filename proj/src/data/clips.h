#pragma once

#include <functional>
#include <vector>

#include "core/rng.h"
#include "data/types.h"

namespace pa {

// ---- clip sampling ----

inline bool can_sample(const VideoClip& video, int64_t length, int64_t stride) {
    return video.length() >= (length - 1) * stride + 1;
}

// Frames f0, f0+s, ..., f0+(L-1)s with f0 drawn uniformly from the valid
// range; the returned reference_index is uniform over the sampled frames.
VideoClip sample_clip(const VideoClip& video, int64_t length, int64_t stride, Rng& rng,
                      int64_t* reference_index = nullptr);

// Deterministic variant starting at a given first frame.
VideoClip sample_clip_at(const VideoClip& video, int64_t f0, int64_t length, int64_t stride);

// ---- masking ----

// Everything outside the box becomes exactly 0; inside is untouched bitwise.
Tensor mask_face(const Tensor& frame, const FaceBox& box);
void mask_clip(VideoClip& clip);

// (1,H,W) indicator of the box, 1 inside / 0 outside.
Tensor box_mask(const FaceBox& box, int64_t H, int64_t W);

// ---- augmentation ----

struct AugmentConfig {
    float p_gray = 0.2f;    // probability of grayscale conversion
    float scale_lo = 0.8f;  // face rescale factor range, x and y independent
    float scale_hi = 1.2f;
};

// Draws one parameter set per clip (grayscale flag, x/y scale factors) and
// applies it to every frame: per-frame parameters would inject fake motion.
// The face region is rescaled about its center onto a black canvas and the
// face_box metadata is updated to the re-placed rectangle. Expects a masked
// clip (background already zero).
void augment_driving(VideoClip& clip, const AugmentConfig& cfg, Rng& rng);

// ---- identity perturbation plugins ----

using PerturbFn = std::function<void(VideoClip&, Rng&)>;

// Replaces any previous registration. Built-ins: "none", "warp_swap",
// "posterize_style".
void register_perturb(const std::string& plugin_id, PerturbFn fn, SourceTag tag);
std::vector<std::string> registered_perturbs();

// Applies the plugin per frame and sets source_tag; face_box and gaze
// metadata are never modified (motion stays consistent, identity does not).
void perturb_identity(VideoClip& clip, const std::string& plugin_id, Rng& rng);

// Level count for "posterize_style" (distinct values per channel per frame).
inline constexpr int kPosterizeLevels = 4;

// ---- gaze filtering ----

// Max angular gaze change between consecutive frames, in degrees; 0 for
// clips with fewer than two frames.
float gaze_change_score(const VideoClip& clip);
float gaze_change_score(const std::vector<GazeAngles>& gaze);

// Indices of the top ceil-ish fraction (k = max(1, round(fraction*N))) by
// score, ties broken by lower index. Output sorted ascending.
std::vector<size_t> filter_top_fraction(const std::vector<float>& scores, double fraction);

// ---- mixture sampling ----

struct MixProportions {
    double swapped = 0.4;
    double stylized = 0.1;
    double real = 0.5;
};

// One categorical draw; proportions must sum to 1 within 1e-6.
SourceTag draw_mix_tag(const MixProportions& mix, Rng& rng);

}  // namespace pa
