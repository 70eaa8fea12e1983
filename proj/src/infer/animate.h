#pragma once

#include <functional>
#include <string>
#include <vector>

#include "data/types.h"
#include "model/model.h"
#include "train/diffusion.h"

namespace pa {

// Half-open frame range [start, end).
struct Window {
    int64_t start = 0;
    int64_t end = 0;
    int64_t length() const { return end - start; }
};

// Sliding-window schedule over a video: fixed window length W, consecutive
// windows overlapping by O frames, final window clamped so it never overruns.
// Shorter videos get a single window covering everything.
struct WindowPlan {
    std::vector<Window> windows;
    int64_t total = 0;
    int64_t W = 0;
    int64_t O = 0;
};

WindowPlan plan_windows(int64_t total, int64_t W, int64_t O);

// Per-frame mean over every window that covers the frame. Frames covered by
// a single window are copied bitwise; overlapped frames are averaged in
// double precision. `outputs[k]` must be (len_k, C, h, w) for window k.
Tensor blend_windows(const WindowPlan& plan, const std::vector<Tensor>& outputs);

// ---- appearance transfer plugins ----
// Optional preprocessing that pushes the reference's appearance onto the
// driving frames before masking. Distinct from the identity-perturbation
// plugins: these need the reference image, not an RNG.
using AppearanceFn =
    std::function<void(VideoClip& driving, const Tensor& reference, const Tensor& ref_fg_mask)>;

// Replaces any previous registration. Built-ins: "none" (no-op) and
// "match_reference_color" (per-channel mean/std of each driving face box
// matched to the reference face region).
void register_appearance(const std::string& name, AppearanceFn fn);
std::vector<std::string> registered_appearances();
void apply_appearance(const std::string& name, VideoClip& driving, const Tensor& reference,
                      const Tensor& ref_fg_mask);

struct AnimateConfig {
    int64_t window = 16;
    int64_t overlap = 8;
    int64_t steps = 20;       // deterministic reverse-process steps
    int64_t schedule_T = 100;
    uint64_t seed = 1;
    std::string appearance_plugin = "match_reference_color";  // "" or "none" disables
};

// Denoises one window of frames. `driving_window` is the preprocessed
// driving slice (W,3,H,W); `init_noise` the (W,c_lat,h,w) starting latents;
// `ts` the descending timesteps to visit. Deterministic in its inputs.
Tensor generate_window(const PortraitModel& m, const PortraitModel::Conditioning& cond,
                       const Tensor& reference, const Tensor& driving_window,
                       const NoiseSchedule& schedule, const std::vector<int64_t>& ts,
                       const Tensor& init_noise);

// Initial latents for global frame indices [start, start+count): every frame
// index owns a seeded stream, so overlapping windows start from identical
// noise and seams blend cleanly.
Tensor frame_noise(uint64_t seed, int64_t start, int64_t count, int64_t c_lat, int64_t h,
                   int64_t w);

// Full pipeline: appearance transfer -> face masking -> conditioning (once)
// -> windowed denoising -> overlap blending -> decode. Output has exactly
// one frame per driving frame.
Tensor animate(const PortraitModel& m, const Tensor& reference, const Tensor& ref_fg_mask,
               const VideoClip& driving, const AnimateConfig& cfg);

// Peak signal-to-noise ratio over [0,1] images, in dB; +inf for identical.
double psnr(const Tensor& a, const Tensor& b);

}  // namespace pa
