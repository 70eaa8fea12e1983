#pragma once

#include <string>
#include <vector>

#include "core/rng.h"
#include "data/types.h"

namespace pa {

// Procedural portrait corpus: an ellipse head with eyes that translate with
// gaze and a mouth that opens/closes, all driven by smooth sinusoid
// trajectories. Face box, gaze and identity metadata are exact because the
// renderer itself is parameterized by them.
struct SynthConfig {
    int64_t n_videos = 8;
    int64_t frames_per_video = 192;
    int64_t height = 64;
    int64_t width = 64;
    uint64_t seed = 1;
};

// Gaze angle ranges the renderer maps onto eye travel.
inline constexpr float kYawMaxDeg = 25.0f;
inline constexpr float kPitchMaxDeg = 15.0f;

// Pure function of (cfg, video_index); frames are pre-quantized to the u8
// grid so disk round trips are bitwise exact.
VideoClip render_synthetic_video(const SynthConfig& cfg, int64_t video_index);

// The analytic gaze trajectory the renderer consumed for this video —
// the oracle the stored metadata is checked against.
std::vector<GazeAngles> synthetic_gaze_trajectory(const SynthConfig& cfg, int64_t video_index);

// Layout: dir/manifest.jsonl plus one directory per video containing
// frames.rgbv and meta.json. Same seed, same bytes.
void synth_corpus(const SynthConfig& cfg, const std::string& dir);

std::vector<VideoClip> load_corpus(const std::string& dir);

// One video directory (frames.rgbv + meta.json), outside any manifest.
VideoClip load_video_dir(const std::string& vdir, const std::string& identity_id = "");

}  // namespace pa
