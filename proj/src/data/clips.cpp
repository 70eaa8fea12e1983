#include "data/clips.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "core/ops.h"

namespace pa {

VideoClip sample_clip(const VideoClip& video, int64_t length, int64_t stride, Rng& rng,
                      int64_t* reference_index) {
    PA_CHECK(length >= 1 && stride >= 1, "sample_clip: length and stride must be >= 1");
    PA_CHECK(can_sample(video, length, stride),
             "sample_clip: video of " + std::to_string(video.length()) +
                 " frames too short for length " + std::to_string(length) + " stride " +
                 std::to_string(stride));
    const int64_t span = (length - 1) * stride + 1;
    const int64_t f0 = (int64_t)rng.uniform_index((uint64_t)(video.length() - span + 1));
    VideoClip out = sample_clip_at(video, f0, length, stride);
    if (reference_index) *reference_index = (int64_t)rng.uniform_index((uint64_t)length);
    return out;
}

VideoClip sample_clip_at(const VideoClip& video, int64_t f0, int64_t length, int64_t stride) {
    PA_CHECK(f0 >= 0 && f0 + (length - 1) * stride < video.length(),
             "sample_clip_at: window exceeds video length");
    VideoClip out;
    out.identity_id = video.identity_id;
    out.source_tag = video.source_tag;
    out.frames = Tensor({length, 3, video.height(), video.width()});
    const int64_t frame_elems = 3 * video.height() * video.width();
    for (int64_t i = 0; i < length; ++i) {
        const int64_t src = f0 + i * stride;
        std::copy(video.frames.data() + src * frame_elems,
                  video.frames.data() + (src + 1) * frame_elems,
                  out.frames.data() + i * frame_elems);
        out.face_box.push_back(video.face_box[(size_t)src]);
        out.gaze.push_back(video.gaze[(size_t)src]);
    }
    return out;
}

Tensor mask_face(const Tensor& frame, const FaceBox& box) {
    PA_CHECK(frame.ndim() == 3 && frame.dim(0) == 3,
             "mask_face expects (3,H,W), got " + frame.shape_str());
    const int64_t H = frame.dim(1), W = frame.dim(2);
    PA_CHECK(box.x >= 0 && box.y >= 0 && box.x + box.w <= W && box.y + box.h <= H,
             "mask_face: box out of bounds");
    Tensor out(frame.shape());
    const float* src = frame.data();
    float* dst = out.data();
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = box.y; y < box.y + box.h; ++y)
            for (int64_t x = box.x; x < box.x + box.w; ++x)
                dst[(c * H + y) * W + x] = src[(c * H + y) * W + x];
    return out;
}

void mask_clip(VideoClip& clip) {
    const int64_t frame_elems = 3 * clip.height() * clip.width();
    Tensor masked(clip.frames.shape());
    for (int64_t f = 0; f < clip.length(); ++f) {
        Tensor one = Tensor::from_data(
            {3, clip.height(), clip.width()},
            std::vector<float>(clip.frames.data() + f * frame_elems,
                               clip.frames.data() + (f + 1) * frame_elems));
        Tensor m = mask_face(one, clip.face_box[(size_t)f]);
        std::copy(m.data(), m.data() + frame_elems, masked.data() + f * frame_elems);
    }
    clip.frames = masked;
}

Tensor box_mask(const FaceBox& box, int64_t H, int64_t W) {
    Tensor m({1, H, W});
    float* d = m.data();
    for (int64_t y = box.y; y < box.y + box.h; ++y)
        for (int64_t x = box.x; x < box.x + box.w; ++x) d[y * W + x] = 1.0f;
    return m;
}

namespace {

// Shared by augmentation and identity warping: crop `box` from `frame`,
// rescale by (sx,sy) about the box center, paste onto `canvas` (clipped to
// frame bounds). Returns the pasted rectangle.
FaceBox rescale_face_region(const Tensor& frame, const FaceBox& box, float sx, float sy,
                            Tensor& canvas) {
    const int64_t H = frame.dim(1), W = frame.dim(2);
    if (box.w <= 0 || box.h <= 0) return FaceBox{box.x, box.y, 0, 0};

    // Crop the face region.
    Tensor crop({1, 3, box.h, box.w});
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < box.h; ++y)
            for (int64_t x = 0; x < box.w; ++x)
                crop.data()[(c * box.h + y) * box.w + x] =
                    frame.data()[(c * H + box.y + y) * W + box.x + x];

    const int64_t nw = std::max<int64_t>(1, (int64_t)std::llround((double)box.w * sx));
    const int64_t nh = std::max<int64_t>(1, (int64_t)std::llround((double)box.h * sy));
    Tensor resized = bilinear_resize_value(crop, nh, nw);

    // Center the rescaled face where the original was.
    const double cx = (double)box.x + (double)box.w * 0.5;
    const double cy = (double)box.y + (double)box.h * 0.5;
    const int64_t nx0 = (int64_t)std::llround(cx - (double)nw * 0.5);
    const int64_t ny0 = (int64_t)std::llround(cy - (double)nh * 0.5);

    const int64_t px0 = std::max<int64_t>(0, nx0), py0 = std::max<int64_t>(0, ny0);
    const int64_t px1 = std::min<int64_t>(W, nx0 + nw), py1 = std::min<int64_t>(H, ny0 + nh);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = py0; y < py1; ++y)
            for (int64_t x = px0; x < px1; ++x)
                canvas.data()[(c * H + y) * W + x] =
                    resized.data()[(c * nh + (y - ny0)) * nw + (x - nx0)];
    return FaceBox{px0, py0, std::max<int64_t>(0, px1 - px0), std::max<int64_t>(0, py1 - py0)};
}

}  // namespace

void augment_driving(VideoClip& clip, const AugmentConfig& cfg, Rng& rng) {
    // Fixed draw order (gray, sx, sy) so a seed pins the whole augmentation.
    const bool gray = rng.uniform() < cfg.p_gray;
    const float sx = (float)rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const float sy = (float)rng.uniform(cfg.scale_lo, cfg.scale_hi);

    const int64_t H = clip.height(), W = clip.width(), frame_elems = 3 * H * W;
    for (int64_t f = 0; f < clip.length(); ++f) {
        Tensor frame = Tensor::from_data(
            {3, H, W}, std::vector<float>(clip.frames.data() + f * frame_elems,
                                          clip.frames.data() + (f + 1) * frame_elems));
        if (gray) {
            float* d = frame.data();
            for (int64_t i = 0; i < H * W; ++i) {
                const float luma =
                    0.299f * d[i] + 0.587f * d[H * W + i] + 0.114f * d[2 * H * W + i];
                d[i] = luma;
                d[H * W + i] = luma;
                d[2 * H * W + i] = luma;
            }
        }
        Tensor canvas({3, H, W});
        clip.face_box[(size_t)f] = rescale_face_region(frame, clip.face_box[(size_t)f], sx, sy, canvas);
        std::copy(canvas.data(), canvas.data() + frame_elems, clip.frames.data() + f * frame_elems);
    }
}

// ---- perturbation plugins ----

namespace {

struct PerturbEntry {
    PerturbFn fn;
    SourceTag tag;
};

std::map<std::string, PerturbEntry>& perturb_registry();

// Face-region remap standing in for a real face-swap model: a fake identity
// seed picks a geometric rescale and a per-channel color remap, constant
// across the clip (the substituted identity must be self-consistent).
void warp_swap(VideoClip& clip, Rng& rng) {
    Rng id_rng = Rng(rng.next_u64()).child("warp_swap_identity");
    const float gx = (float)id_rng.uniform(0.85, 1.15);
    const float gy = (float)id_rng.uniform(0.85, 1.15);
    float gain[3], offs[3];
    for (int c = 0; c < 3; ++c) {
        gain[c] = (float)id_rng.uniform(0.55, 1.0);
        offs[c] = (float)id_rng.uniform(0.0, 0.25);
    }

    const int64_t H = clip.height(), W = clip.width(), frame_elems = 3 * H * W;
    for (int64_t f = 0; f < clip.length(); ++f) {
        const FaceBox& b = clip.face_box[(size_t)f];
        if (b.w <= 0 || b.h <= 0) continue;
        float* d = clip.frames.data() + f * frame_elems;
        // Inverse-mapped warp confined to the box, then color remap.
        std::vector<float> region((size_t)(3 * b.h * b.w));
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < b.h; ++y)
                for (int64_t x = 0; x < b.w; ++x)
                    region[(size_t)((c * b.h + y) * b.w + x)] =
                        d[(c * H + b.y + y) * W + b.x + x];
        const double ctr_x = (double)b.w * 0.5 - 0.5, ctr_y = (double)b.h * 0.5 - 0.5;
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < b.h; ++y)
                for (int64_t x = 0; x < b.w; ++x) {
                    const double sxf = ctr_x + ((double)x - ctr_x) / gx;
                    const double syf = ctr_y + ((double)y - ctr_y) / gy;
                    const int64_t x0 = (int64_t)std::floor(sxf), y0 = (int64_t)std::floor(syf);
                    const double fx = sxf - (double)x0, fy = syf - (double)y0;
                    auto at = [&](int64_t yy, int64_t xx) {
                        yy = std::clamp<int64_t>(yy, 0, b.h - 1);
                        xx = std::clamp<int64_t>(xx, 0, b.w - 1);
                        return (double)region[(size_t)((c * b.h + yy) * b.w + xx)];
                    };
                    const double v = (at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx) * (1 - fy) +
                                     (at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx) * fy;
                    const float out = std::clamp((float)v * gain[c] + offs[c], 0.0f, 1.0f);
                    d[(c * H + b.y + y) * W + b.x + x] = out;
                }
    }
}

// Whole-frame stylization stand-in: channel posterization to k levels plus
// per-frame random channel permutation and gains. Parameters are drawn per
// frame on purpose — frame-to-frame coherence is destroyed, which is the
// property the temporal stage has to cope with.
void posterize_style(VideoClip& clip, Rng& rng) {
    static const int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                     {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    const int64_t H = clip.height(), W = clip.width(), hw = H * W, frame_elems = 3 * hw;
    const float k1 = (float)(kPosterizeLevels - 1);
    for (int64_t f = 0; f < clip.length(); ++f) {
        const int* perm = kPerms[rng.uniform_index(6)];
        float gain[3];
        for (int c = 0; c < 3; ++c) gain[c] = (float)rng.uniform(0.6, 1.0);
        float* d = clip.frames.data() + f * frame_elems;
        std::vector<float> orig(d, d + frame_elems);
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < hw; ++i) {
                const float q = std::round(orig[(size_t)(perm[c] * hw + i)] * k1) / k1;
                d[c * hw + i] = q * gain[c];
            }
    }
}

std::map<std::string, PerturbEntry>& perturb_registry() {
    static std::map<std::string, PerturbEntry> reg = {
        {"none", {[](VideoClip&, Rng&) {}, SourceTag::real}},
        {"warp_swap", {warp_swap, SourceTag::swapped}},
        {"posterize_style", {posterize_style, SourceTag::stylized}},
    };
    return reg;
}

}  // namespace

void register_perturb(const std::string& plugin_id, PerturbFn fn, SourceTag tag) {
    perturb_registry()[plugin_id] = PerturbEntry{std::move(fn), tag};
}

std::vector<std::string> registered_perturbs() {
    std::vector<std::string> out;
    for (const auto& [k, v] : perturb_registry()) out.push_back(k);
    return out;
}

void perturb_identity(VideoClip& clip, const std::string& plugin_id, Rng& rng) {
    auto& reg = perturb_registry();
    auto it = reg.find(plugin_id);
    if (it == reg.end()) {
        std::string known;
        for (const auto& [k, v] : reg) known += (known.empty() ? "" : ", ") + k;
        throw Error("unknown perturbation plugin '" + plugin_id + "' (registered: " + known + ")");
    }
    it->second.fn(clip, rng);
    clip.source_tag = it->second.tag;
}

// ---- gaze ----

float gaze_change_score(const VideoClip& clip) { return gaze_change_score(clip.gaze); }

float gaze_change_score(const std::vector<GazeAngles>& gaze) {
    float best = 0.0f;
    for (size_t i = 1; i < gaze.size(); ++i) {
        const float dy = gaze[i].yaw - gaze[i - 1].yaw;
        const float dp = gaze[i].pitch - gaze[i - 1].pitch;
        best = std::max(best, std::sqrt(dy * dy + dp * dp));
    }
    return best;
}

std::vector<size_t> filter_top_fraction(const std::vector<float>& scores, double fraction) {
    PA_CHECK(!scores.empty(), "filter_top_fraction: empty score list");
    PA_CHECK(fraction > 0.0 && fraction <= 1.0, "filter_top_fraction: fraction out of (0,1]");
    const size_t n = scores.size();
    const size_t k = std::min(n, (size_t)std::max<int64_t>(1, std::llround(fraction * (double)n)));
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), (size_t)0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // deterministic tie-break
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

SourceTag draw_mix_tag(const MixProportions& mix, Rng& rng) {
    const double sum = mix.swapped + mix.stylized + mix.real;
    PA_CHECK(std::abs(sum - 1.0) <= 1e-6, "mix proportions must sum to 1, got " +
                                              std::to_string(sum));
    // Category order is fixed: swapped, stylized, real.
    switch (rng.categorical({mix.swapped, mix.stylized, mix.real})) {
        case 0: return SourceTag::swapped;
        case 1: return SourceTag::stylized;
        default: return SourceTag::real;
    }
}

}  // namespace pa
