#include "data/synth.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "io/image_io.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pa {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Sum of two sinusoids over t in [0,F): smooth, band-limited, seedable.
struct Wave {
    double a1, f1, p1, a2, f2, p2, base;
    double at(int64_t t, int64_t total) const {
        const double u = (double)t / (double)total;
        return base + a1 * std::sin(2 * kPi * (f1 * u) + p1) + a2 * std::sin(2 * kPi * (f2 * u) + p2);
    }
};

Wave draw_wave(Rng& rng, double base, double amp1_lo, double amp1_hi, double amp2_frac) {
    Wave w;
    w.base = base;
    w.a1 = rng.uniform(amp1_lo, amp1_hi);
    w.f1 = rng.uniform(0.5, 2.0);
    w.p1 = rng.uniform(0.0, 2 * kPi);
    w.a2 = w.a1 * amp2_frac;
    w.f2 = rng.uniform(2.0, 4.0);
    w.p2 = rng.uniform(0.0, 2 * kPi);
    return w;
}

struct Identity {
    double skin[3], bg_top[3], bg_bot[3];
    double rx, ry;        // head radii, pixels
    double eye_dx;        // eye anchor offset from head center
    double eye_dy;
    double eye_r;
    double travel_x, travel_y;  // max eye offset at extreme gaze
    double mouth_w;
};

Identity draw_identity(Rng& rng, int64_t H, int64_t W) {
    Identity id;
    id.skin[0] = rng.uniform(0.55, 0.85);
    id.skin[1] = rng.uniform(0.40, 0.65);
    id.skin[2] = rng.uniform(0.30, 0.50);
    for (int c = 0; c < 3; ++c) {
        id.bg_top[c] = rng.uniform(0.15, 0.50);
        id.bg_bot[c] = rng.uniform(0.15, 0.50);
    }
    id.rx = rng.uniform(0.16, 0.21) * (double)W;
    id.ry = rng.uniform(0.22, 0.28) * (double)H;
    id.eye_dx = 0.45 * id.rx;
    id.eye_dy = -0.30 * id.ry;
    id.eye_r = std::max(1.8, 0.15 * id.ry);
    id.travel_x = 0.30 * id.rx;
    id.travel_y = 0.20 * id.ry;
    id.mouth_w = 0.55 * id.rx;
    return id;
}

struct Motion {
    Wave cx, cy, yaw, pitch, mouth;
};

Motion draw_motion(Rng& rng, int64_t H, int64_t W) {
    Motion m;
    m.cx = draw_wave(rng, (double)W * 0.5, 1.5, 3.0, 0.4);
    m.cy = draw_wave(rng, (double)H * 0.5, 1.0, 2.0, 0.4);
    m.yaw = draw_wave(rng, 0.0, 8.0, 15.0, 0.5);
    m.pitch = draw_wave(rng, 0.0, 5.0, 9.0, 0.5);
    m.mouth = draw_wave(rng, 0.5, 0.25, 0.45, 0.3);
    return m;
}

inline bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
}

}  // namespace

std::vector<GazeAngles> synthetic_gaze_trajectory(const SynthConfig& cfg, int64_t video_index) {
    Rng vid = Rng(cfg.seed).child("video_" + std::to_string(video_index));
    Rng id_rng = vid.child("identity");
    (void)draw_identity(id_rng, cfg.height, cfg.width);
    Rng mo_rng = vid.child("motion");
    Motion m = draw_motion(mo_rng, cfg.height, cfg.width);
    std::vector<GazeAngles> out;
    out.reserve((size_t)cfg.frames_per_video);
    for (int64_t t = 0; t < cfg.frames_per_video; ++t) {
        const double yaw = std::clamp(m.yaw.at(t, cfg.frames_per_video), -(double)kYawMaxDeg,
                                      (double)kYawMaxDeg);
        const double pitch = std::clamp(m.pitch.at(t, cfg.frames_per_video),
                                        -(double)kPitchMaxDeg, (double)kPitchMaxDeg);
        out.push_back(GazeAngles{(float)yaw, (float)pitch});
    }
    return out;
}

VideoClip render_synthetic_video(const SynthConfig& cfg, int64_t video_index) {
    const int64_t H = cfg.height, W = cfg.width, F = cfg.frames_per_video;
    Rng vid = Rng(cfg.seed).child("video_" + std::to_string(video_index));
    Rng id_rng = vid.child("identity");
    const Identity id = draw_identity(id_rng, H, W);
    Rng mo_rng = vid.child("motion");
    const Motion mo = draw_motion(mo_rng, H, W);
    const std::vector<GazeAngles> gaze = synthetic_gaze_trajectory(cfg, video_index);

    VideoClip clip;
    clip.identity_id = "id_" + std::to_string(video_index);
    clip.frames = Tensor({F, 3, H, W});
    clip.gaze = gaze;

    const double eye_col[3] = {0.05, 0.05, 0.90};
    const double mouth_col[3] = {0.80, 0.10, 0.12};
    const int SS = 4;  // 4x4 supersampling: soft edges, subpixel eye placement

    for (int64_t t = 0; t < F; ++t) {
        const double cx = mo.cx.at(t, F), cy = mo.cy.at(t, F);
        const double off_x = id.travel_x * (double)gaze[(size_t)t].yaw / (double)kYawMaxDeg;
        const double off_y = id.travel_y * (double)gaze[(size_t)t].pitch / (double)kPitchMaxDeg;
        const double ex_l = cx - id.eye_dx + off_x, ex_r = cx + id.eye_dx + off_x;
        const double ey = cy + id.eye_dy + off_y;
        const double mouth_h = 1.0 + 3.0 * std::clamp(mo.mouth.at(t, F), 0.0, 1.0);
        const double mouth_y = cy + 0.50 * id.ry;

        float* fd = clip.frames.data() + t * 3 * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double acc[3] = {0, 0, 0};
                for (int sy = 0; sy < SS; ++sy)
                    for (int sx = 0; sx < SS; ++sx) {
                        const double px = (double)x + ((double)sx + 0.5) / SS;
                        const double py = (double)y + ((double)sy + 0.5) / SS;
                        const double* col;
                        double grad_col[3];
                        if (in_ellipse(px, py, cx, mouth_y, id.mouth_w, mouth_h)) {
                            col = mouth_col;
                        } else if (in_ellipse(px, py, ex_l, ey, id.eye_r, id.eye_r) ||
                                   in_ellipse(px, py, ex_r, ey, id.eye_r, id.eye_r)) {
                            col = eye_col;
                        } else if (in_ellipse(px, py, cx, cy, id.rx, id.ry)) {
                            col = id.skin;
                        } else {
                            const double u = py / (double)H;
                            for (int c = 0; c < 3; ++c)
                                grad_col[c] = id.bg_top[c] * (1 - u) + id.bg_bot[c] * u;
                            col = grad_col;
                        }
                        for (int c = 0; c < 3; ++c) acc[c] += col[c];
                    }
                for (int64_t c = 0; c < 3; ++c)
                    fd[(c * H + y) * W + x] = (float)(acc[c] / (SS * SS));
            }

        // Face box: head ellipse bounds plus a small margin, clamped.
        const int64_t bx0 = std::max<int64_t>(0, (int64_t)std::floor(cx - id.rx) - 2);
        const int64_t by0 = std::max<int64_t>(0, (int64_t)std::floor(cy - id.ry) - 2);
        const int64_t bx1 = std::min<int64_t>(W, (int64_t)std::ceil(cx + id.rx) + 2);
        const int64_t by1 = std::min<int64_t>(H, (int64_t)std::ceil(cy + id.ry) + 2);
        clip.face_box.push_back(FaceBox{bx0, by0, bx1 - bx0, by1 - by0});
    }

    // Snap to the u8 grid so in-memory frames equal their disk round trip.
    clip.frames = quantize_frames(clip.frames);
    clip.validate();
    return clip;
}

void synth_corpus(const SynthConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream manifest(dir + "/manifest.jsonl", std::ios::trunc);
    PA_CHECK(manifest.is_open(), "cannot write manifest in " + dir);

    for (int64_t i = 0; i < cfg.n_videos; ++i) {
        VideoClip clip = render_synthetic_video(cfg, i);
        char name[32];
        std::snprintf(name, sizeof(name), "video_%03d", (int)i);
        const std::string vdir = dir + "/" + name;
        fs::create_directories(vdir);
        write_video_raw(vdir + "/frames.rgbv", clip.frames);

        json meta;
        for (const auto& b : clip.face_box) meta["face_box"].push_back({b.x, b.y, b.w, b.h});
        for (const auto& g : clip.gaze) meta["gaze"].push_back({g.yaw, g.pitch});
        std::ofstream mf(vdir + "/meta.json", std::ios::trunc);
        mf << meta.dump() << "\n";

        json entry = {{"path", name},
                      {"frames", clip.length()},
                      {"identity_id", clip.identity_id}};
        manifest << entry.dump() << "\n";
    }
}

VideoClip load_video_dir(const std::string& vdir, const std::string& identity_id) {
    VideoClip clip;
    clip.identity_id = identity_id;
    clip.frames = read_video_raw(vdir + "/frames.rgbv");
    std::ifstream mf(vdir + "/meta.json");
    PA_CHECK(mf.is_open(), "no meta.json in " + vdir);
    json meta = json::parse(mf);
    for (const auto& b : meta["face_box"])
        clip.face_box.push_back(FaceBox{b[0].get<int64_t>(), b[1].get<int64_t>(),
                                        b[2].get<int64_t>(), b[3].get<int64_t>()});
    for (const auto& g : meta["gaze"])
        clip.gaze.push_back(GazeAngles{g[0].get<float>(), g[1].get<float>()});
    clip.validate();
    return clip;
}

std::vector<VideoClip> load_corpus(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest.jsonl");
    PA_CHECK(manifest.is_open(), "no manifest.jsonl in " + dir);
    std::vector<VideoClip> out;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        json entry = json::parse(line);
        const std::string vdir = dir + "/" + entry["path"].get<std::string>();
        VideoClip clip = load_video_dir(vdir, entry["identity_id"].get<std::string>());
        PA_CHECK(clip.length() == entry["frames"].get<int64_t>(),
                 "manifest frame count mismatch for " + vdir);
        out.push_back(std::move(clip));
    }
    PA_CHECK(!out.empty(), "empty corpus at " + dir);
    return out;
}

}  // namespace pa
