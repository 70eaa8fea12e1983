#include "infer/animate.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "core/error.h"
#include "data/clips.h"

namespace pa {

namespace {

// Deep copy of frame rows [a, b) along axis 0.
Tensor slice_rows(const Tensor& t, int64_t a, int64_t b) {
    int64_t rs = t.numel() / t.dim(0);
    std::vector<int64_t> shape = t.shape();
    shape[0] = b - a;
    Tensor out(shape);
    std::memcpy(out.data(), t.data() + a * rs, (size_t)((b - a) * rs) * sizeof(float));
    return out;
}

void match_reference_color(VideoClip& driving, const Tensor& reference,
                           const Tensor& ref_fg_mask) {
    driving.validate();
    PA_CHECK(reference.defined() && reference.ndim() == 3 && reference.dim(0) == 3,
             "appearance: reference must be (3,H,W)");
    PA_CHECK(ref_fg_mask.defined() && ref_fg_mask.ndim() == 3 && ref_fg_mask.dim(0) == 1 &&
                 ref_fg_mask.dim(1) == reference.dim(1) && ref_fg_mask.dim(2) == reference.dim(2),
             "appearance: mask must be (1,H,W) over the reference");

    const int64_t H = reference.dim(1), W = reference.dim(2);
    double rsum[3] = {0, 0, 0}, rsq[3] = {0, 0, 0};
    int64_t n = 0;
    for (int64_t p = 0; p < H * W; p++) {
        float mv = ref_fg_mask[p];
        PA_CHECK(mv == 0.0f || mv == 1.0f, "appearance: mask must be binary");
        if (mv != 1.0f) continue;
        n++;
        for (int64_t c = 0; c < 3; c++) {
            double v = reference[c * H * W + p];
            rsum[c] += v;
            rsq[c] += v * v;
        }
    }
    if (n == 0) return;  // no reference face region to match against
    double rmean[3], rstd[3];
    for (int64_t c = 0; c < 3; c++) {
        rmean[c] = rsum[c] / (double)n;
        rstd[c] = std::sqrt(std::max(0.0, rsq[c] / (double)n - rmean[c] * rmean[c]));
    }

    const int64_t fh = driving.height(), fw = driving.width();
    for (int64_t f = 0; f < driving.length(); f++) {
        const FaceBox& box = driving.face_box[(size_t)f];
        int64_t cnt = box.w * box.h;
        if (cnt == 0) continue;
        float* frame = driving.frames.data() + f * 3 * fh * fw;
        for (int64_t c = 0; c < 3; c++) {
            double sum = 0, sq = 0;
            for (int64_t y = box.y; y < box.y + box.h; y++)
                for (int64_t x = box.x; x < box.x + box.w; x++) {
                    double v = frame[c * fh * fw + y * fw + x];
                    sum += v;
                    sq += v * v;
                }
            double mean = sum / (double)cnt;
            double sd = std::sqrt(std::max(0.0, sq / (double)cnt - mean * mean));
            double gain = sd < 1e-6 ? 1.0 : rstd[c] / sd;
            for (int64_t y = box.y; y < box.y + box.h; y++)
                for (int64_t x = box.x; x < box.x + box.w; x++) {
                    float& v = frame[c * fh * fw + y * fw + x];
                    v = (float)std::clamp((v - mean) * gain + rmean[c], 0.0, 1.0);
                }
        }
    }
}

std::map<std::string, AppearanceFn>& appearance_registry() {
    static std::map<std::string, AppearanceFn> reg = [] {
        std::map<std::string, AppearanceFn> r;
        r["none"] = [](VideoClip&, const Tensor&, const Tensor&) {};
        r["match_reference_color"] = match_reference_color;
        return r;
    }();
    return reg;
}

}  // namespace

WindowPlan plan_windows(int64_t total, int64_t W, int64_t O) {
    PA_CHECK(total >= 1, "window plan: need at least one frame");
    PA_CHECK(W >= 1 && O >= 0 && O < W, "window plan: need 0 <= overlap < window length");
    WindowPlan p;
    p.total = total;
    p.W = W;
    p.O = O;
    if (total < W) {
        p.windows.push_back({0, total});
        return p;
    }
    int64_t s = 0;
    while (true) {
        p.windows.push_back({s, s + W});
        if (s + W >= total) break;
        // Next start; the last window slides back so it never overruns.
        s = std::min(s + (W - O), total - W);
    }
    return p;
}

Tensor blend_windows(const WindowPlan& plan, const std::vector<Tensor>& outputs) {
    PA_CHECK(outputs.size() == plan.windows.size(), "blend: need one output per window");
    PA_CHECK(!outputs.empty() && plan.total >= 1, "blend: empty plan");
    std::vector<int64_t> inner;
    for (size_t k = 0; k < outputs.size(); k++) {
        const Tensor& o = outputs[k];
        PA_CHECK(o.defined() && o.ndim() == 4 && o.dim(0) == plan.windows[k].length(),
                 "blend: output " + std::to_string(k) + " does not match its window");
        std::vector<int64_t> in = {o.dim(1), o.dim(2), o.dim(3)};
        if (k == 0)
            inner = in;
        else
            PA_CHECK(in == inner, "blend: inconsistent per-window shapes");
    }

    // (window, local frame row) pairs covering each output frame.
    std::vector<std::vector<std::pair<size_t, int64_t>>> cover((size_t)plan.total);
    for (size_t k = 0; k < plan.windows.size(); k++) {
        const Window& w = plan.windows[k];
        PA_CHECK(w.start >= 0 && w.end <= plan.total && w.start < w.end,
                 "blend: window outside the video");
        for (int64_t f = w.start; f < w.end; f++) cover[(size_t)f].emplace_back(k, f - w.start);
    }

    const int64_t rs = inner[0] * inner[1] * inner[2];
    Tensor out({plan.total, inner[0], inner[1], inner[2]});
    for (int64_t f = 0; f < plan.total; f++) {
        const auto& src = cover[(size_t)f];
        PA_CHECK(!src.empty(), "blend: coverage hole at frame " + std::to_string(f));
        float* dst = out.data() + f * rs;
        if (src.size() == 1) {
            const Tensor& o = outputs[src[0].first];
            std::memcpy(dst, o.data() + src[0].second * rs, (size_t)rs * sizeof(float));
            continue;
        }
        for (int64_t i = 0; i < rs; i++) {
            double acc = 0.0;
            for (const auto& [k, row] : src) acc += (double)outputs[k][row * rs + i];
            dst[i] = (float)(acc / (double)src.size());
        }
    }
    return out;
}

void register_appearance(const std::string& name, AppearanceFn fn) {
    PA_CHECK(!name.empty() && fn, "appearance plugin needs a name and a function");
    appearance_registry()[name] = std::move(fn);
}

std::vector<std::string> registered_appearances() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : appearance_registry()) names.push_back(name);
    return names;
}

void apply_appearance(const std::string& name, VideoClip& driving, const Tensor& reference,
                      const Tensor& ref_fg_mask) {
    auto it = appearance_registry().find(name);
    PA_CHECK(it != appearance_registry().end(), "unknown appearance plugin: " + name);
    it->second(driving, reference, ref_fg_mask);
}

Tensor frame_noise(uint64_t seed, int64_t start, int64_t count, int64_t c_lat, int64_t h,
                   int64_t w) {
    PA_CHECK(start >= 0 && count >= 1 && c_lat >= 1 && h >= 1 && w >= 1,
             "frame noise: bad geometry");
    Tensor out({count, c_lat, h, w});
    const int64_t rs = c_lat * h * w;
    Rng stream = Rng(seed).child("frame");
    for (int64_t i = 0; i < count; i++) {
        Rng fr = stream.child((uint64_t)(start + i));
        fr.fill_normal(out.data() + i * rs, rs);
    }
    return out;
}

Tensor generate_window(const PortraitModel& m, const PortraitModel::Conditioning& cond,
                       const Tensor& reference, const Tensor& driving_window,
                       const NoiseSchedule& schedule, const std::vector<int64_t>& ts,
                       const Tensor& init_noise) {
    NoGradGuard ng;
    PA_CHECK(driving_window.defined() && driving_window.ndim() == 4 && driving_window.dim(1) == 3,
             "generate: driving window must be (W,3,H,W)");
    PA_CHECK(init_noise.defined() && init_noise.ndim() == 4 && init_noise.dim(1) == m.c_lat() &&
                 init_noise.dim(2) == m.latent_hw() && init_noise.dim(3) == m.latent_hw(),
             "generate: noise must cover the latent volume");
    PA_CHECK(init_noise.dim(0) == driving_window.dim(0),
             "generate: window/driving length mismatch");
    PA_CHECK(!ts.empty(), "generate: need at least one timestep");

    Var motion = m.motion->motion_features(leaf(driving_window), leaf(reference), m.latent_hw(),
                                           m.latent_hw());
    Tensor z = init_noise.clone();
    for (size_t i = 0; i < ts.size(); i++) {
        int64_t t = ts[i];
        int64_t t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
        Var x = assemble(leaf(z), motion, cond.ref_latent, leaf(cond.mask_lat));
        Var eps_hat = m.denoiser->forward(x, t, leaf(cond.context_tokens), &cond.bank);
        z = ddim_step(schedule, z, eps_hat->value, t, t_prev);
    }
    return z;
}

Tensor animate(const PortraitModel& m, const Tensor& reference, const Tensor& ref_fg_mask,
               const VideoClip& driving, const AnimateConfig& cfg) {
    NoGradGuard ng;
    driving.validate();
    const int64_t hw = m.config().image_hw;
    PA_CHECK(driving.height() == hw && driving.width() == hw,
             "animate: driving frames must be " + std::to_string(hw) + "x" + std::to_string(hw) +
                 " to match the model");
    PA_CHECK(cfg.steps >= 1 && cfg.steps <= cfg.schedule_T,
             "animate: steps must be in [1, schedule_T]");

    VideoClip prepped = driving.clone();
    if (!cfg.appearance_plugin.empty() && cfg.appearance_plugin != "none")
        apply_appearance(cfg.appearance_plugin, prepped, reference, ref_fg_mask);
    mask_clip(prepped);

    // Computed once, shared by every window and every denoising step.
    PortraitModel::Conditioning cond = m.condition(reference, ref_fg_mask);
    NoiseSchedule schedule = NoiseSchedule::linear(cfg.schedule_T);
    std::vector<int64_t> ts = sampler_timesteps(cfg.schedule_T, cfg.steps);

    WindowPlan plan = plan_windows(prepped.length(), cfg.window, cfg.overlap);
    std::vector<Tensor> outs;
    for (const Window& w : plan.windows) {
        Tensor drv = slice_rows(prepped.frames, w.start, w.end);
        Tensor nz = frame_noise(cfg.seed, w.start, w.length(), m.c_lat(), m.latent_hw(),
                                m.latent_hw());
        outs.push_back(generate_window(m, cond, reference, drv, schedule, ts, nz));
    }
    return m.codec->decode(blend_windows(plan, outs));
}

double psnr(const Tensor& a, const Tensor& b) {
    PA_CHECK(a.defined() && b.defined() && a.same_shape(b) && a.numel() > 0,
             "psnr: tensors must share a nonempty shape");
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); i++) {
        double d = (double)a[i] - (double)b[i];
        acc += d * d;
    }
    acc /= (double)a.numel();
    if (acc <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(acc);
}

}  // namespace pa
