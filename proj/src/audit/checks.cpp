#include "audit/checks.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "audit/audit.h"
#include "core/error.h"
#include "data/synth.h"
#include "model/temporal.h"
#include "train/trainer.h"

namespace pa {

namespace {

namespace fs = std::filesystem;

void randomize(ParamStore& ps, uint64_t seed) {
    Rng rng(seed);
    for (const auto& p : ps.all()) rng.fill_uniform(p->value.data(), p->value.numel(), -0.1f, 0.1f);
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    PA_CHECK(a.same_shape(b), "audit: shape mismatch");
    float worst = 0.0f;
    for (int64_t i = 0; i < a.numel(); i++) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

AuditCheck guarded(const std::string& name, const std::function<std::string()>& body) {
    AuditCheck c;
    c.name = name;
    try {
        c.detail = body();  // throws on violation
        c.pass = true;
    } catch (const std::exception& e) {
        c.pass = false;
        c.detail = e.what();
    }
    return c;
}

// Simulates adapting a pretrained backbone: random weights everywhere, then
// the input conv widened (new channels zero). Any influence of the widened
// channels on the output is an initialization bug.
std::string check_conditioning_neutrality(const PortraitModelConfig& cfg, int64_t bundles) {
    UNetConfig ucfg = derive_unet_config(cfg);
    const int64_t c_extra = kMotionChannels + ucfg.c_lat + 1;

    ParamStore ps;
    Rng build_rng(cfg.seed);
    UNet net(ps, "denoiser", ucfg, build_rng);
    randomize(ps, cfg.seed + 1);
    net.expand_conv_in(c_extra);

    const int64_t F = 2, hw = ucfg.latent_hw;
    Rng data_rng(cfg.seed + 2);
    float worst = 0.0f;
    for (int64_t k = 0; k < bundles; k++) {
        Tensor wide({F, ucfg.c_lat + c_extra, hw, hw});
        data_rng.fill_normal(wide.data(), wide.numel());
        Tensor zeroed = wide.clone();
        const int64_t plane = hw * hw;
        for (int64_t f = 0; f < F; f++)
            std::memset(zeroed.data() + (f * (ucfg.c_lat + c_extra) + ucfg.c_lat) * plane, 0,
                        (size_t)(c_extra * plane) * sizeof(float));
        Tensor ctx({5, ucfg.context_dim});
        data_rng.fill_normal(ctx.data(), ctx.numel());
        int64_t t = (int64_t)data_rng.uniform_index(100);

        Tensor a = net.forward(leaf(wide), t, leaf(ctx))->value;
        Tensor b = net.forward(leaf(zeroed), t, leaf(ctx))->value;
        worst = std::max(worst, max_abs_diff(a, b));
    }
    PA_CHECK(worst <= 1e-6f, "widened channels leak into the output, max diff " +
                                 std::to_string(worst));
    std::ostringstream os;
    os << bundles << " bundles, max |out(cond) - out(zero)| = " << worst;
    return os.str();
}

std::string check_temporal_identity(const PortraitModelConfig& cfg) {
    UNetConfig ucfg = derive_unet_config(cfg);
    ParamStore ps;
    Rng build_rng(cfg.seed);
    UNet net(ps, "denoiser", ucfg, build_rng);
    randomize(ps, cfg.seed + 1);

    const int64_t F = 8, hw = ucfg.latent_hw;
    Rng data_rng(cfg.seed + 2);
    Tensor x({F, ucfg.c_lat, hw, hw});
    data_rng.fill_normal(x.data(), x.numel());
    Tensor ctx({5, ucfg.context_dim});
    data_rng.fill_normal(ctx.data(), ctx.numel());

    Tensor before = net.forward(leaf(x), 7, leaf(ctx))->value;
    Rng trng(cfg.seed + 3);
    net.insert_temporal_layers(trng);
    Tensor after = net.forward(leaf(x), 7, leaf(ctx))->value;

    float diff = max_abs_diff(before, after);
    PA_CHECK(diff <= 1e-6f,
             "temporal insertion changed an 8-frame output by " + std::to_string(diff));
    std::ostringstream os;
    os << "8-frame max |after - before| = " << diff;
    return os.str();
}

std::string check_injection_sites(const PortraitModelConfig& cfg) {
    PortraitModel m(cfg);
    randomize(m.params, cfg.seed + 1);

    SynthConfig sc;
    sc.n_videos = 1;
    sc.frames_per_video = 2;
    sc.height = cfg.image_hw;
    sc.width = cfg.image_hw;
    sc.seed = cfg.seed;
    VideoClip clip = render_synthetic_video(sc, 0);
    Tensor ref({3, cfg.image_hw, cfg.image_hw});
    std::memcpy(ref.data(), clip.frames.data(), (size_t)ref.numel() * sizeof(float));
    Tensor mask({1, cfg.image_hw, cfg.image_hw});
    for (int64_t p = 0; p < cfg.image_hw * cfg.image_hw; p++) {
        int64_t x = p % cfg.image_hw, y = p / cfg.image_hw;
        mask[p] = clip.face_box[0].inside(x, y) ? 1.0f : 0.0f;
    }
    PortraitModel::Conditioning cond = m.condition(ref, mask);

    const int64_t F = 2, h = m.latent_hw();
    Rng rng(cfg.seed + 2);
    Tensor noise({F, m.c_lat(), h, h});
    rng.fill_normal(noise.data(), noise.numel());
    Tensor motion({F, kMotionChannels, h, h});
    rng.fill_normal(motion.data(), motion.numel());

    AttentionAudit audit;
    Var x = assemble(leaf(noise), leaf(motion), cond.ref_latent, leaf(cond.mask_lat));
    (void)m.denoiser->forward(x, 3, leaf(cond.context_tokens), &cond.bank, &audit);

    std::set<std::string> widened;
    for (const auto& s : audit.self_sites_with_extra_kv()) widened.insert(s);
    std::set<std::string> expected;
    for (const auto& site : m.denoiser->sites())
        if (site.injection) expected.insert(site.site_id);
    PA_CHECK(!expected.empty(), "no injection sites declared");
    for (const auto& s : expected)
        PA_CHECK(s == "mid" || s.rfind("up", 0) == 0,
                 "unexpected injection site placement: " + s);
    PA_CHECK(widened == expected, "widened self-attention sites do not match the mid+up set");
    for (const auto& e : audit.events)
        if (e.kind == "self" && !expected.count(e.site_id))
            PA_CHECK(e.kv_len == e.q_len, "down-path site " + e.site_id +
                                              " saw foreign key/value tokens");

    std::ostringstream os;
    os << "reference tokens at {";
    bool first = true;
    for (const auto& s : widened) {
        os << (first ? "" : ", ") << s;
        first = false;
    }
    os << "}, down-path self-attention untouched";
    return os.str();
}

std::string check_freeze_verification(const PortraitModelConfig& cfg, const AuditOptions& opts) {
    SynthConfig sc;
    sc.n_videos = 2;
    sc.frames_per_video = std::max<int64_t>(12, opts.clip_length * 2 + 2);
    sc.height = cfg.image_hw;
    sc.width = cfg.image_hw;
    sc.seed = cfg.seed;
    std::vector<VideoClip> corpus;
    for (int64_t i = 0; i < sc.n_videos; i++) corpus.push_back(render_synthetic_video(sc, i));

    fs::path scratch = opts.scratch_dir.empty()
                           ? fs::temp_directory_path() / ("pa_audit_" + std::to_string(::getpid()))
                           : fs::path(opts.scratch_dir);
    fs::remove_all(scratch);

    std::string verdict;
    try {
        PortraitModel m(cfg);
        StageRunConfig rc;
        rc.steps = opts.stage_steps;
        rc.lr = 1e-3f;
        rc.seed = cfg.seed;
        rc.schedule_T = 20;
        rc.data.clip_length = opts.clip_length;
        rc.data.stride = 2;
        rc.log_every = opts.stage_steps;

        auto ctx_names = [&] {
            std::vector<std::string> names;
            for (const auto& n : m.params.names())
                if (n.rfind("context.", 0) == 0) names.push_back(n);
            return names;
        }();
        uint64_t ctx_before = m.params.hash_named(ctx_names);
        uint64_t train_before = m.params.hash_named(stage_trainable_names(m, Stage::stage1));

        rc.stage = Stage::stage1;
        run_stage(m, corpus, rc, (scratch / "s1").string());
        PA_CHECK(m.params.hash_named(ctx_names) == ctx_before,
                 "stage 1 moved image-encoder parameters");
        PA_CHECK(m.params.hash_named(stage_trainable_names(m, Stage::stage1)) != train_before,
                 "stage 1 did not move its trainable parameters");

        rc.stage = Stage::gaze_ft;
        run_stage(m, corpus, rc, (scratch / "g").string(), (scratch / "s1").string());

        uint64_t non_temporal_before = m.params.hash_named(non_temporal_param_names(m.params));
        rc.stage = Stage::stage2;
        run_stage(m, corpus, rc, (scratch / "s2").string(), (scratch / "g").string());
        PA_CHECK(m.params.hash_named(non_temporal_param_names(m.params)) == non_temporal_before,
                 "stage 2 moved non-temporal parameters");
        PA_CHECK(m.has_temporal(), "stage 2 did not insert temporal layers");

        std::ostringstream os;
        os << "stage1/gaze_ft/stage2 x " << opts.stage_steps
           << " steps: image encoder and non-temporal hashes stable";
        verdict = os.str();
    } catch (...) {
        fs::remove_all(scratch);
        throw;
    }
    fs::remove_all(scratch);
    return verdict;
}

}  // namespace

std::vector<AuditCheck> run_audit(const PortraitModelConfig& cfg, const AuditOptions& opts) {
    std::vector<AuditCheck> out;
    out.push_back(guarded("conditioning_neutrality",
                          [&] { return check_conditioning_neutrality(cfg, opts.bundles); }));
    out.push_back(guarded("temporal_identity", [&] { return check_temporal_identity(cfg); }));
    out.push_back(guarded("injection_sites", [&] { return check_injection_sites(cfg); }));
    out.push_back(guarded("freeze_verification",
                          [&] { return check_freeze_verification(cfg, opts); }));
    return out;
}

bool all_pass(const std::vector<AuditCheck>& checks) {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return !checks.empty();
}

}  // namespace pa
