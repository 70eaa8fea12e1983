#include "train/diffusion.h"

#include <cmath>

#include "core/error.h"

namespace pa {

NoiseSchedule NoiseSchedule::linear(int64_t T, float beta_start, float beta_end) {
    PA_CHECK(T >= 1, "noise schedule needs at least one step");
    PA_CHECK(0.0f < beta_start && beta_start <= beta_end && beta_end < 1.0f,
             "noise schedule betas must satisfy 0 < start <= end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int64_t t = 0; t < T; t++) {
        double b = T == 1 ? beta_start
                          : (double)beta_start +
                                ((double)beta_end - (double)beta_start) * (double)t / (double)(T - 1);
        s.beta[t] = (float)b;
        prod *= 1.0 - b;
        s.alpha_bar[t] = (float)prod;
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    PA_CHECK(T >= 1 && (int64_t)beta.size() == T && (int64_t)alpha_bar.size() == T,
             "noise schedule: inconsistent sizes");
    for (int64_t t = 0; t < T; t++) {
        PA_CHECK(beta[t] > 0.0f && beta[t] < 1.0f, "noise schedule: beta out of (0,1)");
        PA_CHECK(alpha_bar[t] > 0.0f && alpha_bar[t] <= 1.0f,
                 "noise schedule: alpha_bar out of (0,1]");
        if (t > 0) {
            PA_CHECK(beta[t] >= beta[t - 1], "noise schedule: betas must not decrease");
            PA_CHECK(alpha_bar[t] < alpha_bar[t - 1], "noise schedule: alpha_bar must decrease");
        }
    }
}

Tensor NoiseSchedule::noisy_latent(const Tensor& z0, const Tensor& eps, int64_t t) const {
    PA_CHECK(t >= 0 && t < T, "noise schedule: timestep out of range");
    PA_CHECK(z0.same_shape(eps), "noise schedule: z0/eps shape mismatch");
    float a = std::sqrt(alpha_bar[t]);
    float b = std::sqrt(1.0f - alpha_bar[t]);
    Tensor out(z0.shape());
    for (int64_t i = 0; i < z0.numel(); i++) out[i] = a * z0[i] + b * eps[i];
    return out;
}

Tensor ddim_step(const NoiseSchedule& s, const Tensor& z_t, const Tensor& eps_hat, int64_t t,
                 int64_t t_prev) {
    PA_CHECK(t >= 0 && t < s.T, "ddim: timestep out of range");
    PA_CHECK(t_prev < t, "ddim: t_prev must be earlier than t");
    PA_CHECK(z_t.same_shape(eps_hat), "ddim: prediction shape mismatch");
    float ab_t = s.alpha_bar[t];
    float ab_prev = t_prev < 0 ? 1.0f : s.alpha_bar[t_prev];
    float inv_sqrt = 1.0f / std::sqrt(ab_t);
    float sig_t = std::sqrt(1.0f - ab_t);
    float sqrt_prev = std::sqrt(ab_prev);
    float sig_prev = std::sqrt(1.0f - ab_prev);
    Tensor out(z_t.shape());
    for (int64_t i = 0; i < z_t.numel(); i++) {
        float x0 = (z_t[i] - sig_t * eps_hat[i]) * inv_sqrt;  // predicted clean latent
        out[i] = sqrt_prev * x0 + sig_prev * eps_hat[i];
    }
    return out;
}

std::vector<int64_t> sampler_timesteps(int64_t T, int64_t steps) {
    PA_CHECK(steps >= 1 && steps <= T, "sampler steps must be in [1, T]");
    std::vector<int64_t> ts(steps);
    for (int64_t i = 0; i < steps; i++) {
        // Descending, evenly spaced, ending exactly at 0.
        ts[i] = steps == 1 ? T - 1
                           : (int64_t)std::llround((double)(T - 1) * (double)(steps - 1 - i) /
                                                   (double)(steps - 1));
    }
    PA_CHECK(steps == 1 || ts.back() == 0, "sampler timesteps must end at 0");
    return ts;
}

}  // namespace pa
