#pragma once

#include <cstdint>
#include <vector>

#include "core/graph.h"
#include "core/rng.h"

namespace pa {

// DDPM-style forward process bookkeeping: betas rise linearly, alpha_bar is
// the running product of (1 - beta). T = 100 in the toy profile, 1000 full.
struct NoiseSchedule {
    int64_t T = 0;
    std::vector<float> beta;
    std::vector<float> alpha_bar;

    static NoiseSchedule linear(int64_t T, float beta_start = 1e-4f, float beta_end = 0.02f);
    void validate() const;

    // z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, elementwise.
    Tensor noisy_latent(const Tensor& z0, const Tensor& eps, int64_t t) const;
};

// Deterministic (eta = 0) reverse update from timestep t to t_prev; t_prev < 0
// means "to the clean sample". eps_hat is the model's noise prediction.
Tensor ddim_step(const NoiseSchedule& s, const Tensor& z_t, const Tensor& eps_hat, int64_t t,
                 int64_t t_prev);

// Descending timesteps visited by an S-step sampler over a T-step schedule:
// evenly spaced over [0, T-1], last entry always 0.
std::vector<int64_t> sampler_timesteps(int64_t T, int64_t steps);

}  // namespace pa
