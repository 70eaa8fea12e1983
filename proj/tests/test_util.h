// Shared helpers for comparing engine results against the double-precision
// oracles and for finite-difference gradient checks.
#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "core/graph.h"
#include "core/ops.h"
#include "core/rng.h"
#include "doctest.h"
#include "oracles/ref_ops.h"

inline refops::DTensor lift(const pa::Tensor& t) {
    return refops::lift(t.shape(), t.data(), t.numel());
}

inline pa::Tensor random_tensor(std::vector<int64_t> shape, pa::Rng& rng, float lo = -1.0f,
                                float hi = 1.0f) {
    pa::Tensor t(std::move(shape));
    rng.fill_uniform(t.data(), t.numel(), lo, hi);
    return t;
}

// Max |engine - oracle| over all elements, with a relative allowance.
inline void check_close(const pa::Tensor& got, const refops::DTensor& want, double rtol = 1e-4,
                        double atol = 1e-5) {
    REQUIRE(got.numel() == want.numel());
    double worst = 0.0;
    int64_t worst_i = 0;
    for (int64_t i = 0; i < got.numel(); ++i) {
        double g = (double)got.data()[i];
        double w = want.v[(size_t)i];
        double err = std::abs(g - w) - rtol * std::abs(w);
        if (err > worst) {
            worst = err;
            worst_i = i;
        }
    }
    CHECK_MESSAGE(worst <= atol, "worst elem ", worst_i, ": got ",
                  (double)got.data()[worst_i], " want ", want.v[(size_t)worst_i]);
}

// Central-difference check of `analytic` (float32 engine gradient w.r.t. the
// input lifted into `x`) against the double-precision scalar function `f`,
// which must read the current contents of `x`.
inline void check_grad(const pa::Tensor& analytic, refops::DTensor& x,
                       const std::function<double()>& f, double h = 1e-3, double rtol = 2e-3,
                       double atol = 3e-5) {
    REQUIRE(analytic.defined());
    REQUIRE(analytic.numel() == x.numel());
    double worst = 0.0;
    int64_t worst_i = 0;
    double worst_fd = 0.0;
    for (int64_t j = 0; j < x.numel(); ++j) {
        double keep = x.v[(size_t)j];
        x.v[(size_t)j] = keep + h;
        double lp = f();
        x.v[(size_t)j] = keep - h;
        double lm = f();
        x.v[(size_t)j] = keep;
        double fd = (lp - lm) / (2.0 * h);
        double err = std::abs((double)analytic.data()[j] - fd) - rtol * std::abs(fd);
        if (err > worst) {
            worst = err;
            worst_i = j;
            worst_fd = fd;
        }
    }
    CHECK_MESSAGE(worst <= atol, "worst grad elem ", worst_i, ": analytic ",
                  (double)analytic.data()[worst_i], " fd ", worst_fd);
}
