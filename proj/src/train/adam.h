#pragma once

#include <vector>

#include "core/module.h"

namespace pa {

struct AdamConfig {
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Adam over an explicit parameter list. Freezing is enforced here, not just
// via requires_grad: parameters outside the active set are never touched,
// so a stray gradient cannot move them.
class Adam {
public:
    Adam(std::vector<Var> params, AdamConfig cfg);

    // Restricts updates to `subset` (matched by node identity). Moment
    // buffers of inactive parameters are preserved.
    void set_trainable(const std::vector<Var>& subset);
    void set_all_trainable();

    void step();
    void zero_grad();

    int64_t steps_taken() const { return t_; }
    AdamConfig& config() { return cfg_; }

private:
    struct Slot {
        Var p;
        Tensor m, v;
        bool active = true;
    };
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    int64_t t_ = 0;
};

}  // namespace pa
