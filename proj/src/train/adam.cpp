#include "train/adam.h"

#include <cmath>
#include <unordered_set>

#include "core/error.h"

namespace pa {

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : cfg_(cfg) {
    slots_.reserve(params.size());
    for (auto& p : params) {
        PA_CHECK(p && p->value.defined(), "adam: undefined parameter");
        Slot s;
        s.p = p;
        s.m = Tensor(p->value.shape());
        s.v = Tensor(p->value.shape());
        slots_.push_back(std::move(s));
    }
}

void Adam::set_trainable(const std::vector<Var>& subset) {
    std::unordered_set<const Node*> keep;
    for (const auto& p : subset) keep.insert(p.get());
    for (auto& s : slots_) s.active = keep.count(s.p.get()) > 0;
}

void Adam::set_all_trainable() {
    for (auto& s : slots_) s.active = true;
}

void Adam::step() {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, (double)t_);
    const double bc2 = 1.0 - std::pow(b2, (double)t_);
    for (auto& s : slots_) {
        if (!s.active || !s.p->grad.defined()) continue;
        float* p = s.p->value.data();
        const float* g = s.p->grad.data();
        float* m = s.m.data();
        float* v = s.v.data();
        const int64_t n = s.p->value.numel();
        for (int64_t i = 0; i < n; ++i) {
            m[i] = (float)(b1 * m[i] + (1.0 - b1) * g[i]);
            v[i] = (float)(b2 * v[i] + (1.0 - b2) * (double)g[i] * g[i]);
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= (float)(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
    }
}

void Adam::zero_grad() {
    for (auto& s : slots_) s.p->zero_grad();
}

}  // namespace pa
