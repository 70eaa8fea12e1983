#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/tensor.h"

namespace pa {

struct Node;
using Var = std::shared_ptr<Node>;

// One node of the reverse-mode tape. Ops allocate a node per result while
// grad recording is on; backward() walks nodes in reverse creation order.
struct Node {
    Tensor value;
    Tensor grad;  // lazily allocated, same shape as value
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;
    int64_t order = 0;
    std::string name;  // set for parameters and named leaves

    Tensor& ensure_grad();
    void zero_grad() { if (grad.defined()) grad.zero(); }
};

Var leaf(Tensor value, bool requires_grad = false, std::string name = "");

bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev); }
};

// Creates a recording node when grad mode is on and any parent requires grad;
// otherwise returns a plain value node.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// Accumulates gradients of `root` (scalar or not; seeded with ones) into every
// reachable node that requires grad.
void backward(const Var& root);

}  // namespace pa
