#include "core/graph.h"

#include <algorithm>
#include <unordered_set>

#include "core/error.h"

namespace pa {

namespace {
bool g_grad_enabled = true;
int64_t g_order_counter = 0;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor& Node::ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.shape());
    return grad;
}

Var leaf(Tensor value, bool requires_grad, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->order = g_order_counter++;
    n->name = std::move(name);
    return n;
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    if (!g_grad_enabled || !rg) return leaf(std::move(value));
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
    n->requires_grad = true;
    n->order = g_order_counter++;
    return n;
}

void backward(const Var& root) {
    PA_CHECK(root && root->requires_grad, "backward: root does not require grad");

    // Collect the reachable recording subgraph.
    std::vector<Node*> nodes;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const Node* a, const Node* b) { return a->order > b->order; });

    Tensor& g = root->ensure_grad();
    g.fill(1.0f);
    for (Node* n : nodes) {
        if (n->backward_fn && n->grad.defined()) n->backward_fn(*n);
    }
}

}  // namespace pa
