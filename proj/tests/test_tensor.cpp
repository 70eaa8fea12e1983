#include <limits>
#include <stdexcept>

#include "core/graph.h"
#include "core/ops.h"
#include "core/tensor.h"
#include "doctest.h"

using namespace pa;

TEST_CASE("tensor construction and shape") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.ndim() == 3);
    CHECK(t.dim(1) == 3);
    CHECK(t.max_abs() == 0.0f);

    Tensor f = Tensor::full({2, 2}, 1.5f);
    CHECK(f[3] == 1.5f);
    CHECK(f.max_abs() == 1.5f);

    Tensor d = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f});
    CHECK(d[1] == -2.0f);
    CHECK(d.max_abs() == 2.0f);
    CHECK(d.all_finite());
    d[2] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(d.all_finite());
}

TEST_CASE("tensor copies are shallow, clone is deep") {
    Tensor a = Tensor::full({4}, 1.0f);
    Tensor b = a;
    b[0] = 9.0f;
    CHECK(a[0] == 9.0f);

    Tensor c = a.clone();
    c[1] = 7.0f;
    CHECK(a[1] == 1.0f);
}

TEST_CASE("reshape shares the buffer and validates the element count") {
    Tensor a = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
    Tensor r = a.reshape({3, 2});
    CHECK(r.dim(0) == 3);
    r[5] = 42.0f;
    CHECK(a[5] == 42.0f);
    CHECK_THROWS_AS((void)a.reshape({4, 2}), std::runtime_error);
}

TEST_CASE("graph records only when a parent requires grad") {
    Tensor v = Tensor::full({2}, 1.0f);
    Var a = leaf(v.clone(), false);
    Var b = leaf(v.clone(), true);

    Var s1 = add(a, a);
    CHECK_FALSE(s1->requires_grad);
    CHECK(s1->parents.empty());

    Var s2 = add(a, b);
    CHECK(s2->requires_grad);
    CHECK(s2->parents.size() == 2);

    NoGradGuard ng;
    Var s3 = add(b, b);
    CHECK_FALSE(s3->requires_grad);
    CHECK(s3->parents.empty());
}

TEST_CASE("backward accumulates along both paths of a diamond") {
    // y = x*x + x  =>  dy/dx = 2x + 1, summed over elements by the ones seed.
    Tensor v = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f});
    Var x = leaf(v, true);
    Var y = add(mul(x, x), x);
    backward(y);
    REQUIRE(x->grad.defined());
    CHECK(x->grad[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(x->grad[1] == doctest::Approx(-3.0).epsilon(1e-6));
    CHECK(x->grad[2] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("backward can run twice and accumulates into existing grads") {
    Var x = leaf(Tensor::full({2}, 2.0f), true);
    Var y = mul(x, x);
    backward(y);
    CHECK(x->grad[0] == doctest::Approx(4.0));
    Var y2 = mul(x, x);
    backward(y2);
    CHECK(x->grad[0] == doctest::Approx(8.0));
    x->zero_grad();
    CHECK(x->grad[0] == 0.0f);
}
