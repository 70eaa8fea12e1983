#include <cmath>
#include <string>
#include <vector>

#include "core/rng.h"
#include "doctest.h"

using namespace pa;

TEST_CASE("fnv1a64 matches published test vectors") {
    CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ull);
    CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ull);
}

TEST_CASE("identical seeds give identical streams") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(1234), d(1235);
    bool all_same = true;
    for (int i = 0; i < 10; ++i) all_same &= (c.next_u64() == d.next_u64());
    CHECK_FALSE(all_same);
}

TEST_CASE("uniform stays in [0,1) and has the right mean") {
    Rng r(7);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal has unit variance and consumes a fixed number of draws") {
    Rng r(11);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sq += x * x;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));

    // Stream position after k normal draws is exactly 2k uniforms, regardless
    // of the values drawn: two generators stay in lockstep even when one
    // interleaves other work between batches.
    Rng a(99), b(99);
    for (int i = 0; i < 17; ++i) (void)a.normal();
    for (int i = 0; i < 12; ++i) (void)b.normal();
    for (int i = 0; i < 5; ++i) (void)b.normal();
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform_index covers [0,n) roughly evenly") {
    Rng r(3);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[(size_t)r.uniform_index(5)]++;
    for (int c : counts) CHECK(std::abs(c - n / 5) < 500);
}

TEST_CASE("categorical respects the weights") {
    Rng r(5);
    std::vector<double> probs = {0.4, 0.1, 0.5};
    std::vector<int> counts(3, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[r.categorical(probs)]++;
    CHECK(std::abs(counts[0] / (double)n - 0.4) < 0.01);
    CHECK(std::abs(counts[1] / (double)n - 0.1) < 0.01);
    CHECK(std::abs(counts[2] / (double)n - 0.5) < 0.01);
}

TEST_CASE("child streams are deterministic, tag-distinct, and leave the parent alone") {
    Rng parent(42);
    uint64_t before = Rng(42).next_u64();

    Rng c1 = parent.child("alpha");
    Rng c2 = parent.child("alpha");
    Rng c3 = parent.child("beta");
    CHECK(c1.next_u64() == c2.next_u64());
    CHECK(c1.next_u64() == c2.next_u64());
    Rng c4 = parent.child("beta");
    CHECK_FALSE(c3.next_u64() == Rng(parent.child("alpha")).next_u64());
    (void)c4;

    // Deriving children must not advance the parent stream.
    CHECK(parent.next_u64() == before);

    // Numeric tags behave the same way.
    Rng n1 = parent.child((uint64_t)7);
    Rng n2 = parent.child((uint64_t)7);
    CHECK(n1.next_u64() == n2.next_u64());
}
