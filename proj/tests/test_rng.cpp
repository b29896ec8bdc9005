#include <doctest.h>

#include "kqsd/rng.hpp"

#include <cmath>
#include <vector>

using namespace kqsd;

TEST_CASE("draws are pure functions of (seed, stream, step, slot)") {
    CounterRng a(42, 7, 3);
    CounterRng b(42, 7, 3);

    // out-of-order access on b must reproduce a's in-order values exactly
    std::vector<double> in_order;
    for (std::uint64_t step = 0; step < 16; ++step)
        for (unsigned slot = 0; slot < 3; ++slot) in_order.push_back(a.normal(step, slot));

    std::size_t k = 0;
    for (std::uint64_t step = 16; step-- > 0;)
        for (unsigned slot = 0; slot < 3; ++slot) {
            const double v = b.normal(step, slot);
            CHECK(v == in_order[step * 3 + slot]);
            ++k;
        }
    CHECK(k == in_order.size());
}

TEST_CASE("distinct seeds and streams decorrelate") {
    CounterRng base(1, 0), seed2(2, 0), stream2(1, 1);
    int same_seed = 0, same_stream = 0;
    for (std::uint64_t s = 0; s < 64; ++s) {
        if (base.normal(s, 0) == seed2.normal(s, 0)) ++same_seed;
        if (base.normal(s, 0) == stream2.normal(s, 0)) ++same_stream;
    }
    CHECK(same_seed == 0);
    CHECK(same_stream == 0);
}

TEST_CASE("uniform lane does not perturb the normal lane") {
    CounterRng a(9, 3), b(9, 3);
    const double n0 = a.normal(5, 0);
    (void)b.uniform(5, 0);
    (void)b.uniform(4, 0);
    CHECK(b.normal(5, 0) == n0);
}

TEST_CASE("uniforms stay inside the open unit interval") {
    CHECK(uniform_from_bits(0) > 0.0);
    CHECK(uniform_from_bits(~0ULL) < 1.0);
    CounterRng rng(3, 11);
    for (std::uint64_t s = 0; s < 4096; ++s) {
        const double u = rng.uniform(s, 0);
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws match standard moments") {
    CounterRng rng(17, 5);
    const std::uint64_t n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (std::uint64_t s = 0; s < n; ++s) {
        const double z = rng.normal(s, 0);
        sum += z;
        sum2 += z * z;
    }
    const double m = sum / n;
    const double v = sum2 / n - m * m;
    // mean se = 1/sqrt(n), variance se ~ sqrt(2/n)
    CHECK(std::abs(m) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(v - 1.0) < 4.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("zero noise is identically zero") {
    ZeroNoise z;
    CHECK(z.normal(0, 0) == 0.0);
    CHECK(z.normal(123456, 3) == 0.0);
}

TEST_CASE("reserved streams sit outside the sample range") {
    CHECK(streams::resample > (1ULL << 32));
    CHECK(streams::initial != streams::resample);
    CHECK(streams::bootstrap != streams::initial);
    CHECK(streams::synthetic != streams::bootstrap);
}
