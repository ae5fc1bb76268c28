#include <atomic>
#include <cmath>
#include <limits>

#include "bridgekit/sampler.hpp"
#include "doctest.h"

using namespace bridgekit;

namespace {

TensorBatch filled(Shape s, double v) { return TensorBatch(std::move(s), v); }

}  // namespace

TEST_CASE("recursion stops after two calls when the input is ignored") {
    std::atomic<int> calls{0};
    FunctionGenerator G([&](const TensorBatch& x, int, const TensorBatch&, const TensorBatch&) {
        ++calls;
        return filled(x.shape(), 0.4);
    });
    const auto x = filled({3, 4}, 0.0);
    const auto r = self_consistent_estimate(G, x, 5, x, {});
    CHECK(r.recursions == 2);
    CHECK(calls == 2);
    CHECK(r.relative_changes.back() == 0.0);
}

TEST_CASE("affine contraction converges geometrically to its fixed point") {
    const double c = 0.3;
    FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch& u) {
        TensorBatch out(u.shape());
        for (std::size_t k = 0; k < u.numel(); ++k) out[k] = 0.5 * u[k] + c;
        return out;
    });
    const auto x = filled({2, 3}, 0.0);
    SamplerOptions opts;
    opts.r_max = 50;
    const auto r = self_consistent_estimate(G, x, 1, x, opts);
    // 0.3, 0.45, ... relative changes 0.5, 1/6, 1/14, ... first below 0.01 at the 7th call.
    CHECK(r.recursions == 7);
    CHECK(r.relative_changes.back() < 0.01);
    const auto next = G.estimate(x, 1, x, r.x0_star);
    double diff = 0.0, base = 0.0;
    for (std::size_t k = 0; k < next.numel(); ++k) {
        diff += (next[k] - r.x0_star[k]) * (next[k] - r.x0_star[k]);
        base += r.x0_star[k] * r.x0_star[k];
    }
    CHECK(std::sqrt(diff / base) < 0.01);
    CHECK(std::abs(r.x0_star[0] - 2 * c) == doctest::Approx(2 * c * std::ldexp(1.0, -7)).epsilon(1e-12));
}

TEST_CASE("recursion cap") {
    std::atomic<int> calls{0};
    FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch& u) {
        ++calls;
        TensorBatch out(u.shape());
        for (std::size_t k = 0; k < u.numel(); ++k) out[k] = 0.5 * u[k] + 1.0;
        return out;
    });
    SamplerOptions opts;
    opts.r_max = 1;
    const auto x = filled({1, 2}, 0.0);
    CHECK(self_consistent_estimate(G, x, 3, x, opts).recursions == 1);
    CHECK(calls == 1);
    opts.r_max = 0;
    CHECK_THROWS_AS(self_consistent_estimate(G, x, 3, x, opts), Error);
}

TEST_CASE("oracle generator round trip") {
    TensorBatch x0({3, 4}, {0.1, -0.2, 0.9, 0.5, -0.7, 0.3, 0.0, 0.25, -0.9, 0.6, 0.45, -0.1});
    TensorBatch y({3, 4});
    for (std::size_t k = 0; k < y.numel(); ++k) y[k] = std::tanh(1.3 * x0[k] - 0.2);
    FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch&) { return x0; });
    for (Variant v : {Variant::SelfRDB, Variant::RegularBridge}) {
        const auto table = build_schedule({32, 2.2, v});
        SamplerOptions opts;
        opts.zero_noise = true;
        opts.emit_trajectory = true;
        const auto r = reverse_chain(G, y, table, opts);
        for (std::size_t k = 0; k < x0.numel(); ++k) CHECK(std::abs(r.x0[k] - x0[k]) < 1e-6);
        CHECK(r.trajectory.size() == 33);
        CHECK(r.generator_calls == 64);
        CHECK(r.mean_recursions == 2.0);
        CHECK(r.generator_calls <= 32 * opts.r_max);
    }
}

TEST_CASE("sampling is reproducible from the seed") {
    FunctionGenerator G([](const TensorBatch& x, int, const TensorBatch& y, const TensorBatch&) {
        TensorBatch out(x.shape());
        for (std::size_t k = 0; k < x.numel(); ++k) out[k] = std::tanh(0.5 * x[k] - 0.3 * y[k]);
        return out;
    });
    const auto table = build_schedule({16, 2.2, Variant::SelfRDB});
    TensorBatch y({4, 2}, 0.2);
    SamplerOptions opts;
    opts.seed = 17;
    const auto a = reverse_chain(G, y, table, opts);
    const auto b = reverse_chain(G, y, table, opts);
    CHECK(a.x0 == b.x0);
    opts.seed = 18;
    CHECK_FALSE(reverse_chain(G, y, table, opts).x0 == a.x0);
}

TEST_CASE("non-finite generator output raises a divergence error") {
    FunctionGenerator G([](const TensorBatch& x, int t, const TensorBatch&, const TensorBatch&) {
        return TensorBatch(x.shape(), t == 7 ? std::numeric_limits<double>::quiet_NaN() : 0.1);
    });
    const auto table = build_schedule({10, 2.2, Variant::SelfRDB});
    TensorBatch y({2, 2}, 0.0);
    try {
        reverse_chain(G, y, table, {});
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.t() == 7);
        CHECK(e.recursion() == 1);
        CHECK(e.norm_history().size() == 1);
        CHECK(e.category() == ErrorCategory::Numeric);
    }
}
