#include "bridgekit/forward.hpp"

#include <cmath>
#include <vector>

#include "bridgekit/parallel.hpp"

namespace bridgekit {

namespace {

void check_timesteps(std::span<const int> ts, std::size_t batch, int lo, int hi, const char* what) {
    if (ts.size() != batch) {
        fail(ErrorCategory::Shape, std::string(what) + ": " + std::to_string(ts.size()) +
                                       " timesteps for batch of " + std::to_string(batch));
    }
    for (int t : ts) {
        if (t < lo || t > hi) {
            fail(ErrorCategory::Domain, std::string(what) + ": timestep " + std::to_string(t) + " outside " +
                                            std::to_string(lo) + ".." + std::to_string(hi));
        }
    }
}

}  // namespace

TensorBatch sample_marginal(const TensorBatch& x0, const TensorBatch& y, int t, const ScheduleTable& table,
                            const Noise& noise, Purpose purpose) {
    std::vector<int> ts(x0.batch(), t);
    return sample_marginal(x0, y, ts, table, noise, purpose);
}

TensorBatch sample_marginal(const TensorBatch& x0, const TensorBatch& y, std::span<const int> ts,
                            const ScheduleTable& table, const Noise& noise, Purpose purpose) {
    require_same_shape(x0.shape(), y.shape(), "sample_marginal");
    check_timesteps(ts, x0.batch(), 0, table.T(), "sample_marginal");
    TensorBatch out(x0.shape());
    parallel_for(x0.batch(), [&](std::size_t i) {
        const int t = ts[i];
        auto dst = out.row(i);
        noise.fill_normal(dst, i, static_cast<std::uint64_t>(t), purpose);
        const double wx = table.mu_x0(t), wy = table.mu_y(t), sd = table.sigma(t);
        auto a = x0.row(i);
        auto b = y.row(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = wx * a[k] + wy * b[k] + sd * dst[k];
    });
    return out;
}

TensorBatch sample_endpoint(const TensorBatch& y, const ScheduleTable& table, const Noise& noise) {
    const int T = table.T();
    if (table.sigma2(T) == 0.0) return y;
    TensorBatch out(y.shape());
    const double sd = table.sigma(T);
    parallel_for(y.batch(), [&](std::size_t i) {
        auto dst = out.row(i);
        noise.fill_normal(dst, i, static_cast<std::uint64_t>(T), Purpose::Endpoint);
        auto src = y.row(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k] + sd * dst[k];
    });
    return out;
}

TensorBatch sample_step(const TensorBatch& x_prev, const TensorBatch& y, int t, const ScheduleTable& table,
                        const Noise& noise, Purpose purpose) {
    std::vector<int> ts(x_prev.batch(), t);
    return sample_step(x_prev, y, ts, table, noise, purpose);
}

TensorBatch sample_step(const TensorBatch& x_prev, const TensorBatch& y, std::span<const int> ts,
                        const ScheduleTable& table, const Noise& noise, Purpose purpose) {
    require_same_shape(x_prev.shape(), y.shape(), "sample_step");
    check_timesteps(ts, x_prev.batch(), 1, table.T(), "sample_step");
    TensorBatch out(x_prev.shape());
    parallel_for(x_prev.batch(), [&](std::size_t i) {
        const StepParams p = transition_params(table, ts[i]);
        const double sd = std::sqrt(p.sigma2_step);
        auto dst = out.row(i);
        noise.fill_normal(dst, i, static_cast<std::uint64_t>(ts[i]), purpose);
        auto xp = x_prev.row(i);
        auto yy = y.row(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = p.a * xp[k] + p.b * yy[k] + sd * dst[k];
    });
    return out;
}

}  // namespace bridgekit
