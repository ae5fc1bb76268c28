#include "bridgekit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bridgekit/forward.hpp"
#include "bridgekit/posterior.hpp"

namespace bridgekit {

namespace {

std::string divergence_message(int t, int recursion, const std::vector<double>& history) {
    std::ostringstream os;
    os << "non-finite state at t=" << t << " recursion=" << recursion << " norm_history=[";
    for (std::size_t i = 0; i < history.size(); ++i) os << (i ? "," : "") << history[i];
    os << "]";
    return os.str();
}

}  // namespace

DivergenceError::DivergenceError(int t, int recursion, std::vector<double> history)
    : Error(ErrorCategory::Numeric, divergence_message(t, recursion, history)),
      t_(t),
      recursion_(recursion),
      history_(std::move(history)) {}

void SamplerOptions::validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) fail(ErrorCategory::Config, "rel_tol must lie in (0, 1)");
    if (r_max < 1) fail(ErrorCategory::Config, "r_max must be >= 1");
}

EstimateResult self_consistent_estimate(const Generator& G, const TensorBatch& x_t, int t, const TensorBatch& y,
                                        const SamplerOptions& opts) {
    opts.validate();
    require_same_shape(x_t.shape(), y.shape(), "self_consistent_estimate");
    EstimateResult res;
    TensorBatch current(x_t.shape());
    std::vector<double> norms;
    for (int r = 1; r <= opts.r_max; ++r) {
        TensorBatch next = G.estimate(x_t, t, y, current);
        ++res.recursions;
        require_same_shape(next.shape(), x_t.shape(), "generator output");
        norms.push_back(l2_norm(next.data()));
        if (!all_finite(next.data())) throw DivergenceError(t, r, norms);

        double worst = 0.0;
        for (std::size_t i = 0; i < next.batch(); ++i) {
            auto a = next.row(i);
            auto b = current.row(i);
            double diff = 0.0, base = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                diff += (a[k] - b[k]) * (a[k] - b[k]);
                base += b[k] * b[k];
            }
            worst = std::max(worst, std::sqrt(diff) / (std::sqrt(base) + 1e-8));
        }
        res.relative_changes.push_back(worst);
        current = std::move(next);
        if (worst < opts.rel_tol) break;
    }
    res.x0_star = std::move(current);
    return res;
}

SampleResult reverse_chain(const Generator& G, const TensorBatch& y, const ScheduleTable& table,
                           const SamplerOptions& opts) {
    opts.validate();
    const Noise noise = opts.zero_noise ? Noise::zero() : Noise(opts.seed);
    SampleResult out;
    TensorBatch x = sample_endpoint(y, table, noise);
    if (opts.emit_trajectory) out.trajectory.push_back(x);
    for (int t = table.T(); t >= 1; --t) {
        EstimateResult est = self_consistent_estimate(G, x, t, y, opts);
        out.generator_calls += est.recursions;
        x = posterior_sample(x, y, est.x0_star, t, table, noise);
        if (!all_finite(x.data())) throw DivergenceError(t, est.recursions, {l2_norm(x.data())});
        if (opts.emit_trajectory) out.trajectory.push_back(x);
    }
    out.mean_recursions = static_cast<double>(out.generator_calls) / table.T();
    out.x0 = std::move(x);
    return out;
}

}  // namespace bridgekit
