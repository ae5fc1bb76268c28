#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bridgekit/error.hpp"
#include "bridgekit/schedule.hpp"
#include "bridgekit/tensor.hpp"

namespace bridgekit {

// Target-image estimator G(x_t, t, y, x0_prev). Implementations must allow
// concurrent calls on a const instance.
class Generator {
  public:
    virtual ~Generator() = default;
    virtual TensorBatch estimate(const TensorBatch& x_t, int t, const TensorBatch& y,
                                 const TensorBatch& x0_prev) const = 0;
};

class FunctionGenerator final : public Generator {
  public:
    using Fn = std::function<TensorBatch(const TensorBatch&, int, const TensorBatch&, const TensorBatch&)>;
    explicit FunctionGenerator(Fn fn) : fn_(std::move(fn)) {}
    TensorBatch estimate(const TensorBatch& x_t, int t, const TensorBatch& y,
                         const TensorBatch& x0_prev) const override {
        return fn_(x_t, t, y, x0_prev);
    }

  private:
    Fn fn_;
};

struct SamplerOptions {
    double rel_tol = 0.01;
    int r_max = 4;
    bool emit_trajectory = false;
    std::uint64_t seed = 0;
    // Zero every noise draw (endpoint and posterior); used by the noiseless oracle checks.
    bool zero_noise = false;

    void validate() const;
};

struct EstimateResult {
    TensorBatch x0_star;
    int recursions = 0;                    // generator calls made
    std::vector<double> relative_changes;  // per recursion, max over batch elements
};

// Raised when the generator or the chain state stops being finite.
class DivergenceError : public Error {
  public:
    DivergenceError(int t, int recursion, std::vector<double> history);
    int t() const noexcept { return t_; }
    int recursion() const noexcept { return recursion_; }
    const std::vector<double>& norm_history() const noexcept { return history_; }

  private:
    int t_;
    int recursion_;
    std::vector<double> history_;
};

// Iterates x0^{r+1} = G(x_t, t, y, x0^r) from x0^1 = 0 until the relative l2
// change of every batch element drops below rel_tol, or r_max calls were made.
EstimateResult self_consistent_estimate(const Generator& G, const TensorBatch& x_t, int t, const TensorBatch& y,
                                        const SamplerOptions& opts);

struct SampleResult {
    TensorBatch x0;
    std::vector<TensorBatch> trajectory;  // x_T, x_{T-1}, ..., x_0 when requested
    long generator_calls = 0;
    double mean_recursions = 0.0;
};

// Full reverse chain from the noise-added source end-point down to t = 0. The
// clean source y guides the generator at every step.
SampleResult reverse_chain(const Generator& G, const TensorBatch& y, const ScheduleTable& table,
                           const SamplerOptions& opts);

}  // namespace bridgekit
