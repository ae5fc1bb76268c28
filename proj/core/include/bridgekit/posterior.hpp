#pragma once

#include <span>

#include "bridgekit/rng.hpp"
#include "bridgekit/schedule.hpp"
#include "bridgekit/tensor.hpp"

namespace bridgekit {

// Reverse posterior q(x_{t-1} | x_t, y, x0) = N(c_xt x_t + c_y y + c_x0 x0, v).
struct PosteriorCoeffs {
    double c_xt = 0.0;
    double c_y = 0.0;
    double c_x0 = 0.0;
    double v = 0.0;
};

// Closed form from the product of the one-step transition and the t-1 marginal.
// When sigma2_t == 0 (regular bridge at t = T) x_t carries no information about
// x_{t-1} and the posterior reduces to the t-1 marginal.
PosteriorCoeffs posterior_coeffs(const ScheduleTable& table, int t);

TensorBatch posterior_sample(const TensorBatch& x_t, const TensorBatch& y, const TensorBatch& x0_hat, int t,
                             const ScheduleTable& table, const Noise& noise);

TensorBatch posterior_sample(const TensorBatch& x_t, const TensorBatch& y, const TensorBatch& x0_hat,
                             std::span<const int> ts, const ScheduleTable& table, const Noise& noise);

struct GaussianMoments {
    double mean = 0.0;
    double var = 0.0;
};

struct BayesOracleResult {
    GaussianMoments product;   // completing the square over the two factors
    GaussianMoments grid;      // numerical integration; equals product when skipped
    bool grid_checked = false;
};

// Independent scalar oracle. Computes the posterior by completing the square and
// by grid integration over x_{t-1}; throws ErrorCategory::Oracle when the two
// disagree beyond grid_tol (relative to max(1, |value|)).
BayesOracleResult bayes_oracle_1d_detailed(const ScheduleTable& table, int t, double x_t, double y, double x0,
                                           double grid_tol = 1e-6);

inline GaussianMoments bayes_oracle_1d(const ScheduleTable& table, int t, double x_t, double y, double x0) {
    return bayes_oracle_1d_detailed(table, t, x_t, y, x0).product;
}

}  // namespace bridgekit
