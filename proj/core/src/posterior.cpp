#include "bridgekit/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "bridgekit/parallel.hpp"

namespace bridgekit {

PosteriorCoeffs posterior_coeffs(const ScheduleTable& table, int t) {
    const StepParams step = transition_params(table, t);
    const double var_t = table.sigma2(t);
    const double var_prev = table.sigma2(t - 1);
    PosteriorCoeffs c;
    if (var_t == 0.0) {
        c.c_xt = 0.0;
        c.c_y = table.mu_y(t - 1);
        c.c_x0 = table.mu_x0(t - 1);
        c.v = var_prev;
        return c;
    }
    const double ratio = var_prev / var_t;
    c.c_xt = ratio * step.a;
    c.c_y = table.mu_y(t - 1) - table.mu_y(t) * ratio * step.a;
    c.c_x0 = table.mu_x0(t - 1) * (step.sigma2_step / var_t);
    c.v = step.sigma2_step * ratio;
    return c;
}

TensorBatch posterior_sample(const TensorBatch& x_t, const TensorBatch& y, const TensorBatch& x0_hat, int t,
                             const ScheduleTable& table, const Noise& noise) {
    std::vector<int> ts(x_t.batch(), t);
    return posterior_sample(x_t, y, x0_hat, ts, table, noise);
}

TensorBatch posterior_sample(const TensorBatch& x_t, const TensorBatch& y, const TensorBatch& x0_hat,
                             std::span<const int> ts, const ScheduleTable& table, const Noise& noise) {
    require_same_shape(x_t.shape(), y.shape(), "posterior_sample");
    require_same_shape(x_t.shape(), x0_hat.shape(), "posterior_sample");
    if (ts.size() != x_t.batch()) {
        fail(ErrorCategory::Shape, "posterior_sample: timestep count does not match batch size");
    }
    TensorBatch out(x_t.shape());
    parallel_for(x_t.batch(), [&](std::size_t i) {
        const PosteriorCoeffs c = posterior_coeffs(table, ts[i]);
        auto dst = out.row(i);
        auto xt = x_t.row(i);
        auto yy = y.row(i);
        auto x0 = x0_hat.row(i);
        if (c.v > 0.0) {
            noise.fill_normal(dst, i, static_cast<std::uint64_t>(ts[i]), Purpose::Posterior);
        } else {
            std::fill(dst.begin(), dst.end(), 0.0);
        }
        const double sd = std::sqrt(c.v);
        for (std::size_t k = 0; k < dst.size(); ++k) {
            dst[k] = c.c_xt * xt[k] + c.c_y * yy[k] + c.c_x0 * x0[k] + sd * dst[k];
        }
    });
    return out;
}

namespace {

struct Factor {
    double mean;
    double var;
};

// Composite Simpson moments of exp(logp) on [lo, hi] with n (even) intervals.
GaussianMoments simpson_moments(const std::function<double(double)>& logp, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    std::vector<double> u(n + 1), lp(n + 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
        u[i] = lo + h * i;
        lp[i] = logp(u[i]);
        peak = std::max(peak, lp[i]);
    }
    auto weight = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
    double z = 0.0, m1 = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = weight(i) * std::exp(lp[i] - peak);
        z += w;
        m1 += w * u[i];
    }
    const double mean = m1 / z;
    double m2 = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double d = u[i] - mean;
        m2 += weight(i) * std::exp(lp[i] - peak) * d * d;
    }
    return {mean, m2 / z};
}

GaussianMoments grid_posterior(const Factor& prior, const Factor& like) {
    auto logp = [&](double u) {
        const double dp = u - prior.mean, dl = u - like.mean;
        return -0.5 * dp * dp / prior.var - 0.5 * dl * dl / like.var;
    };
    const double spread = 12.0 * std::sqrt(std::max(prior.var, like.var));
    const double lo = std::min(prior.mean, like.mean) - spread;
    const double hi = std::max(prior.mean, like.mean) + spread;

    // Coarse pass to locate the support, then a fine pass restricted to it.
    constexpr int kCoarse = 1 << 16;
    const double h = (hi - lo) / kCoarse;
    std::vector<double> lp(kCoarse + 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kCoarse; ++i) {
        lp[i] = logp(lo + h * i);
        peak = std::max(peak, lp[i]);
    }
    int first = kCoarse, last = 0;
    for (int i = 0; i <= kCoarse; ++i) {
        if (lp[i] - peak > -80.0) {
            first = std::min(first, i);
            last = std::max(last, i);
        }
    }
    const double fine_lo = lo + h * (first - 1);
    const double fine_hi = lo + h * (last + 1);
    return simpson_moments(logp, fine_lo, fine_hi, 1 << 14);
}

}  // namespace

BayesOracleResult bayes_oracle_1d_detailed(const ScheduleTable& table, int t, double x_t, double y, double x0,
                                           double grid_tol) {
    const StepParams step = transition_params(table, t);
    const Factor prior{table.mu_x0(t - 1) * x0 + table.mu_y(t - 1) * y, table.sigma2(t - 1)};

    BayesOracleResult r;
    if (prior.var == 0.0) {
        r.product = {prior.mean, 0.0};
        r.grid = r.product;
        return r;
    }
    // With a == 0 the transition does not depend on x_{t-1}: the likelihood is flat.
    if (step.a == 0.0) {
        r.product = {prior.mean, prior.var};
        r.grid = r.product;
        return r;
    }
    const Factor like{(x_t - step.b * y) / step.a, step.sigma2_step / (step.a * step.a)};
    if (like.var == 0.0) {
        r.product = {like.mean, 0.0};
        r.grid = r.product;
        return r;
    }

    const double precision = 1.0 / prior.var + 1.0 / like.var;
    r.product.var = 1.0 / precision;
    r.product.mean = (prior.mean / prior.var + like.mean / like.var) * r.product.var;

    r.grid = grid_posterior(prior, like);
    r.grid_checked = true;
    auto close = [grid_tol](double a, double b) { return std::abs(a - b) <= grid_tol * std::max(1.0, std::abs(a)); };
    if (!close(r.product.mean, r.grid.mean) || !close(r.product.var, r.grid.var)) {
        fail(ErrorCategory::Oracle, "bayes_oracle_1d: product-of-Gaussians and grid integration disagree at t=" +
                                        std::to_string(t) + " (mean " + std::to_string(r.product.mean) + " vs " +
                                        std::to_string(r.grid.mean) + ", var " + std::to_string(r.product.var) +
                                        " vs " + std::to_string(r.grid.var) + ")");
    }
    return r;
}

}  // namespace bridgekit
