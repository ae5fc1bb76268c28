#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <string_view>

#include "bridgekit/cli.hpp"
#include "bridgekit/posterior.hpp"
#include "bridgekit/sampler.hpp"
#include "bridgekit/schedule.hpp"

namespace bridgekit::cli {

namespace {

constexpr int kTs[] = {4, 32, 256};
constexpr Variant kVariants[] = {Variant::SelfRDB, Variant::RegularBridge};

class Table {
  public:
    Table(std::ostream& out, bool quiet) : out_(out), quiet_(quiet) {
        out_ << std::left << std::setw(10) << "suite" << std::setw(9) << "variant" << std::setw(6) << "T"
             << std::setw(6) << "t" << std::setw(8) << "result" << "max_err\n";
    }

    void row(const char* suite, std::string_view variant, int T, int t, double err, double tol) {
        const bool ok = std::isfinite(err) && err <= tol;
        if (!ok) ++failed_;
        ++rows_;
        if (quiet_ && ok) return;
        auto num = [](int v) { return v > 0 ? std::to_string(v) : std::string("-"); };
        out_ << std::left << std::setw(10) << suite << std::setw(9) << variant << std::setw(6) << num(T)
             << std::setw(6) << num(t) << std::setw(8) << (ok ? "PASS" : "FAIL") << std::scientific
             << std::setprecision(2) << err << std::defaultfloat << '\n';
    }

    int failed() const { return failed_; }
    int rows() const { return rows_; }

  private:
    std::ostream& out_;
    bool quiet_;
    int failed_ = 0;
    int rows_ = 0;
};

double schedule_error(const ScheduleTable& s) {
    const int T = s.T();
    double err = 0.0, sum = 0.0;
    for (int t = 0; t <= T; ++t) {
        sum += s.g(t);
        err = std::max(err, std::abs(s.mu_x0(t) + s.mu_y(t) - 1.0));
        err = std::max(err, std::max(0.0, -s.mu_x0(t)));
        err = std::max(err, std::max(0.0, -s.mu_y(t)));
    }
    err = std::max(err, std::abs(sum - 1.0));
    err = std::max(err, std::abs(s.s2(T) - 1.0));
    if (s.variant() == Variant::SelfRDB) {
        err = std::max(err, std::abs(s.sigma2(T) - s.gamma()));
        // strictly increasing: a violation counts as an error of 1
        for (int t = 1; t <= T; ++t)
            if (!(s.sigma2(t) > s.sigma2(t - 1))) err = 1.0;
    } else {
        err = std::max(err, std::abs(s.sigma2(0)));
        err = std::max(err, std::abs(s.sigma2(T)));
        for (int t = 0; t <= T; ++t) err = std::max(err, std::abs(s.sigma2(t) - s.sigma2(T - t)));
    }
    return err;
}

// Largest disagreement between the closed form and the library oracle, split
// into (closed form vs product, product vs grid).
std::pair<double, double> posterior_error(const ScheduleTable& s, int t, std::mt19937_64& gen, int draws) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const PosteriorCoeffs c = posterior_coeffs(s, t);
    double e_prod = 0.0, e_grid = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double xt = u(gen), y = u(gen), x0 = u(gen);
        const auto r = bayes_oracle_1d_detailed(s, t, xt, y, x0, 1.0);
        const double mean = c.c_xt * xt + c.c_y * y + c.c_x0 * x0;
        e_prod = std::max({e_prod, std::abs(mean - r.product.mean) / std::max(1.0, std::abs(r.product.mean)),
                           std::abs(c.v - r.product.var) / std::max(1.0, r.product.var)});
        if (r.grid_checked) {
            e_grid = std::max({e_grid, std::abs(r.grid.mean - r.product.mean) / std::max(1.0, std::abs(r.product.mean)),
                               std::abs(r.grid.var - r.product.var) / std::max(1.0, r.product.var)});
        }
    }
    return {e_prod, e_grid};
}

double round_trip_error(const ScheduleTable& s) {
    const std::size_t n = 4, d = 3;
    TensorBatch x0({n, d}), y({n, d});
    for (std::size_t k = 0; k < x0.numel(); ++k) {
        x0[k] = std::sin(1.3 * static_cast<double>(k) + 0.2);
        y[k] = std::cos(0.7 * static_cast<double>(k) - 0.5);
    }
    const FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch&) { return x0; });
    SamplerOptions opts;
    opts.zero_noise = true;
    const auto res = reverse_chain(G, y, s, opts);
    double err = 0.0;
    for (std::size_t k = 0; k < x0.numel(); ++k) err = std::max(err, std::abs(res.x0[k] - x0[k]));
    return err;
}

// Affine contraction G(u) = 0.5 u + c; returns the relative fixed-point residual
// |G(x*) - x*| / |x*| of the returned estimate.
double contraction_error() {
    TensorBatch c({2, 3}, std::vector<double>{0.3, -0.2, 0.5, 1.0, 0.1, -0.7});
    const FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch& u) {
        TensorBatch r(u.shape());
        for (std::size_t k = 0; k < r.numel(); ++k) r[k] = 0.5 * u[k] + c[k];
        return r;
    });
    SamplerOptions opts;
    opts.r_max = 64;
    const auto est = self_consistent_estimate(G, c, 1, c, opts);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < c.numel(); ++k) {
        const double r = 0.5 * est.x0_star[k] + c[k] - est.x0_star[k];
        num += r * r;
        den += est.x0_star[k] * est.x0_star[k];
    }
    return std::sqrt(num / den);
}

}  // namespace

int run_verify(const VerifyOptions& opts, std::ostream& out) {
    Table table(out, opts.quiet);
    std::mt19937_64 gen(20240531);
    for (Variant v : kVariants) {
        for (int T : kTs) {
            const ScheduleTable s = build_schedule({T, 2.2, v});
            if (opts.schedule) table.row("schedule", variant_name(v), T, 0, schedule_error(s), 1e-12);
            if (opts.posterior) {
                for (int t = 1; t <= T; ++t) {
                    // Grid integration is the slow part; thin it out on long chains.
                    const int draws = T > 32 ? 4 : 8;
                    const auto [e_prod, e_grid] = posterior_error(s, t, gen, draws);
                    table.row("post-prod", variant_name(v), T, t, e_prod, 1e-9);
                    table.row("post-grid", variant_name(v), T, t, e_grid, 1e-6);
                }
            }
            if (opts.sampler) table.row("roundtrip", variant_name(v), T, 0, round_trip_error(s), 1e-6);
        }
    }
    if (opts.sampler) table.row("contract", "-", 0, 0, contraction_error(), 0.01);
    out << table.rows() - table.failed() << '/' << table.rows() << " checks passed\n";
    return table.failed();
}

}  // namespace bridgekit::cli
