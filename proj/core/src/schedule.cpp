#include "bridgekit/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "bridgekit/error.hpp"

namespace bridgekit {

namespace {

// Tolerance below which a negative one-step variance is attributed to roundoff.
constexpr double kStepVarianceSlack = 1e-12;

}  // namespace

std::string_view variant_name(Variant v) noexcept {
    return v == Variant::SelfRDB ? "selfrdb" : "regular";
}

Variant parse_variant(std::string_view name) {
    if (name == "selfrdb" || name == "SelfRDB") return Variant::SelfRDB;
    if (name == "regular" || name == "RegularBridge" || name == "regular_bridge") return Variant::RegularBridge;
    fail(ErrorCategory::Config, "unknown schedule variant '" + std::string(name) + "' (expected selfrdb|regular)");
}

void ScheduleConfig::validate() const {
    if (T < 2) fail(ErrorCategory::Schedule, "T must be >= 2, got " + std::to_string(T));
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        fail(ErrorCategory::Schedule, "gamma must be a positive finite number");
    }
}

double diffusion_coefficient(double t, int T) {
    if (!(t > 0.0 && t < T)) {
        fail(ErrorCategory::Domain, "diffusion_coefficient: t must lie in (0, T), got t=" + std::to_string(t) +
                                        " T=" + std::to_string(T));
    }
    const double v = T - std::abs(2.0 * t - T);
    return v * v;
}

ScheduleTable::ScheduleTable(const ScheduleConfig& config)
    : T_(config.T), gamma_(config.gamma), variant_(config.variant) {
    config.validate();
    const auto n = static_cast<std::size_t>(T_) + 1;
    g_.assign(n, 0.0);
    s2_.assign(n, 0.0);

    // Midpoint evaluation keeps every step weight strictly positive; the endpoint
    // values of the coefficient are zero.
    std::vector<double> cumulative(n, 0.0);
    for (int t = 1; t <= T_; ++t) {
        g_[t] = diffusion_coefficient(t - 0.5, T_);
        cumulative[t] = cumulative[t - 1] + g_[t];
    }
    const double total = cumulative[T_];
    for (int t = 1; t <= T_; ++t) {
        g_[t] /= total;
        s2_[t] = cumulative[t] / total;
    }
    s2_[T_] = 1.0;

    sbar2_.resize(n);
    mu_x0_.resize(n);
    mu_y_.resize(n);
    sigma2_.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        sbar2_[t] = 1.0 - s2_[t];
        mu_x0_[t] = 1.0 - s2_[t];
        mu_y_[t] = s2_[t];
        sigma2_[t] = variant_ == Variant::SelfRDB ? gamma_ * std::sqrt(s2_[t]) : s2_[t] * (1.0 - s2_[t]);
    }
}

double ScheduleTable::sigma(int t) const { return std::sqrt(sigma2(t)); }

StepParams transition_params(const ScheduleTable& table, int t) {
    if (t < 1 || t > table.T()) {
        fail(ErrorCategory::Domain, "transition_params: t must lie in 1..T, got " + std::to_string(t));
    }
    StepParams p;
    p.a = table.mu_x0(t) / table.mu_x0(t - 1);
    p.b = table.mu_y(t) - p.a * table.mu_y(t - 1);
    p.sigma2_step = table.sigma2(t) - p.a * p.a * table.sigma2(t - 1);
    if (p.sigma2_step < 0.0) {
        if (p.sigma2_step < -kStepVarianceSlack) {
            fail(ErrorCategory::Schedule, "one-step variance negative at t=" + std::to_string(t) + " (" +
                                              std::to_string(p.sigma2_step) +
                                              "); variance curve is not Markov-realizable");
        }
        p.sigma2_step = 0.0;
    }
    return p;
}

void export_schedule_csv(const ScheduleTable& table, std::ostream& out) {
    out << "t,g,s2,mu_x0,mu_y,sigma2\n";
    char buf[512];
    for (int t = 0; t <= table.T(); ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, table.g(t), table.s2(t),
                      table.mu_x0(t), table.mu_y(t), table.sigma2(t));
        out << buf;
    }
}

}  // namespace bridgekit
