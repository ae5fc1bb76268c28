#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bridgekit/error.hpp"

namespace bridgekit {

enum class Variant {
    SelfRDB,        // noise variance grows monotonically to gamma at the source end-point
    RegularBridge,  // zero variance at both end-points, peak at the mid-point
};

std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view name);

struct ScheduleConfig {
    int T = 1000;
    double gamma = 2.2;
    Variant variant = Variant::SelfRDB;

    void validate() const;
};

// Unnormalized diffusion weight (T - |2t - T|)^2, defined on the open interval (0, T).
double diffusion_coefficient(double t, int T);

// One-step Gaussian transition x_t = a x_{t-1} + b y + sqrt(sigma2_step) eps.
struct StepParams {
    double a = 0.0;
    double b = 0.0;
    double sigma2_step = 0.0;
};

// Per-timestep weights and variances for t = 0..T. Immutable after construction.
class ScheduleTable {
  public:
    explicit ScheduleTable(const ScheduleConfig& config);

    int T() const noexcept { return T_; }
    double gamma() const noexcept { return gamma_; }
    Variant variant() const noexcept { return variant_; }

    double g(int t) const { return g_.at(t); }
    double s2(int t) const { return s2_.at(t); }
    double sbar2(int t) const { return sbar2_.at(t); }
    double mu_x0(int t) const { return mu_x0_.at(t); }
    double mu_y(int t) const { return mu_y_.at(t); }
    double sigma2(int t) const { return sigma2_.at(t); }
    double sigma(int t) const;

  private:
    int T_;
    double gamma_;
    Variant variant_;
    std::vector<double> g_, s2_, sbar2_, mu_x0_, mu_y_, sigma2_;
};

inline ScheduleTable build_schedule(const ScheduleConfig& config) { return ScheduleTable(config); }

StepParams transition_params(const ScheduleTable& table, int t);

// CSV with header t,g,s2,mu_x0,mu_y,sigma2; one row per t, 17 significant digits.
void export_schedule_csv(const ScheduleTable& table, std::ostream& out);

}  // namespace bridgekit
