#pragma once

// Reference computations written independently of the library, used as the
// expected side of unit and acceptance checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

struct Schedule {
    std::vector<double> g, s2, mu_x0, mu_y, sigma2;
};

// Midpoint evaluation of (T - |2t - T|)^2, normalized, accumulated in long double.
inline Schedule schedule(int T, double gamma, bool regular) {
    Schedule s;
    std::vector<long double> raw(T + 1, 0.0L);
    long double total = 0.0L;
    for (int t = 1; t <= T; ++t) {
        const long double m = t - 0.5L;
        const long double d = T - std::fabs(2.0L * m - T);
        raw[t] = d * d;
        total += raw[t];
    }
    long double acc = 0.0L;
    s.g.assign(T + 1, 0.0);
    s.s2.assign(T + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        s.g[t] = static_cast<double>(raw[t] / total);
        acc += raw[t] / total;
        s.s2[t] = static_cast<double>(acc);
    }
    s.s2[T] = 1.0;
    for (int t = 0; t <= T; ++t) {
        s.mu_x0.push_back(1.0 - s.s2[t]);
        s.mu_y.push_back(s.s2[t]);
        s.sigma2.push_back(regular ? s.s2[t] * (1.0 - s.s2[t]) : gamma * std::sqrt(s.s2[t]));
    }
    return s;
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

// Posterior of u given prior u ~ N(m0, v0) and observation x = a u + c + N(0, s).
inline Moments gaussian_product(double m0, double v0, double a, double c, double s, double x) {
    if (v0 == 0.0) return {m0, 0.0};
    if (a == 0.0 || s == 0.0) {
        if (s == 0.0 && a != 0.0) return {(x - c) / a, 0.0};
        return {m0, v0};
    }
    const double prec = 1.0 / v0 + a * a / s;
    const double mean = (m0 / v0 + a * (x - c) / s) / prec;
    return {mean, 1.0 / prec};
}

// Same posterior by numerical integration: log-density on a grid over u, first
// across the prior's +-12 sd, then refined around the located mass. Simpson's rule.
inline Moments grid_posterior(double m0, double v0, double a, double c, double s, double x) {
    if (v0 == 0.0) return {m0, 0.0};
    if (s == 0.0) return a != 0.0 ? Moments{(x - c) / a, 0.0} : Moments{m0, v0};
    auto logp = [&](double u) {
        const double r = x - a * u - c;
        return -0.5 * (u - m0) * (u - m0) / v0 - 0.5 * r * r / s;
    };
    auto integrate = [&](double lo, double hi, int n) {
        const double h = (hi - lo) / n;
        double peak = -INFINITY;
        for (int i = 0; i <= n; ++i) peak = std::max(peak, logp(lo + i * h));
        long double z = 0, m1 = 0, m2 = 0;
        for (int i = 0; i <= n; ++i) {
            const double u = lo + i * h;
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            const long double p = w * std::exp(logp(u) - peak);
            z += p;
            m1 += p * u;
            m2 += p * u * u;
        }
        const double mean = static_cast<double>(m1 / z);
        return Moments{mean, static_cast<double>(m2 / z - (m1 / z) * (m1 / z))};
    };
    // Coarse window covering both the prior and the region the observation points to.
    const double sd0 = std::sqrt(v0);
    double lo = m0 - 12.0 * sd0, hi = m0 + 12.0 * sd0;
    if (std::fabs(a) > 1e-12) {
        const double centre = (x - c) / a, spread = 12.0 * std::sqrt(s) / std::fabs(a);
        if (spread < 1e6) {
            lo = std::min(lo, centre - spread);
            hi = std::max(hi, centre + spread);
        }
    }
    Moments m = integrate(lo, hi, 20000);
    for (int pass = 0; pass < 3; ++pass) {
        const double sd = std::sqrt(std::max(m.var, 1e-30));
        m = integrate(m.mean - 12.0 * sd, m.mean + 12.0 * sd, 2000);
    }
    // Second moment about the mean, which avoids cancellation in E[u^2] - E[u]^2.
    const double sd = std::sqrt(std::max(m.var, 1e-30));
    lo = m.mean - 12.0 * sd;
    hi = m.mean + 12.0 * sd;
    const int n = 4000;
    const double h = (hi - lo) / n;
    long double z = 0, c2 = 0, c1 = 0;
    const double peak = logp(m.mean);
    for (int i = 0; i <= n; ++i) {
        const double u = lo + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const long double p = w * std::exp(logp(u) - peak);
        z += p;
        c1 += p * (u - m.mean);
        c2 += p * (u - m.mean) * (u - m.mean);
    }
    const long double shift = c1 / z;
    return {m.mean + static_cast<double>(shift), static_cast<double>(c2 / z - shift * shift)};
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double relative_error(double got, double want, double floor = 1e-6) {
    return std::fabs(got - want) / std::max({std::fabs(want), std::fabs(got), floor});
}

// Mean SSIM by explicit evaluation of every fully contained window.
inline double ssim_brute(std::span<const double> a, std::span<const double> b, std::size_t H, std::size_t W,
                         int win = 11, double sigma = 1.5, double k1 = 0.01, double k2 = 0.03) {
    std::vector<double> w(static_cast<std::size_t>(win * win));
    double total = 0.0;
    const double c = (win - 1) / 2.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            w[i * win + j] = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2 * sigma * sigma));
            total += w[i * win + j];
        }
    for (double& v : w) v /= total;
    const double C1 = k1 * k1, C2 = k2 * k2;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + win <= H; ++y)
        for (std::size_t x = 0; x + win <= W; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const std::size_t p = (y + i) * W + x + j;
                    ma += w[i * win + j] * a[p];
                    mb += w[i * win + j] * b[p];
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const std::size_t p = (y + i) * W + x + j;
                    va += w[i * win + j] * (a[p] - ma) * (a[p] - ma);
                    vb += w[i * win + j] * (b[p] - mb) * (b[p] - mb);
                    cov += w[i * win + j] * (a[p] - ma) * (b[p] - mb);
                }
            sum += (2 * ma * mb + C1) * (2 * cov + C2) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            ++count;
        }
    return sum / static_cast<double>(count);
}

// Two-sided exact signed-rank p-value by enumerating all 2^n sign patterns.
// Zero differences dropped, ties receive average ranks.
inline double wilcoxon_enumerate(std::span<const double> a, std::span<const double> b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    const std::size_t n = d.size();
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        double less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::fabs(d[j]) < std::fabs(d[i])) ++less;
            if (std::fabs(d[j]) == std::fabs(d[i])) ++equal;
        }
        rank[i] = less + (equal + 1) / 2.0;
    }
    double observed = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += rank[i];
        if (d[i] > 0) observed += rank[i];
    }
    const double centre = total / 2.0;
    const double dev = std::fabs(observed - centre);
    std::uint64_t extreme = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) s += rank[i];
        if (std::fabs(s - centre) >= dev - 1e-9) ++extreme;
    }
    return static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
}

}  // namespace oracle
