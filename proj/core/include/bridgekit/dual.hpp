#pragma once

#include <cmath>

namespace bridgekit {

// Forward-mode dual number v + d·ε with ε² = 0. Running the reverse-mode graph
// over Dual yields directional derivatives of gradients (Hessian-vector products).
struct Dual {
    double v = 0.0;
    double d = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
    constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

    constexpr Dual& operator+=(const Dual& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    constexpr Dual& operator-=(const Dual& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    constexpr Dual& operator*=(const Dual& o) {
        d = d * o.v + v * o.d;
        v *= o.v;
        return *this;
    }
};

constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
constexpr Dual operator/(const Dual& a, const Dual& b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
constexpr bool operator==(const Dual& a, const Dual& b) { return a.v == b.v && a.d == b.d; }

inline Dual exp(const Dual& a) {
    const double e = std::exp(a.v);
    return {e, e * a.d};
}
inline Dual tanh(const Dual& a) {
    const double th = std::tanh(a.v);
    return {th, (1.0 - th * th) * a.d};
}
inline Dual sqrt(const Dual& a) {
    const double s = std::sqrt(a.v);
    return {s, a.d / (2.0 * s)};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

}  // namespace bridgekit
