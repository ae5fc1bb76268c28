#include "bridgekit/tensor.hpp"

#include <cmath>

namespace bridgekit {

std::string_view category_name(ErrorCategory c) noexcept {
    switch (c) {
        case ErrorCategory::Domain: return "domain";
        case ErrorCategory::Schedule: return "schedule";
        case ErrorCategory::Shape: return "shape";
        case ErrorCategory::Variant: return "variant";
        case ErrorCategory::Numeric: return "numeric";
        case ErrorCategory::Oracle: return "oracle";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Format: return "format";
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Usage: return "usage";
    }
    return "unknown";
}

std::string shape_string(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double l2_norm(std::span<const double> v) noexcept {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace bridgekit
