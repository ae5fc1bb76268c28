#include "bridgekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bridgekit {

std::vector<double> rescale_unit(std::span<const double> image) {
    std::vector<double> out(image.begin(), image.end());
    if (out.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double a = *lo, range = *hi - *lo;
    for (double& v : out) v = range > 0.0 ? (v - a) / range : 0.0;
    return out;
}

std::vector<double> data_range_unit(std::span<const double> values) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return 0.5 * (v + 1.0); });
    return out;
}

double psnr(std::span<const double> ref, std::span<const double> test) {
    if (ref.size() != test.size() || ref.empty()) {
        fail(ErrorCategory::Shape, "psnr: size mismatch (" + std::to_string(ref.size()) + " vs " +
                                       std::to_string(test.size()) + ")");
    }
    double se = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) se += (ref[i] - test[i]) * (ref[i] - test[i]);
    const double mse = se / static_cast<double>(ref.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> gaussian_window(int window, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(window) * window);
    const double c = (window - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
            const double v = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2.0 * sigma * sigma));
            w[i * window + j] = v;
            total += v;
        }
    for (double& v : w) v /= total;
    return w;
}

namespace {

std::vector<double> gaussian_1d(int window, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(window));
    const double c = (window - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < window; ++i) {
        w[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

// 'valid' separable filtering: output (H - k + 1) x (W - k + 1).
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H, std::size_t W,
                                 const std::vector<double>& k) {
    const std::size_t K = k.size(), Ho = H - K + 1, Wo = W - K + 1;
    std::vector<double> rows(H * Wo, 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
            double acc = 0.0;
            for (std::size_t j = 0; j < K; ++j) acc += k[j] * img[y * W + x + j];
            rows[y * Wo + x] = acc;
        }
    std::vector<double> out(Ho * Wo, 0.0);
    for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < K; ++i) acc += k[i] * rows[(y + i) * Wo + x];
            out[y * Wo + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const ImageView& ref, const ImageView& test, const SsimParams& params) {
    if (ref.height != test.height || ref.width != test.width || ref.pixels.size() != test.pixels.size() ||
        ref.pixels.size() != ref.height * ref.width) {
        fail(ErrorCategory::Shape, "ssim: image size mismatch");
    }
    const auto K = static_cast<std::size_t>(params.window);
    if (ref.height < K || ref.width < K) {
        fail(ErrorCategory::Shape, "ssim: image " + std::to_string(ref.height) + "x" + std::to_string(ref.width) +
                                       " smaller than window " + std::to_string(K));
    }
    const std::size_t H = ref.height, W = ref.width, n = H * W;
    const auto k = gaussian_1d(params.window, params.sigma);
    std::vector<double> x(ref.pixels.begin(), ref.pixels.end()), y(test.pixels.begin(), test.pixels.end());
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, H, W, k), my = filter_valid(y, H, W, k);
    const auto fxx = filter_valid(xx, H, W, k), fyy = filter_valid(yy, H, W, k), fxy = filter_valid(xy, H, W, k);
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = fxx[i] - mx[i] * mx[i], vy = fyy[i] - my[i] * my[i], cxy = fxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

double ssim_channels(std::span<const double> ref, std::span<const double> test, std::size_t channels,
                     std::size_t height, std::size_t width, const SsimParams& params) {
    const std::size_t plane = height * width;
    if (ref.size() != channels * plane || test.size() != channels * plane) {
        fail(ErrorCategory::Shape, "ssim_channels: size mismatch");
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
        acc += ssim({ref.subspan(c * plane, plane), height, width}, {test.subspan(c * plane, plane), height, width},
                    params);
    }
    return acc / static_cast<double>(channels);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
    if (a.size() != b.size()) fail(ErrorCategory::Shape, "wilcoxon: paired samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = a[i] - b[i];
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) fail(ErrorCategory::Domain, "wilcoxon: all differences are zero");
    if (d.size() < 5) {
        fail(ErrorCategory::Domain, "wilcoxon: need at least 5 nonzero differences, got " + std::to_string(d.size()));
    }
    const std::size_t n = d.size();

    // Average ranks of |d|, kept doubled so tied ranks stay integral.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const long r2 = static_cast<long>(i + 1 + j + 1);  // 2 x average rank
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0) w2 += rank2[i];
    }

    WilcoxonResult r;
    r.n = n;
    r.w_plus = w2 / 2.0;
    const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && n <= 20);
    r.exact = exact;
    if (exact) {
        // Null distribution of the doubled statistic over all 2^n sign assignments.
        long total2 = 0;
        for (long v : rank2) total2 += v;
        std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
        ways[0] = 1.0;
        for (long v : rank2) {
            for (long s = total2; s >= v; --s) ways[s] += ways[s - v];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double lower = 0.0, upper = 0.0;
        for (long s = 0; s <= total2; ++s) {
            if (s <= w2) lower += ways[s];
            if (s >= w2) upper += ways[s];
        }
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    } else {
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        const double diff = r.w_plus - mean;
        // continuity correction toward the mean
        const double z = (std::abs(diff) - 0.5 > 0.0 ? std::abs(diff) - 0.5 : 0.0) / std::sqrt(var);
        r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    }
    return r;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return s;
}

MetricReport evaluate_batch(const TensorBatch& ref, const TensorBatch& test, Normalization norm) {
    require_same_shape(ref.shape(), test.shape(), "evaluate_batch");
    if (ref.rank() != 2 && ref.rank() != 4) {
        fail(ErrorCategory::Shape, "evaluate_batch: expected (N, d) or (N, C, H, W), got " + shape_string(ref.shape()));
    }
    auto unit = [norm](std::span<const double> v) {
        return norm == Normalization::PerImage ? rescale_unit(v) : data_range_unit(v);
    };
    MetricReport rep;
    double pooled_se = 0.0;
    for (std::size_t i = 0; i < ref.batch(); ++i) {
        const auto r = unit(ref.row(i));
        const auto t = unit(test.row(i));
        rep.psnr.push_back(psnr(r, t));
        for (std::size_t k = 0; k < r.size(); ++k) pooled_se += (r[k] - t[k]) * (r[k] - t[k]);
        if (ref.rank() == 4) rep.ssim.push_back(ssim_channels(r, t, ref.dim(1), ref.dim(2), ref.dim(3)));
    }
    if (ref.numel() > 0) {
        const double mse = pooled_se / static_cast<double>(ref.numel());
        rep.aggregate_psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
    }
    rep.psnr_summary = summarize(rep.psnr);
    rep.ssim_summary = summarize(rep.ssim);
    return rep;
}

}  // namespace bridgekit
