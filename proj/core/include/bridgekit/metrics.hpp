#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bridgekit/tensor.hpp"

namespace bridgekit {

// Single-channel image view, row-major.
struct ImageView {
    std::span<const double> pixels;
    std::size_t height = 0;
    std::size_t width = 0;
};

// Per-image min/max rescaling onto [0, 1]; a constant image maps to zeros.
std::vector<double> rescale_unit(std::span<const double> image);

// Affine map of the data range [-1, 1] onto [0, 1].
std::vector<double> data_range_unit(std::span<const double> values);

// 10 log10(1 / MSE) for inputs already in [0, 1]; +infinity for identical inputs.
double psnr(std::span<const double> ref, std::span<const double> test);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

// Mean SSIM over all fully contained Gaussian windows.
double ssim(const ImageView& ref, const ImageView& test, const SsimParams& params = {});

// SSIM averaged over the channels of a (C, H, W) sample.
double ssim_channels(std::span<const double> ref, std::span<const double> test, std::size_t channels,
                     std::size_t height, std::size_t width, const SsimParams& params = {});

// Normalized Gaussian window weights, window x window, row-major.
std::vector<double> gaussian_window(int window, double sigma);

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
    double p_value = 1.0;
    double w_plus = 0.0;   // sum of ranks of positive differences
    std::size_t n = 0;     // nonzero differences
    bool exact = false;
};

// Two-sided paired test. Zero differences are dropped; ties get average ranks.
// Auto uses the exact null distribution for n <= 20 and the tie-corrected
// normal approximation above that.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
};
Summary summarize(std::span<const double> values);

struct MetricReport {
    std::vector<double> psnr;
    std::vector<double> ssim;  // empty for vector-valued samples
    Summary psnr_summary;
    Summary ssim_summary;
    std::optional<double> aggregate_psnr;  // PSNR of the pooled error over all samples
    std::optional<double> p_value;
};

enum class Normalization { PerImage, DataRange };

// Per-sample metrics for batches of shape (N, C, H, W) or (N, d).
MetricReport evaluate_batch(const TensorBatch& ref, const TensorBatch& test, Normalization norm);

}  // namespace bridgekit
