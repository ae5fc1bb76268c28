#include "bridgekit/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "bridgekit/rng.hpp"

namespace bridgekit {

namespace {

constexpr std::array<char, 6> kMagic = {'B', 'R', 'T', 'K', '1', '\0'};
constexpr std::uint32_t kMaxRank = 16;

template <class U>
U to_little(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        U r{};
        auto* src = reinterpret_cast<const unsigned char*>(&v);
        auto* dst = reinterpret_cast<unsigned char*>(&r);
        for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
        return r;
    } else {
        return v;
    }
}

template <class U>
void put(std::ostream& out, U v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get(std::istream& in, const char* what) {
    U v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (in.gcount() != static_cast<std::streamsize>(sizeof v)) {
        fail(ErrorCategory::Format, std::string("truncated container while reading ") + what);
    }
    return to_little(v);
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t, DType dtype) {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    if (dtype == DType::Float64) {
        for (double v : t.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
        for (double v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) fail(ErrorCategory::Io, "failed writing tensor container");
}

Tensor read_tensor(std::istream& in, DType* dtype_out) {
    std::array<char, 6> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
        fail(ErrorCategory::Format, "bad container magic (expected \"BRTK1\\0\")");
    }
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank > kMaxRank) fail(ErrorCategory::Format, "container rank " + std::to_string(rank) + " exceeds 16");
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
        const auto v = get<std::uint64_t>(in, "dims");
        if (v != 0 && count > std::numeric_limits<std::uint64_t>::max() / v) {
            fail(ErrorCategory::Format, "container shape overflows");
        }
        count *= v;
        d = static_cast<std::size_t>(v);
    }
    const auto tag = get<std::uint8_t>(in, "dtype");
    if (tag > 1) fail(ErrorCategory::Format, "unknown dtype tag " + std::to_string(tag));
    const auto dtype = static_cast<DType>(tag);
    if (dtype_out) *dtype_out = dtype;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
    for (std::uint64_t i = 0; i < count; ++i) {
        if (dtype == DType::Float64) {
            data.push_back(std::bit_cast<double>(get<std::uint64_t>(in, "payload")));
        } else {
            data.push_back(static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(in, "payload"))));
        }
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::Io, "cannot open '" + path.string() + "' for writing");
    write_tensor(out, t, dtype);
    out.close();
    if (!out) fail(ErrorCategory::Io, "failed writing '" + path.string() + "'");
}

Tensor load_tensor(const std::filesystem::path& path, DType* dtype_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open '" + path.string() + "' for reading");
    try {
        Tensor t = read_tensor(in, dtype_out);
        if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCategory::Format, "trailing bytes after payload");
        return t;
    } catch (const Error& e) {
        fail(e.category(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

std::string_view task_name(Task t) noexcept { return t == Task::Gauss2Gauss ? "gauss2gauss" : "shapes16"; }

Task parse_task(std::string_view name) {
    if (name == "gauss2gauss") return Task::Gauss2Gauss;
    if (name == "shapes16") return Task::Shapes16;
    fail(ErrorCategory::Config, "unknown task '" + std::string(name) + "' (expected gauss2gauss|shapes16)");
}

std::vector<std::size_t> PairedDataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == s) out.push_back(i);
    }
    return out;
}

TensorBatch gather_rows(const TensorBatch& t, const std::vector<std::size_t>& rows) {
    Shape shape = t.shape();
    shape[0] = rows.size();
    TensorBatch out(shape);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto src = t.row(rows[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

std::pair<TensorBatch, TensorBatch> PairedDataset::subset(Split s) const {
    const auto idx = indices(s);
    return {gather_rows(x0, idx), gather_rows(y, idx)};
}

std::pair<double, double> gauss2gauss_source(double x, double y) {
    const double angle = 35.0 * std::numbers::pi / 180.0;
    const double c = std::cos(angle), s = std::sin(angle);
    return {std::tanh(1.5 * (c * x - s * y)), std::tanh(1.5 * (s * x + c * y))};
}

namespace {

void make_gauss2gauss(PairedDataset& ds, std::size_t n, const Noise& noise) {
    // Two well-separated components; draws are clipped into the data range.
    constexpr double kMeans[2][2] = {{-0.45, -0.3}, {0.45, 0.35}};
    constexpr double kStd = 0.15;
    ds.x0 = TensorBatch({n, 2});
    ds.y = TensorBatch({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        auto gen = noise.engine(i, 0, Purpose::Dataset);
        std::uniform_int_distribution<int> pick(0, 1);
        std::normal_distribution<double> normal(0.0, 1.0);
        const int k = pick(gen);
        const double a = std::clamp(kMeans[k][0] + kStd * normal(gen), -1.0, 1.0);
        const double b = std::clamp(kMeans[k][1] + kStd * normal(gen), -1.0, 1.0);
        const auto [u, v] = gauss2gauss_source(a, b);
        ds.x0[2 * i] = a;
        ds.x0[2 * i + 1] = b;
        ds.y[2 * i] = u;
        ds.y[2 * i + 1] = v;
    }
}

void make_shapes16(PairedDataset& ds, std::size_t n, const Noise& noise) {
    constexpr int kSide = 16;
    // Intensities stay clear of +-1: a tanh head can only approach those
    // asymptotically, and an l1 target sitting there drives it into saturation.
    constexpr double kBackground = -0.8;
    ds.x0 = TensorBatch({n, 1, kSide, kSide}, kBackground);
    ds.y = TensorBatch({n, 1, kSide, kSide});
    for (std::size_t i = 0; i < n; ++i) {
        auto gen = noise.engine(i, 0, Purpose::Dataset);
        std::uniform_int_distribution<int> count(1, 3);
        std::uniform_int_distribution<int> kind(0, 1);
        std::uniform_real_distribution<double> centre(3.0, 12.0);
        std::uniform_real_distribution<double> extent(1.5, 5.0);
        std::uniform_real_distribution<double> level(-0.2, 0.8);
        auto img = ds.x0.row(i);
        const int shapes = count(gen);
        for (int s = 0; s < shapes; ++s) {
            const bool ellipse = kind(gen) == 1;
            const double cx = centre(gen), cy = centre(gen), rx = extent(gen), ry = extent(gen);
            const double value = level(gen);
            for (int py = 0; py < kSide; ++py)
                for (int px = 0; px < kSide; ++px) {
                    const double dx = (px + 0.5 - cx) / rx, dy = (py + 0.5 - cy) / ry;
                    const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                    if (inside) img[py * kSide + px] = value;
                }
        }
        // Source modality: inverted intensities, 3x3 box blur with clamped borders.
        auto src = ds.y.row(i);
        for (int py = 0; py < kSide; ++py)
            for (int px = 0; px < kSide; ++px) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int qy = std::clamp(py + dy, 0, kSide - 1), qx = std::clamp(px + dx, 0, kSide - 1);
                        acc += -img[qy * kSide + qx];
                    }
                src[py * kSide + px] = acc / 9.0;
            }
    }
}

}  // namespace

PairedDataset make_synthetic_pairs(Task task, std::size_t n, std::uint64_t seed) {
    if (n == 0) fail(ErrorCategory::Domain, "make_synthetic_pairs: n must be >= 1");
    PairedDataset ds;
    ds.task = task;
    const Noise noise(seed);
    if (task == Task::Gauss2Gauss) {
        make_gauss2gauss(ds, n, noise);
    } else {
        make_shapes16(ds, n, noise);
    }
    ds.split.resize(n);
    const std::size_t n_train = (n * 8) / 10, n_val = n / 10;
    for (std::size_t i = 0; i < n; ++i) {
        ds.split[i] = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    }
    return ds;
}

TensorBatch normalize_volume(const TensorBatch& raw) {
    if (raw.empty()) fail(ErrorCategory::Domain, "normalize_volume: empty input");
    if (!all_finite(raw.data())) fail(ErrorCategory::Numeric, "normalize_volume: non-finite input");
    double sum = 0.0;
    for (double v : raw.data()) sum += v;
    const double mean = sum / static_cast<double>(raw.numel());
    if (!(mean > 0.0)) fail(ErrorCategory::Domain, "normalize_volume: mean intensity must be positive");
    TensorBatch out = raw;
    for (double& v : out.data()) v /= mean;
    const auto [lo_it, hi_it] = std::minmax_element(out.data().begin(), out.data().end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) fail(ErrorCategory::Domain, "normalize_volume: constant input has zero range");
    for (double& v : out.data()) v = 2.0 * (v - lo) / (hi - lo) - 1.0;
    return out;
}

void save_dataset(const std::filesystem::path& stem, const PairedDataset& ds) {
    Tensor tags({ds.split.size()});
    for (std::size_t i = 0; i < ds.split.size(); ++i) tags[i] = static_cast<double>(ds.split[i]);
    save_tensor(stem.string() + ".x0.brtk", ds.x0);
    save_tensor(stem.string() + ".y.brtk", ds.y);
    save_tensor(stem.string() + ".split.brtk", tags);
}

PairedDataset load_dataset(const std::filesystem::path& stem) {
    PairedDataset ds;
    ds.x0 = load_tensor(stem.string() + ".x0.brtk");
    ds.y = load_tensor(stem.string() + ".y.brtk");
    const Tensor tags = load_tensor(stem.string() + ".split.brtk");
    require_same_shape(ds.x0.shape(), ds.y.shape(), "dataset x0/y");
    if (tags.numel() != ds.x0.batch()) fail(ErrorCategory::Format, "dataset split tags do not match pair count");
    ds.task = ds.x0.rank() == 2 ? Task::Gauss2Gauss : Task::Shapes16;
    for (double v : tags.data()) {
        if (v != 0.0 && v != 1.0 && v != 2.0) fail(ErrorCategory::Format, "invalid split tag");
        ds.split.push_back(static_cast<Split>(static_cast<int>(v)));
    }
    return ds;
}

}  // namespace bridgekit
