#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bridgekit/tensor.hpp"

namespace bridgekit {

// ---------------------------------------------------------------------------
// Tensor container: "BRTK1\0", u32 rank, rank x u64 dims, u8 dtype
// (0 = float64 LE, 1 = float32 LE), row-major payload.

enum class DType : std::uint8_t { Float64 = 0, Float32 = 1 };

void write_tensor(std::ostream& out, const Tensor& t, DType dtype = DType::Float64);
Tensor read_tensor(std::istream& in, DType* dtype_out = nullptr);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::Float64);
Tensor load_tensor(const std::filesystem::path& path, DType* dtype_out = nullptr);

// ---------------------------------------------------------------------------
// Synthetic paired translation tasks

enum class Task { Gauss2Gauss, Shapes16 };

std::string_view task_name(Task t) noexcept;
Task parse_task(std::string_view name);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct PairedDataset {
    Task task = Task::Gauss2Gauss;
    TensorBatch x0;            // target
    TensorBatch y;             // source
    std::vector<Split> split;  // one tag per pair

    std::vector<std::size_t> indices(Split s) const;
    // Rows of x0 and y for the given split, in index order.
    std::pair<TensorBatch, TensorBatch> subset(Split s) const;
};

// Deterministic pair generation. Split: first 80% train, next 10% val, rest test.
PairedDataset make_synthetic_pairs(Task task, std::size_t n, std::uint64_t seed);

// Source rendition for gauss2gauss: tanh(1.5 R(35 deg) x).
std::pair<double, double> gauss2gauss_source(double x, double y);

// Gathers the listed rows of a batch.
TensorBatch gather_rows(const TensorBatch& t, const std::vector<std::size_t>& rows);

// Scales to mean 1, then maps the global min/max affinely onto [-1, 1].
TensorBatch normalize_volume(const TensorBatch& raw);

// Dataset bundle on disk: <stem>.x0.brtk, <stem>.y.brtk, <stem>.split.brtk.
void save_dataset(const std::filesystem::path& stem, const PairedDataset& ds);
PairedDataset load_dataset(const std::filesystem::path& stem);

}  // namespace bridgekit
