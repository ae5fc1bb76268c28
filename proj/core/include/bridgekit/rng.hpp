#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bridgekit {

// Tags separating independent uses of randomness. Values are part of the
// reproducibility contract; append new tags, never renumber.
enum class Purpose : std::uint64_t {
    ForwardMarginal = 1,
    ForwardStep = 2,
    Endpoint = 3,
    Posterior = 4,
    TrainTimestep = 5,
    TrainRealPrev = 6,
    TrainRealStep = 7,
    TrainSelfCond = 8,
    TrainBatch = 9,
    Init = 10,
    Dataset = 11,
};

std::uint64_t mix64(std::uint64_t x) noexcept;

// Source of standard-normal draws. Every (sample, timestep, purpose) triple maps
// to its own substream, so the order in which draws are requested never changes
// their values. A zero source returns exact zeros and is used for noiseless paths.
class Noise {
  public:
    explicit Noise(std::uint64_t seed) : seed_(seed) {}
    static Noise zero() {
        Noise n(0);
        n.zero_ = true;
        return n;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    bool is_zero() const noexcept { return zero_; }

    // Child source for an independent context (a training step, a run index).
    Noise fork(std::uint64_t key) const;

    std::mt19937_64 engine(std::uint64_t sample, std::uint64_t t, Purpose purpose) const;

    void fill_normal(std::span<double> out, std::uint64_t sample, std::uint64_t t, Purpose purpose) const;

  private:
    std::uint64_t seed_;
    bool zero_ = false;
};

}  // namespace bridgekit
