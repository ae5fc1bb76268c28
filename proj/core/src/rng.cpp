#include "bridgekit/rng.hpp"

#include <algorithm>

namespace bridgekit {

std::uint64_t mix64(std::uint64_t x) noexcept {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Noise Noise::fork(std::uint64_t key) const {
    Noise child(mix64(seed_ ^ mix64(key + 0x632be59bd9b4e019ULL)));
    child.zero_ = zero_;
    return child;
}

std::mt19937_64 Noise::engine(std::uint64_t sample, std::uint64_t t, Purpose purpose) const {
    std::uint64_t h = mix64(seed_);
    h = mix64(h ^ sample);
    h = mix64(h ^ (t * 0xd6e8feb86659fd93ULL));
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    return std::mt19937_64(h);
}

void Noise::fill_normal(std::span<double> out, std::uint64_t sample, std::uint64_t t, Purpose purpose) const {
    if (zero_) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    auto gen = engine(sample, t, purpose);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out) v = normal(gen);
}

}  // namespace bridgekit
