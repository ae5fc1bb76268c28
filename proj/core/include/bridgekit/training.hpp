#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bridgekit/config.hpp"
#include "bridgekit/data.hpp"
#include "bridgekit/nets.hpp"
#include "bridgekit/sampler.hpp"
#include "bridgekit/schedule.hpp"

namespace bridgekit {

// Numerically stable log(1 + e^x).
double softplus(double x) noexcept;

// lambda1 mean|x0 - x0_star| - mean log sigmoid(logits_fake).
double generator_loss(const TensorBatch& x0, const TensorBatch& x0_star, std::span<const double> logits_fake,
                      double lambda1);

// mean[-log sigmoid(real)] + mean[-log(1 - sigmoid(fake))] + lambda2 mean[grad_real_norm2].
double discriminator_loss(std::span<const double> logits_real, std::span<const double> logits_fake,
                          std::span<const double> grad_real_norm2, double lambda2);

struct AdamState {
    ParamGrads m;
    ParamGrads v;
    std::uint64_t steps = 0;
};

AdamState make_adam(const ParamSet& params);
void adam_step(ParamSet& params, const ParamGrads& grads, AdamState& state, const TrainConfig& cfg);

struct RunningStats {
    double l1_ema = 0.0;
    double loss_g_ema = 0.0;
    double loss_d_ema = 0.0;
    double recursions_total = 0.0;
};

struct TrainState {
    GeneratorNet generator;
    DiscriminatorNet discriminator;
    AdamState adam_g;
    AdamState adam_d;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    RunningStats stats;
};

TrainState init_train_state(const NetConfig& net, const Shape& sample_shape, std::uint64_t seed);

struct StepStats {
    double loss_g = 0.0;
    double loss_d = 0.0;
    double l1 = 0.0;
    double gp = 0.0;
    double recursions_mean = 0.0;
};

// One discriminator update followed by one generator update on a batch of
// (target x0, source y) pairs. Randomness derives from (state.seed, state.step).
StepStats train_step(TrainState& state, const TensorBatch& x0, const TensorBatch& y, const ScheduleTable& table,
                     const TrainConfig& cfg);

// Generator view used by the sampler; substitutes zeros for the source when
// source guidance is ablated.
class NetGenerator final : public Generator {
  public:
    NetGenerator(const GeneratorNet& net, bool zero_source) : net_(net), zero_source_(zero_source) {}
    TensorBatch estimate(const TensorBatch& x_t, int t, const TensorBatch& y,
                         const TensorBatch& x0_prev) const override;

  private:
    const GeneratorNet& net_;
    bool zero_source_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "BRCK1\0", u32 + config text, u32 rank + u64 dims (sample shape),
// u64 step, u64 seed, 4 x f64 running stats, u64 Adam steps (G, D),
// u32 tensor count, then per tensor u32 name length, name, tensor container.

struct Checkpoint {
    ExperimentConfig config;
    TrainState state;
};

void write_checkpoint(std::ostream& out, const ExperimentConfig& cfg, const TrainState& state);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics_log;
    std::vector<StepStats> history;  // one entry per step run in this call
};

// Total optimizer steps implied by the config for a training split of n pairs.
long planned_steps(const TrainConfig& cfg, std::size_t n_train);

// Runs the training loop over the train split. With resume set, continues from
// that state; the result is bit-identical to an uninterrupted run.
TrainResult train(const ExperimentConfig& cfg, const PairedDataset& dataset,
                  const std::optional<Checkpoint>& resume = std::nullopt);

// Reverse-chain synthesis for a batch of sources with a trained generator.
SampleResult synthesize(const GeneratorNet& net, const TensorBatch& y, const ScheduleTable& table,
                        const SamplerOptions& opts, bool zero_source);

}  // namespace bridgekit
