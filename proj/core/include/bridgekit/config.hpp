#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "bridgekit/data.hpp"
#include "bridgekit/nets.hpp"
#include "bridgekit/sampler.hpp"
#include "bridgekit/schedule.hpp"

namespace bridgekit {

struct TrainConfig {
    double lambda1 = 1.0;  // l1 weight
    double lambda2 = 1.0;  // gradient-penalty weight
    double lr = 1e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.9;
    double adam_eps = 1e-8;
    long steps = 0;   // total optimizer steps; when 0, epochs decides
    long epochs = 50;
    int batch_size = 64;
    int r_train = 2;
    double self_cond_prob = 0.5;
    bool no_soft_prior = false;
    bool no_source_guidance = false;
    bool no_self_consistency = false;

    void validate() const;
    int effective_r_train() const { return no_self_consistency ? 1 : r_train; }
};

// Every knob of a run. Serialized as a flat "key = value" text file.
struct ExperimentConfig {
    Task task = Task::Gauss2Gauss;
    long n_pairs = 2000;
    std::string data;  // dataset stem; empty => generate from task, n_pairs, seed
    ScheduleConfig schedule;
    NetConfig net;
    TrainConfig train;
    SamplerOptions sampler;
    std::uint64_t seed = 0;
    long checkpoint_every = 0;  // 0 => final checkpoint only
    long log_every = 1;
    std::string out_dir = "run";

    void validate() const;

    // Variant actually used, after the no_soft_prior ablation.
    ScheduleConfig effective_schedule() const;
    // Sampler options after the no_self_consistency ablation.
    SamplerOptions effective_sampler() const;
};

// Applies one key; throws ErrorCategory::Config naming the key when unknown or malformed.
void set_config_key(ExperimentConfig& cfg, std::string_view key, std::string_view value);

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved config, one key per line, in documentation order.
std::string format_config(const ExperimentConfig& cfg);

// "key  description" lines for usage messages.
std::string config_key_docs();

}  // namespace bridgekit
