#include "bridgekit/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace bridgekit {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    fail(ErrorCategory::Config,
         "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "' (expected " + expected + ")");
}

double to_double(std::string_view key, std::string_view v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(std::string(v), &used);
        if (used != v.size()) bad_value(key, v, "a number");
        return d;
    } catch (const std::logic_error&) {
        bad_value(key, v, "a number");
    }
}

template <class I>
I to_integer(std::string_view key, std::string_view v) {
    I out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "true|false");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Key {
    const char* name;
    const char* doc;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        {"task", "synthetic task: gauss2gauss | shapes16",
         [](auto& c, auto v) { c.task = parse_task(v); }, [](auto& c) { return std::string(task_name(c.task)); }},
        {"n_pairs", "number of generated pairs (80/10/10 split)",
         [](auto& c, auto v) { c.n_pairs = to_integer<long>("n_pairs", v); },
         [](auto& c) { return std::to_string(c.n_pairs); }},
        {"data", "dataset stem written by 'data make' (empty: generate in memory)",
         [](auto& c, auto v) { c.data = std::string(v); }, [](auto& c) { return c.data; }},
        {"T", "number of diffusion steps",
         [](auto& c, auto v) { c.schedule.T = to_integer<int>("T", v); },
         [](auto& c) { return std::to_string(c.schedule.T); }},
        {"gamma", "end-point noise variance of the soft-prior schedule",
         [](auto& c, auto v) { c.schedule.gamma = to_double("gamma", v); },
         [](auto& c) { return fmt_double(c.schedule.gamma); }},
        {"variant", "noise schedule: selfrdb | regular",
         [](auto& c, auto v) { c.schedule.variant = parse_variant(v); },
         [](auto& c) { return std::string(variant_name(c.schedule.variant)); }},
        {"net", "network kind: mlp | tiny_unet",
         [](auto& c, auto v) { c.net.kind = parse_net_kind(v); },
         [](auto& c) { return std::string(net_kind_name(c.net.kind)); }},
        {"width", "mlp hidden width", [](auto& c, auto v) { c.net.width = to_integer<int>("width", v); },
         [](auto& c) { return std::to_string(c.net.width); }},
        {"depth", "mlp hidden layers", [](auto& c, auto v) { c.net.depth = to_integer<int>("depth", v); },
         [](auto& c) { return std::to_string(c.net.depth); }},
        {"base_channels", "tiny_unet channels at full resolution",
         [](auto& c, auto v) { c.net.base_channels = to_integer<int>("base_channels", v); },
         [](auto& c) { return std::to_string(c.net.base_channels); }},
        {"time_embed_dim", "sinusoidal time encoding size (even)",
         [](auto& c, auto v) { c.net.time_embed_dim = to_integer<int>("time_embed_dim", v); },
         [](auto& c) { return std::to_string(c.net.time_embed_dim); }},
        {"lambda1", "l1 loss weight", [](auto& c, auto v) { c.train.lambda1 = to_double("lambda1", v); },
         [](auto& c) { return fmt_double(c.train.lambda1); }},
        {"lambda2", "gradient penalty weight", [](auto& c, auto v) { c.train.lambda2 = to_double("lambda2", v); },
         [](auto& c) { return fmt_double(c.train.lambda2); }},
        {"lr", "Adam learning rate", [](auto& c, auto v) { c.train.lr = to_double("lr", v); },
         [](auto& c) { return fmt_double(c.train.lr); }},
        {"adam_beta1", "Adam first-moment decay",
         [](auto& c, auto v) { c.train.adam_beta1 = to_double("adam_beta1", v); },
         [](auto& c) { return fmt_double(c.train.adam_beta1); }},
        {"adam_beta2", "Adam second-moment decay",
         [](auto& c, auto v) { c.train.adam_beta2 = to_double("adam_beta2", v); },
         [](auto& c) { return fmt_double(c.train.adam_beta2); }},
        {"adam_eps", "Adam denominator guard", [](auto& c, auto v) { c.train.adam_eps = to_double("adam_eps", v); },
         [](auto& c) { return fmt_double(c.train.adam_eps); }},
        {"steps", "optimizer steps (0: use epochs)",
         [](auto& c, auto v) { c.train.steps = to_integer<long>("steps", v); },
         [](auto& c) { return std::to_string(c.train.steps); }},
        {"epochs", "passes over the training split when steps = 0",
         [](auto& c, auto v) { c.train.epochs = to_integer<long>("epochs", v); },
         [](auto& c) { return std::to_string(c.train.epochs); }},
        {"batch_size", "pairs per optimizer step",
         [](auto& c, auto v) { c.train.batch_size = to_integer<int>("batch_size", v); },
         [](auto& c) { return std::to_string(c.train.batch_size); }},
        {"r_train", "generator recursions per training step",
         [](auto& c, auto v) { c.train.r_train = to_integer<int>("r_train", v); },
         [](auto& c) { return std::to_string(c.train.r_train); }},
        {"self_cond_prob", "probability that the graded recursion sees the detached estimate",
         [](auto& c, auto v) { c.train.self_cond_prob = to_double("self_cond_prob", v); },
         [](auto& c) { return fmt_double(c.train.self_cond_prob); }},
        {"no_soft_prior", "ablation: regular bridge schedule",
         [](auto& c, auto v) { c.train.no_soft_prior = to_bool("no_soft_prior", v); },
         [](auto& c) { return std::string(c.train.no_soft_prior ? "true" : "false"); }},
        {"no_source_guidance", "ablation: generator receives zeros instead of the source",
         [](auto& c, auto v) { c.train.no_source_guidance = to_bool("no_source_guidance", v); },
         [](auto& c) { return std::string(c.train.no_source_guidance ? "true" : "false"); }},
        {"no_self_consistency", "ablation: one generator call per step",
         [](auto& c, auto v) { c.train.no_self_consistency = to_bool("no_self_consistency", v); },
         [](auto& c) { return std::string(c.train.no_self_consistency ? "true" : "false"); }},
        {"rel_tol", "sampler recursion convergence threshold",
         [](auto& c, auto v) { c.sampler.rel_tol = to_double("rel_tol", v); },
         [](auto& c) { return fmt_double(c.sampler.rel_tol); }},
        {"r_max", "sampler recursion cap", [](auto& c, auto v) { c.sampler.r_max = to_integer<int>("r_max", v); },
         [](auto& c) { return std::to_string(c.sampler.r_max); }},
        {"seed", "master seed", [](auto& c, auto v) { c.seed = to_integer<std::uint64_t>("seed", v); },
         [](auto& c) { return std::to_string(c.seed); }},
        {"checkpoint_every", "steps between periodic checkpoints (0: final only)",
         [](auto& c, auto v) { c.checkpoint_every = to_integer<long>("checkpoint_every", v); },
         [](auto& c) { return std::to_string(c.checkpoint_every); }},
        {"log_every", "steps between metrics log rows",
         [](auto& c, auto v) { c.log_every = to_integer<long>("log_every", v); },
         [](auto& c) { return std::to_string(c.log_every); }},
        {"out_dir", "output directory", [](auto& c, auto v) { c.out_dir = std::string(v); },
         [](auto& c) { return c.out_dir; }},
    };
    return table;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail(ErrorCategory::Config, "lambda1 and lambda2 must be >= 0");
    if (!(lr > 0.0)) fail(ErrorCategory::Config, "lr must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        fail(ErrorCategory::Config, "Adam betas must lie in [0, 1)");
    }
    if (batch_size < 1) fail(ErrorCategory::Config, "batch_size must be >= 1");
    if (r_train < 1) fail(ErrorCategory::Config, "r_train must be >= 1");
    if (!(self_cond_prob >= 0.0 && self_cond_prob <= 1.0)) fail(ErrorCategory::Config, "self_cond_prob must lie in [0, 1]");
    if (steps < 0 || epochs < 0 || (steps == 0 && epochs == 0)) {
        fail(ErrorCategory::Config, "set steps > 0 or epochs > 0");
    }
}

void ExperimentConfig::validate() const {
    if (n_pairs < 1) fail(ErrorCategory::Config, "n_pairs must be >= 1");
    schedule.validate();
    net.validate();
    train.validate();
    sampler.validate();
    if (checkpoint_every < 0 || log_every < 1) fail(ErrorCategory::Config, "checkpoint_every >= 0 and log_every >= 1");
}

ScheduleConfig ExperimentConfig::effective_schedule() const {
    ScheduleConfig s = schedule;
    if (train.no_soft_prior) s.variant = Variant::RegularBridge;
    return s;
}

SamplerOptions ExperimentConfig::effective_sampler() const {
    SamplerOptions o = sampler;
    if (train.no_self_consistency) o.r_max = 1;
    return o;
}

void set_config_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& k : keys()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    fail(ErrorCategory::Config, "unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCategory::Config, "line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        set_config_key(cfg, trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::Io, "cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    return out;
}

std::string config_key_docs() {
    std::string out;
    for (const auto& k : keys()) {
        std::string name = k.name;
        name.resize(std::max<std::size_t>(name.size() + 2, 22), ' ');
        out += "  " + name + k.doc + "\n";
    }
    return out;
}

}  // namespace bridgekit
