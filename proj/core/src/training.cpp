#include "bridgekit/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bridgekit/forward.hpp"
#include "bridgekit/posterior.hpp"
#include "bridgekit/rng.hpp"

namespace bridgekit {

double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void require_finite(const ParamGrads& grads, const ParamSet& params, const char* net, std::uint64_t step) {
    for (std::size_t p = 0; p < grads.size(); ++p) {
        if (!all_finite(grads[p].data())) {
            fail(ErrorCategory::Numeric, std::string(net) + " gradient '" + params.name(p) +
                                             "' is not finite at step " + std::to_string(step));
        }
    }
}

void require_finite(double loss, const char* what, std::uint64_t step) {
    if (!std::isfinite(loss)) {
        fail(ErrorCategory::Numeric, std::string(what) + " = " + std::to_string(loss) + " at step " + std::to_string(step));
    }
}

double unit_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

}  // namespace

double generator_loss(const TensorBatch& x0, const TensorBatch& x0_star, std::span<const double> logits_fake,
                      double lambda1) {
    require_same_shape(x0.shape(), x0_star.shape(), "generator_loss");
    double l1 = 0.0;
    for (std::size_t k = 0; k < x0.numel(); ++k) l1 += std::abs(x0[k] - x0_star[k]);
    l1 /= static_cast<double>(std::max<std::size_t>(1, x0.numel()));
    double adv = 0.0;
    for (double l : logits_fake) adv += softplus(-l);
    adv /= static_cast<double>(std::max<std::size_t>(1, logits_fake.size()));
    return lambda1 * l1 + adv;
}

double discriminator_loss(std::span<const double> logits_real, std::span<const double> logits_fake,
                          std::span<const double> grad_real_norm2, double lambda2) {
    double real = 0.0, fake = 0.0;
    for (double l : logits_real) real += softplus(-l);
    for (double l : logits_fake) fake += softplus(l);
    real /= static_cast<double>(std::max<std::size_t>(1, logits_real.size()));
    fake /= static_cast<double>(std::max<std::size_t>(1, logits_fake.size()));
    return real + fake + lambda2 * mean_of(grad_real_norm2);
}

AdamState make_adam(const ParamSet& params) { return {zero_grads_like(params), zero_grads_like(params), 0}; }

void adam_step(ParamSet& params, const ParamGrads& grads, AdamState& state, const TrainConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        fail(ErrorCategory::Shape, "adam_step: gradient list does not match parameters");
    }
    ++state.steps;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params.at(p).data();
        auto g = grads[p].data();
        auto m = state.m[p].data();
        auto v = state.v[p].data();
        require_same_shape(params.at(p).shape(), grads[p].shape(), "adam_step");
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            w[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
        }
    }
}

TrainState init_train_state(const NetConfig& net, const Shape& sample_shape, std::uint64_t seed) {
    const Noise root(seed);
    TrainState s{GeneratorNet(net, sample_shape, root.fork(1).seed()),
                 DiscriminatorNet(net, sample_shape, root.fork(2).seed()),
                 {},
                 {},
                 0,
                 seed,
                 {}};
    s.adam_g = make_adam(s.generator.params());
    s.adam_d = make_adam(s.discriminator.params());
    return s;
}

StepStats train_step(TrainState& state, const TensorBatch& x0, const TensorBatch& y, const ScheduleTable& table,
                     const TrainConfig& cfg) {
    require_same_shape(x0.shape(), y.shape(), "train_step");
    const std::size_t n = x0.batch();
    if (n == 0) fail(ErrorCategory::Shape, "train_step: empty batch");
    const Noise noise = Noise(state.seed).fork(0x5354455000000000ULL ^ state.step);
    const int T = table.T();

    std::vector<int> ts(n), prev(n);
    std::vector<char> self_cond(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto gen = noise.engine(i, 0, Purpose::TrainTimestep);
        ts[i] = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(T));
        prev[i] = ts[i] - 1;
        auto sc = noise.engine(i, 0, Purpose::TrainSelfCond);
        self_cond[i] = unit_uniform(sc) < cfg.self_cond_prob;
    }

    // Joint draw: x_{t-1} from its marginal, then x_t through one forward step.
    const TensorBatch x_prev = sample_marginal(x0, y, prev, table, noise, Purpose::TrainRealPrev);
    const TensorBatch x_t = sample_step(x_prev, y, ts, table, noise, Purpose::TrainRealStep);
    const TensorBatch src = cfg.no_source_guidance ? TensorBatch(y.shape()) : y;

    const GeneratorNet& G = state.generator;
    TensorBatch x0_prev(x0.shape());
    const int R = cfg.effective_r_train();
    bool any_cond = false;
    for (char c : self_cond) any_cond = any_cond || c;
    double recursions = 1.0;
    if (R > 1 && any_cond) {
        // Detached recursions on the selected rows only.
        std::vector<std::size_t> rows;
        std::vector<int> rts;
        for (std::size_t i = 0; i < n; ++i)
            if (self_cond[i]) {
                rows.push_back(i);
                rts.push_back(ts[i]);
            }
        const TensorBatch sx = gather_rows(x_t, rows), sy = gather_rows(src, rows);
        TensorBatch est(sx.shape());
        for (int r = 1; r < R; ++r) est = G.forward(sx, rts, sy, est);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            auto s = est.row(j);
            std::copy(s.begin(), s.end(), x0_prev.row(rows[j]).begin());
        }
        recursions += static_cast<double>((R - 1) * rows.size()) / static_cast<double>(n);
    }

    GeneratorTape tape(G, x_t, ts, src, x0_prev);
    const TensorBatch& x0_star = tape.output();
    if (!all_finite(x0_star.data())) fail(ErrorCategory::Numeric, "train_step: generator output is not finite");
    const TensorBatch x_fake = posterior_sample(x_t, y, x0_star, ts, table, noise);

    // Discriminator update.
    DiscriminatorNet& D = state.discriminator;
    StepStats st;
    {
        const std::vector<double> logits_fake = D.forward(x_fake, ts, x_t);
        std::vector<double> w_real(n), w_fake(n);
        const PenaltyGrads gp = gradient_penalty(D, x_prev, ts, x_t);
        for (std::size_t i = 0; i < n; ++i) {
            w_real[i] = -sigmoid(-gp.logits[i]) / static_cast<double>(n);
            w_fake[i] = sigmoid(logits_fake[i]) / static_cast<double>(n);
        }
        DiscriminatorGrads gr = discriminator_backward(D, x_prev, ts, x_t, w_real);
        const DiscriminatorGrads gf = discriminator_backward(D, x_fake, ts, x_t, w_fake);
        for (std::size_t p = 0; p < gr.params.size(); ++p) {
            auto a = gr.params[p].data();
            auto b = gf.params[p].data();
            auto c = gp.params[p].data();
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k] + cfg.lambda2 * c[k];
        }
        st.loss_d = discriminator_loss(gp.logits, logits_fake, gp.grad_norm2, cfg.lambda2);
        st.gp = mean_of(gp.grad_norm2);
        require_finite(st.loss_d, "loss_d", state.step);
        require_finite(gr.params, D.params(), "discriminator", state.step);
        adam_step(D.params(), gr.params, state.adam_d, cfg);
    }

    // Generator update against the refreshed discriminator. x_fake is affine in
    // x0_star with slope c_x0(t), the posterior noise held fixed.
    {
        std::vector<double> w(n);
        const std::vector<double> logits = D.forward(x_fake, ts, x_t);
        for (std::size_t i = 0; i < n; ++i) w[i] = -sigmoid(-logits[i]) / static_cast<double>(n);
        const DiscriminatorGrads gd = discriminator_backward(D, x_fake, ts, x_t, w);
        TensorBatch seed(x0.shape());
        const double l1_scale = cfg.lambda1 / static_cast<double>(x0.numel());
        for (std::size_t i = 0; i < n; ++i) {
            const double c = posterior_coeffs(table, ts[i]).c_x0;
            auto s = seed.row(i);
            auto g = gd.candidate.row(i);
            auto a = x0_star.row(i);
            auto b = x0.row(i);
            for (std::size_t k = 0; k < s.size(); ++k) {
                const double diff = a[k] - b[k];
                s[k] = c * g[k] + l1_scale * static_cast<double>((diff > 0.0) - (diff < 0.0));
            }
        }
        const GeneratorGrads gg = tape.backward(seed);
        double l1 = 0.0;
        for (std::size_t k = 0; k < x0.numel(); ++k) l1 += std::abs(x0[k] - x0_star[k]);
        st.l1 = l1 / static_cast<double>(x0.numel());
        st.loss_g = generator_loss(x0, x0_star, logits, cfg.lambda1);
        require_finite(st.loss_g, "loss_g", state.step);
        require_finite(gg.params, G.params(), "generator", state.step);
        adam_step(state.generator.params(), gg.params, state.adam_g, cfg);
    }
    st.recursions_mean = recursions;

    const double decay = state.step == 0 ? 0.0 : 0.98;
    state.stats.l1_ema = decay * state.stats.l1_ema + (1.0 - decay) * st.l1;
    state.stats.loss_g_ema = decay * state.stats.loss_g_ema + (1.0 - decay) * st.loss_g;
    state.stats.loss_d_ema = decay * state.stats.loss_d_ema + (1.0 - decay) * st.loss_d;
    state.stats.recursions_total += recursions;
    ++state.step;
    return st;
}

TensorBatch NetGenerator::estimate(const TensorBatch& x_t, int t, const TensorBatch& y,
                                   const TensorBatch& x0_prev) const {
    const std::vector<int> ts(x_t.batch(), t);
    if (zero_source_) return net_.forward(x_t, ts, TensorBatch(y.shape()), x0_prev);
    return net_.forward(x_t, ts, y, x0_prev);
}

SampleResult synthesize(const GeneratorNet& net, const TensorBatch& y, const ScheduleTable& table,
                        const SamplerOptions& opts, bool zero_source) {
    if (y.rank() < 2 || Shape(y.shape().begin() + 1, y.shape().end()) != net.sample_shape()) {
        fail(ErrorCategory::Shape, "synthesize: source shape " + shape_string(y.shape()) +
                                       " does not match network sample shape " + shape_string(net.sample_shape()));
    }
    const NetGenerator G(net, zero_source);
    return reverse_chain(G, y, table, opts);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[6] = {'B', 'R', 'C', 'K', '1', '\0'};

template <class I>
void put(std::ostream& out, I v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class I>
I get(std::istream& in, const char* what) {
    I v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail(ErrorCategory::Format, std::string("checkpoint truncated while reading ") + what);
    return v;
}

std::string get_string(std::istream& in, const char* what) {
    const auto len = get<std::uint32_t>(in, what);
    if (len > (1u << 24)) fail(ErrorCategory::Format, std::string("checkpoint: implausible length for ") + what);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) fail(ErrorCategory::Format, std::string("checkpoint truncated while reading ") + what);
    return s;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct NamedTensor {
    std::string name;
    Tensor* slot;
};

std::vector<NamedTensor> tensor_slots(TrainState& s) {
    std::vector<NamedTensor> out;
    auto add = [&](const std::string& prefix, ParamSet& ps, ParamGrads* m, ParamGrads* v) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            out.push_back({prefix + "/" + ps.name(i), &ps.at(i)});
            out.push_back({prefix + ".adam_m/" + ps.name(i), &(*m)[i]});
            out.push_back({prefix + ".adam_v/" + ps.name(i), &(*v)[i]});
        }
    };
    add("G", s.generator.params(), &s.adam_g.m, &s.adam_g.v);
    add("D", s.discriminator.params(), &s.adam_d.m, &s.adam_d.v);
    return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ExperimentConfig& cfg, const TrainState& state) {
    out.write(kMagic, sizeof kMagic);
    put_string(out, format_config(cfg));
    const Shape& shape = state.generator.sample_shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put<std::uint64_t>(out, d);
    put<std::uint64_t>(out, state.step);
    put<std::uint64_t>(out, state.seed);
    put<double>(out, state.stats.l1_ema);
    put<double>(out, state.stats.loss_g_ema);
    put<double>(out, state.stats.loss_d_ema);
    put<double>(out, state.stats.recursions_total);
    put<std::uint64_t>(out, state.adam_g.steps);
    put<std::uint64_t>(out, state.adam_d.steps);
    auto slots = tensor_slots(const_cast<TrainState&>(state));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(slots.size()));
    for (const auto& s : slots) {
        put_string(out, s.name);
        write_tensor(out, *s.slot);
    }
    if (!out) fail(ErrorCategory::Io, "checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) fail(ErrorCategory::Format, "not a checkpoint (bad magic)");
    ExperimentConfig cfg = parse_config(get_string(in, "config"));
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 8) fail(ErrorCategory::Format, "checkpoint: bad sample rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in, "shape"));
    const auto step = get<std::uint64_t>(in, "step");
    const auto seed = get<std::uint64_t>(in, "seed");
    TrainState state = init_train_state(cfg.net, shape, seed);
    state.step = step;
    state.stats.l1_ema = get<double>(in, "stats");
    state.stats.loss_g_ema = get<double>(in, "stats");
    state.stats.loss_d_ema = get<double>(in, "stats");
    state.stats.recursions_total = get<double>(in, "stats");
    state.adam_g.steps = get<std::uint64_t>(in, "adam steps");
    state.adam_d.steps = get<std::uint64_t>(in, "adam steps");
    auto slots = tensor_slots(state);
    const auto count = get<std::uint32_t>(in, "tensor count");
    if (count != slots.size()) {
        fail(ErrorCategory::Format, "checkpoint holds " + std::to_string(count) + " tensors, network expects " +
                                        std::to_string(slots.size()));
    }
    for (auto& s : slots) {
        const std::string name = get_string(in, "tensor name");
        if (name != s.name) fail(ErrorCategory::Format, "checkpoint: expected tensor '" + s.name + "', found '" + name + "'");
        Tensor t = read_tensor(in);
        if (t.shape() != s.slot->shape()) {
            fail(ErrorCategory::Format, "checkpoint: tensor '" + name + "' has shape " + shape_string(t.shape()) +
                                            ", expected " + shape_string(s.slot->shape()));
        }
        *s.slot = std::move(t);
    }
    return {std::move(cfg), std::move(state)};
}

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, const TrainState& state) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) fail(ErrorCategory::Io, "cannot write '" + tmp + "'");
        write_checkpoint(out, cfg, state);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open checkpoint '" + path.string() + "'");
    Checkpoint c = read_checkpoint(in);
    if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCategory::Format, "checkpoint has trailing bytes");
    return c;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::size_t steps_per_epoch(const TrainConfig& cfg, std::size_t n_train) {
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    return std::max<std::size_t>(1, n_train / b);
}

// Rows of the train split used at a given step: epoch-wise permutation, then
// consecutive slices of batch_size (the final partial slice is dropped).
std::vector<std::size_t> batch_rows(const std::vector<std::size_t>& train_idx, const TrainConfig& cfg,
                                    std::uint64_t seed, std::uint64_t step) {
    const std::size_t n = train_idx.size();
    const std::size_t spe = steps_per_epoch(cfg, n);
    const std::uint64_t epoch = step / spe, slot = step % spe;
    std::vector<std::size_t> perm = train_idx;
    auto gen = Noise(seed).engine(epoch, 0, Purpose::TrainBatch);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[gen() % i]);
    const std::size_t b = std::min<std::size_t>(n, static_cast<std::size_t>(cfg.batch_size));
    return {perm.begin() + static_cast<std::ptrdiff_t>(slot * b), perm.begin() + static_cast<std::ptrdiff_t>(slot * b + b)};
}

}  // namespace

long planned_steps(const TrainConfig& cfg, std::size_t n_train) {
    if (cfg.steps > 0) return cfg.steps;
    return cfg.epochs * static_cast<long>(steps_per_epoch(cfg, n_train));
}

TrainResult train(const ExperimentConfig& cfg, const PairedDataset& dataset, const std::optional<Checkpoint>& resume) {
    cfg.validate();
    const std::vector<std::size_t> train_idx = dataset.indices(Split::Train);
    if (train_idx.empty()) fail(ErrorCategory::Config, "dataset has no training pairs");
    const Shape sample_shape(dataset.x0.shape().begin() + 1, dataset.x0.shape().end());
    const ScheduleTable table = build_schedule(cfg.effective_schedule());

    TrainState state = resume ? resume->state : init_train_state(cfg.net, sample_shape, cfg.seed);
    if (state.generator.sample_shape() != sample_shape) {
        fail(ErrorCategory::Shape, "checkpoint sample shape " + shape_string(state.generator.sample_shape()) +
                                       " does not match dataset " + shape_string(sample_shape));
    }
    const long total = planned_steps(cfg.train, train_idx.size());

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream rc(dir / "config.resolved");
        rc << format_config(cfg);
    }
    TrainResult res;
    res.metrics_log = dir / "metrics.csv";
    res.checkpoint = dir / "checkpoint.brck";
    const bool append = resume.has_value() && std::filesystem::exists(res.metrics_log);
    std::ofstream log(res.metrics_log, append ? std::ios::app : std::ios::trunc);
    if (!log) fail(ErrorCategory::Io, "cannot write '" + res.metrics_log.string() + "'");
    if (!append) log << "step,loss_g,loss_d,l1,gp,recursions_mean\n";
    log.precision(10);

    while (static_cast<long>(state.step) < total) {
        const auto rows = batch_rows(train_idx, cfg.train, state.seed, state.step);
        const TensorBatch x0 = gather_rows(dataset.x0, rows);
        const TensorBatch y = gather_rows(dataset.y, rows);
        const StepStats st = train_step(state, x0, y, table, cfg.train);
        res.history.push_back(st);
        const long done = static_cast<long>(state.step);
        if (done % cfg.log_every == 0 || done == total) {
            log << done << ',' << st.loss_g << ',' << st.loss_d << ',' << st.l1 << ',' << st.gp << ','
                << st.recursions_mean << '\n';
        }
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != total) {
            save_checkpoint(dir / ("checkpoint_" + std::to_string(done) + ".brck"), cfg, state);
        }
    }
    log.flush();
    save_checkpoint(res.checkpoint, cfg, state);
    return res;
}

}  // namespace bridgekit
