#include "bridgekit/nets.hpp"

#include <cmath>
#include <random>

#include "bridgekit/rng.hpp"

namespace bridgekit {

using ad::Graph;
using ad::Var;

std::string_view net_kind_name(NetKind k) noexcept { return k == NetKind::Mlp ? "mlp" : "tiny_unet"; }

NetKind parse_net_kind(std::string_view name) {
    if (name == "mlp") return NetKind::Mlp;
    if (name == "tiny_unet") return NetKind::TinyUnet;
    fail(ErrorCategory::Config, "unknown net kind '" + std::string(name) + "' (expected mlp|tiny_unet)");
}

void NetConfig::validate() const {
    if (time_embed_dim < 2 || time_embed_dim % 2) {
        fail(ErrorCategory::Config, "time_embed_dim must be even and >= 2, got " + std::to_string(time_embed_dim));
    }
    if (width < 1 || depth < 1 || base_channels < 1) fail(ErrorCategory::Config, "network sizes must be positive");
}

std::vector<double> time_embedding(int t, int dim) {
    if (dim < 2 || dim % 2) fail(ErrorCategory::Domain, "time_embedding: dim must be even, got " + std::to_string(dim));
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim / 2; ++k) {
        const double freq = std::pow(10000.0, -2.0 * k / dim);
        out[2 * k] = std::sin(t * freq);
        out[2 * k + 1] = std::cos(t * freq);
    }
    return out;
}

void ParamSet::add(std::string name, Tensor value) {
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(value));
}

std::size_t ParamSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    fail(ErrorCategory::Format, "parameter '" + std::string(name) + "' not found");
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
}

ParamGrads zero_grads_like(const ParamSet& params) {
    ParamGrads g;
    g.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) g.emplace_back(params.at(i).shape());
    return g;
}

BasicTensor<Dual> make_dual(const Tensor& value, const Tensor* tangent) {
    if (tangent) require_same_shape(value.shape(), tangent->shape(), "make_dual");
    BasicTensor<Dual> out(value.shape());
    for (std::size_t i = 0; i < value.numel(); ++i) out[i] = Dual(value[i], tangent ? (*tangent)[i] : 0.0);
    return out;
}

namespace {

template <class S>
BasicTensor<S> lift(const Tensor& t) {
    if constexpr (std::is_same_v<S, double>) {
        return t;
    } else {
        return make_dual(t);
    }
}

// Registers parameters in order with fan-in uniform initialization.
class Registrar {
  public:
    Registrar(ParamSet& ps, std::uint64_t seed) : ps_(ps), noise_(seed) {}

    void weight(const std::string& name, Shape shape) {
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor w(std::move(shape));
        auto gen = noise_.engine(ps_.size(), 0, Purpose::Init);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : w.data()) v = u(gen);
        ps_.add(name, std::move(w));
    }
    void bias(const std::string& name, std::size_t n) { ps_.add(name, Tensor({n})); }
    void linear(const std::string& name, std::size_t out, std::size_t in) {
        weight(name + ".w", {out, in});
        bias(name + ".b", out);
    }
    void conv(const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
        weight(name + ".w", {out, in, k, k});
        bias(name + ".b", out);
    }

  private:
    ParamSet& ps_;
    Noise noise_;
};

template <class S>
class Builder {
  public:
    Builder(Graph<S>& g, const std::vector<Var>& pv, const ParamSet& ps) : g(g), pv_(pv), ps_(ps) {}

    Var p(const std::string& name) const { return pv_.at(ps_.index_of(name)); }
    Var linear(const std::string& name, Var x) { return g.linear(x, p(name + ".w"), p(name + ".b")); }
    Var conv(const std::string& name, Var x, int stride = 1) {
        const int k = static_cast<int>(ps_.at(ps_.index_of(name + ".w")).dim(2));
        return g.conv2d(x, p(name + ".w"), p(name + ".b"), stride, k / 2);
    }

    // silu(l2(silu(l1(sinusoid(t)))))
    Var time_features(std::span<const int> ts, int dim) {
        BasicTensor<S> enc({ts.size(), static_cast<std::size_t>(dim)});
        for (std::size_t i = 0; i < ts.size(); ++i) {
            auto e = time_embedding(ts[i], dim);
            for (int k = 0; k < dim; ++k) enc[i * dim + k] = S(e[k]);
        }
        Var x = g.input(std::move(enc));
        return g.silu(linear("temb.l2", g.silu(linear("temb.l1", x))));
    }

    Var resblock(const std::string& name, Var x, Var temb, bool has_skip) {
        Var h = conv(name + ".conv1", g.silu(x));
        h = g.add_channel(h, linear(name + ".time", temb));
        h = conv(name + ".conv2", g.silu(h));
        Var skip = has_skip ? conv(name + ".skip", x) : x;
        return g.add(h, skip);
    }

    Graph<S>& g;

  private:
    const std::vector<Var>& pv_;
    const ParamSet& ps_;
};

std::size_t feature_count(const Shape& s) { return shape_numel(s); }

void check_image_shape(const Shape& s, std::size_t divisor) {
    if (s.size() != 3 || s[1] % divisor || s[2] % divisor || s[1] == 0) {
        fail(ErrorCategory::Shape, "tiny_unet needs (C, H, W) samples with H, W divisible by " +
                                       std::to_string(divisor) + ", got " + shape_string(s));
    }
}

std::size_t temb_width(const NetConfig& c) {
    return c.kind == NetKind::Mlp ? static_cast<std::size_t>(c.width) : 4 * static_cast<std::size_t>(c.base_channels);
}

void check_batch(const TensorBatch& x, const Shape& sample, std::size_t batch, const char* what) {
    Shape expect{batch};
    expect.insert(expect.end(), sample.begin(), sample.end());
    require_same_shape(x.shape(), expect, what);
}

}  // namespace

template <class S>
std::vector<Var> bind_params(Graph<S>& g, const ParamSet& params, bool requires_grad) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(g.input(lift<S>(params.at(i)), requires_grad));
    return vars;
}

template std::vector<Var> bind_params(Graph<double>&, const ParamSet&, bool);
template std::vector<Var> bind_params(Graph<Dual>&, const ParamSet&, bool);

// ---------------------------------------------------------------------------
// Generator

GeneratorNet::GeneratorNet(const NetConfig& config, Shape sample_shape, std::uint64_t seed)
    : config_(config), sample_shape_(std::move(sample_shape)) {
    config_.validate();
    Registrar r(params_, seed);
    const auto te = static_cast<std::size_t>(config_.time_embed_dim);
    const std::size_t tw = temb_width(config_);
    r.linear("temb.l1", tw, te);
    r.linear("temb.l2", tw, tw);
    if (config_.kind == NetKind::Mlp) {
        if (sample_shape_.size() != 1) fail(ErrorCategory::Shape, "mlp needs vector samples (d)");
        const std::size_t d = feature_count(sample_shape_), w = static_cast<std::size_t>(config_.width);
        r.linear("in", w, 3 * d);
        r.linear("in.time", w, tw);
        for (int l = 1; l < config_.depth; ++l) {
            r.linear("h" + std::to_string(l), w, w);
            r.linear("h" + std::to_string(l) + ".time", w, w);
        }
        r.linear("out", d, w);
    } else {
        check_image_shape(sample_shape_, 4);
        const std::size_t C = sample_shape_[0], c = static_cast<std::size_t>(config_.base_channels);
        auto res = [&](const std::string& name, std::size_t cin, std::size_t cout) {
            r.conv(name + ".conv1", cout, cin, 3);
            r.linear(name + ".time", cout, tw);
            r.conv(name + ".conv2", cout, cout, 3);
            if (cin != cout) r.conv(name + ".skip", cout, cin, 1);
        };
        r.conv("in", c, 3 * C, 3);
        res("enc1", c, c);
        res("enc2", c, 2 * c);
        res("dec1", 2 * c, 2 * c);
        res("dec2", 4 * c, c);
        r.conv("out", C, 2 * c, 3);
    }
}

template <class S>
Var GeneratorNet::build(Graph<S>& g, const std::vector<Var>& pv, Var x_t, Var y, Var x0_prev,
                        std::span<const int> ts) const {
    Builder<S> b(g, pv, params_);
    Var temb = b.time_features(ts, config_.time_embed_dim);
    Var x = g.concat({x_t, y, x0_prev});
    if (config_.kind == NetKind::Mlp) {
        Var h = g.silu(g.add(b.linear("in", x), b.linear("in.time", temb)));
        for (int l = 1; l < config_.depth; ++l) {
            const std::string name = "h" + std::to_string(l);
            h = g.silu(g.add(b.linear(name, h), b.linear(name + ".time", temb)));
        }
        return g.tanh(b.linear("out", h));
    }
    Var h0 = b.conv("in", x);
    Var e1 = b.resblock("enc1", h0, temb, false);
    Var e2 = b.resblock("enc2", g.avgpool2(e1), temb, true);
    Var d1 = b.resblock("dec1", g.avgpool2(e2), temb, false);
    Var d2 = b.resblock("dec2", g.concat({g.upsample2(d1), e2}), temb, true);
    Var top = g.concat({g.upsample2(d2), e1});
    return g.tanh(b.conv("out", g.silu(top)));
}

template Var GeneratorNet::build(Graph<double>&, const std::vector<Var>&, Var, Var, Var, std::span<const int>) const;
template Var GeneratorNet::build(Graph<Dual>&, const std::vector<Var>&, Var, Var, Var, std::span<const int>) const;

TensorBatch GeneratorNet::forward(const TensorBatch& x_t, std::span<const int> ts, const TensorBatch& y,
                                  const TensorBatch& x0_prev) const {
    const std::size_t n = x_t.batch();
    check_batch(x_t, sample_shape_, n, "generator x_t");
    check_batch(y, sample_shape_, n, "generator y");
    check_batch(x0_prev, sample_shape_, n, "generator x0_prev");
    if (ts.size() != n) fail(ErrorCategory::Shape, "generator: timestep count does not match batch");
    Graph<double> g;
    auto pv = bind_params(g, params_, false);
    Var out = build(g, pv, g.input(x_t), g.input(y), g.input(x0_prev), ts);
    return g.value(out);
}

GeneratorTape::GeneratorTape(const GeneratorNet& G, const TensorBatch& x_t, std::span<const int> ts,
                             const TensorBatch& y, const TensorBatch& x0_prev)
    : graph_(std::make_unique<Graph<double>>()) {
    const std::size_t n = x_t.batch();
    check_batch(x_t, G.sample_shape(), n, "generator x_t");
    check_batch(y, G.sample_shape(), n, "generator y");
    check_batch(x0_prev, G.sample_shape(), n, "generator x0_prev");
    if (ts.size() != n) fail(ErrorCategory::Shape, "generator: timestep count does not match batch");
    Graph<double>& g = *graph_;
    params_ = bind_params(g, G.params(), true);
    x_t_ = g.input(x_t, true);
    out_ = G.build(g, params_, x_t_, g.input(y), g.input(x0_prev), ts);
}

GeneratorGrads GeneratorTape::backward(const TensorBatch& out_seed) {
    Graph<double>& g = *graph_;
    require_same_shape(out_seed.shape(), g.value(out_).shape(), "generator seed");
    g.backward(out_, out_seed);
    GeneratorGrads r;
    r.output = g.value(out_);
    r.x_t = g.grad(x_t_);
    for (Var v : params_) r.params.push_back(g.grad(v));
    return r;
}

GeneratorGrads generator_backward(const GeneratorNet& G, const TensorBatch& x_t, std::span<const int> ts,
                                  const TensorBatch& y, const TensorBatch& x0_prev, const TensorBatch& out_seed) {
    GeneratorTape tape(G, x_t, ts, y, x0_prev);
    return tape.backward(out_seed);
}

// ---------------------------------------------------------------------------
// Discriminator

DiscriminatorNet::DiscriminatorNet(const NetConfig& config, Shape sample_shape, std::uint64_t seed)
    : config_(config), sample_shape_(std::move(sample_shape)) {
    config_.validate();
    Registrar r(params_, seed);
    const auto te = static_cast<std::size_t>(config_.time_embed_dim);
    const std::size_t tw = temb_width(config_);
    r.linear("temb.l1", tw, te);
    r.linear("temb.l2", tw, tw);
    if (config_.kind == NetKind::Mlp) {
        if (sample_shape_.size() != 1) fail(ErrorCategory::Shape, "mlp needs vector samples (d)");
        const std::size_t d = feature_count(sample_shape_), w = static_cast<std::size_t>(config_.width);
        r.linear("in", w, 2 * d);
        r.linear("in.time", w, tw);
        for (int l = 1; l < config_.depth; ++l) {
            r.linear("h" + std::to_string(l), w, w);
            r.linear("h" + std::to_string(l) + ".time", w, w);
        }
        r.linear("out", 1, w);
    } else {
        check_image_shape(sample_shape_, 8);
        const std::size_t C = sample_shape_[0], c = static_cast<std::size_t>(config_.base_channels);
        r.conv("s1", c, 2 * C, 3);
        r.linear("s1.time", c, tw);
        r.conv("s2", 2 * c, c, 3);
        r.linear("s2.time", 2 * c, tw);
        r.conv("s3", 4 * c, 2 * c, 3);
        r.linear("s3.time", 4 * c, tw);
        const std::size_t flat = 4 * c * (sample_shape_[1] / 8) * (sample_shape_[2] / 8);
        r.linear("out", 1, flat);
    }
}

template <class S>
Var DiscriminatorNet::build(Graph<S>& g, const std::vector<Var>& pv, Var x_candidate, Var x_t,
                            std::span<const int> ts) const {
    constexpr double kSlope = 0.2;
    Builder<S> b(g, pv, params_);
    Var temb = b.time_features(ts, config_.time_embed_dim);
    Var x = g.concat({x_candidate, x_t});
    if (config_.kind == NetKind::Mlp) {
        Var h = g.leaky_relu(g.add(b.linear("in", x), b.linear("in.time", temb)), kSlope);
        for (int l = 1; l < config_.depth; ++l) {
            const std::string name = "h" + std::to_string(l);
            h = g.leaky_relu(g.add(b.linear(name, h), b.linear(name + ".time", temb)), kSlope);
        }
        return b.linear("out", h);
    }
    Var h = x;
    for (const char* stage : {"s1", "s2", "s3"}) {
        h = b.conv(stage, h, 2);
        h = g.leaky_relu(g.add_channel(h, b.linear(std::string(stage) + ".time", temb)), kSlope);
    }
    const std::size_t n = g.value(h).batch();
    h = g.reshape(h, {n, g.value(h).row_size()});
    return b.linear("out", h);
}

template Var DiscriminatorNet::build(Graph<double>&, const std::vector<Var>&, Var, Var, std::span<const int>) const;
template Var DiscriminatorNet::build(Graph<Dual>&, const std::vector<Var>&, Var, Var, std::span<const int>) const;

std::vector<double> DiscriminatorNet::forward(const TensorBatch& x_candidate, std::span<const int> ts,
                                              const TensorBatch& x_t) const {
    const std::size_t n = x_candidate.batch();
    check_batch(x_candidate, sample_shape_, n, "discriminator candidate");
    check_batch(x_t, sample_shape_, n, "discriminator x_t");
    if (ts.size() != n) fail(ErrorCategory::Shape, "discriminator: timestep count does not match batch");
    Graph<double> g;
    auto pv = bind_params(g, params_, false);
    Var out = build(g, pv, g.input(x_candidate), g.input(x_t), ts);
    return g.value(out).storage();
}

DiscriminatorGrads discriminator_backward(const DiscriminatorNet& D, const TensorBatch& x_candidate,
                                          std::span<const int> ts, const TensorBatch& x_t,
                                          std::span<const double> weights) {
    const std::size_t n = x_candidate.batch();
    check_batch(x_candidate, D.sample_shape(), n, "discriminator candidate");
    check_batch(x_t, D.sample_shape(), n, "discriminator x_t");
    if (weights.size() != n || ts.size() != n) fail(ErrorCategory::Shape, "discriminator: batch size mismatch");
    Graph<double> g;
    auto pv = bind_params(g, D.params(), true);
    Var xc = g.input(x_candidate, true);
    Var out = D.build(g, pv, xc, g.input(x_t), ts);
    g.backward(out, Tensor({n, 1}, std::vector<double>(weights.begin(), weights.end())));
    DiscriminatorGrads r;
    r.logits = g.value(out).storage();
    r.candidate = g.grad(xc);
    for (Var v : pv) r.params.push_back(g.grad(v));
    return r;
}

PenaltyGrads gradient_penalty(const DiscriminatorNet& D, const TensorBatch& x_candidate, std::span<const int> ts,
                              const TensorBatch& x_t) {
    const std::size_t n = x_candidate.batch();
    std::vector<double> ones(n, 1.0);
    DiscriminatorGrads first = discriminator_backward(D, x_candidate, ts, x_t, ones);

    PenaltyGrads r;
    r.logits = first.logits;
    r.grad_norm2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (double v : first.candidate.row(i)) acc += v * v;
        r.grad_norm2[i] = acc;
    }

    // d/dθ mean_i ||g_i||^2 = (2/n) Σ_i (d g_i/dθ)^T g_i, and Σ_i (d g_i/dθ)^T g_i is
    // the tangent of d(Σ_i D_i)/dθ along the candidate direction g.
    Graph<Dual> g;
    auto pv = bind_params(g, D.params(), true);
    Var xc = g.input(make_dual(x_candidate, &first.candidate));
    Var out = D.build(g, pv, xc, g.input(make_dual(x_t)), ts);
    g.backward(out, BasicTensor<Dual>({n, 1}, Dual(1.0)));
    const double scale = n ? 2.0 / static_cast<double>(n) : 0.0;
    for (Var v : pv) {
        const auto gd = g.grad(v);
        Tensor t(gd.shape());
        for (std::size_t k = 0; k < gd.numel(); ++k) t[k] = scale * gd[k].d;
        r.params.push_back(std::move(t));
    }
    return r;
}

}  // namespace bridgekit
