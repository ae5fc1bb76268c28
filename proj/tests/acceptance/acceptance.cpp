// Acceptance suite: one PASS/FAIL line per criterion. Criterion 9 is reported
// but does not affect the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bridgekit/data.hpp"
#include "bridgekit/forward.hpp"
#include "bridgekit/metrics.hpp"
#include "bridgekit/posterior.hpp"
#include "bridgekit/sampler.hpp"
#include "bridgekit/schedule.hpp"
#include "bridgekit/training.hpp"
#include "oracles.hpp"

using namespace bridgekit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr Variant kVariants[] = {Variant::SelfRDB, Variant::RegularBridge};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("bridgekit_accept_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

long env_long(const char* name, long fallback) {
    if (const char* v = std::getenv(name)) {
        try {
            return std::stol(v);
        } catch (const std::exception&) {
        }
    }
    return fallback;
}

// 1 ---------------------------------------------------------------------------
Outcome schedule_invariants() {
    double worst = 0.0;
    bool monotone = true;
    for (int T : {4, 32, 256, 1000}) {
        for (Variant v : kVariants) {
            const ScheduleTable s = build_schedule({T, 2.2, v});
            double sum = 0.0;
            for (int t = 0; t <= T; ++t) {
                sum += s.g(t);
                worst = std::max(worst, std::abs(s.mu_x0(t) + s.mu_y(t) - 1.0));
                worst = std::max({worst, -s.mu_x0(t), -s.mu_y(t)});
            }
            worst = std::max(worst, std::abs(sum - 1.0));
            worst = std::max(worst, std::abs(s.s2(T) - 1.0));
            if (v == Variant::SelfRDB) {
                worst = std::max(worst, std::abs(s.sigma2(T) - 2.2));
                for (int t = 1; t <= T; ++t) monotone = monotone && s.sigma2(t) > s.sigma2(t - 1);
            } else {
                worst = std::max({worst, std::abs(s.sigma2(0)), std::abs(s.sigma2(T))});
                for (int t = 0; t <= T; ++t) worst = std::max(worst, std::abs(s.sigma2(t) - s.sigma2(T - t)));
            }
        }
    }
    return {worst <= 1e-12 && monotone,
            fmt("max deviation %.2e, SelfRDB variance %s", worst, monotone ? "strictly increasing" : "NOT increasing")};
}

// 2 ---------------------------------------------------------------------------
Outcome posterior_oracles() {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double e_prod = 0.0, e_grid = 0.0;
    for (Variant v : kVariants) {
        const ScheduleTable s = build_schedule({32, 2.2, v});
        for (int t = 1; t <= 32; ++t) {
            const PosteriorCoeffs c = posterior_coeffs(s, t);
            const StepParams p = transition_params(s, t);
            for (int k = 0; k < 100; ++k) {
                const double xt = u(gen), y = u(gen), x0 = u(gen);
                const double mean = c.c_xt * xt + c.c_y * y + c.c_x0 * x0;
                const double m0 = s.mu_x0(t - 1) * x0 + s.mu_y(t - 1) * y;
                const auto prod = oracle::gaussian_product(m0, s.sigma2(t - 1), p.a, p.b * y, p.sigma2_step, xt);
                const auto grid = oracle::grid_posterior(m0, s.sigma2(t - 1), p.a, p.b * y, p.sigma2_step, xt);
                auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
                e_prod = std::max({e_prod, rel(mean, prod.mean), rel(c.v, prod.var)});
                e_grid = std::max({e_grid, rel(mean, grid.mean), rel(c.v, grid.var)});
            }
        }
    }
    return {e_prod <= 1e-9 && e_grid <= 1e-6,
            fmt("max error vs product %.2e (tol 1e-9), vs grid %.2e (tol 1e-6)", e_prod, e_grid)};
}

// 3 ---------------------------------------------------------------------------
Outcome markov_consistency() {
    double analytic = 0.0;
    bool mc_ok = true;
    double worst_z = 0.0;
    for (Variant v : kVariants) {
        const ScheduleTable s = build_schedule({32, 2.2, v});
        double A = 1.0, B = 0.0, V = 0.0;
        for (int t = 1; t <= 32; ++t) {
            const StepParams p = transition_params(s, t);
            A *= p.a;
            B = p.a * B + p.b;
            V = p.a * p.a * V + p.sigma2_step;
            analytic = std::max({analytic, std::abs(A - s.mu_x0(t)), std::abs(B - s.mu_y(t)),
                                 std::abs(V - s.sigma2(t))});
        }

        const std::size_t n = 100000;
        const double x0v = 0.7, yv = -0.4;
        TensorBatch x0({n, 1}, x0v), y({n, 1}, yv);
        TensorBatch x = x0;
        const Noise noise(33);
        for (int t = 1; t <= 32; ++t) {
            x = sample_step(x, y, t, s, noise, Purpose::ForwardStep);
            if (t != 8 && t != 16 && t != 31) continue;
            double m = 0.0;
            for (double e : x.data()) m += e;
            m /= static_cast<double>(n);
            double var = 0.0;
            for (double e : x.data()) var += (e - m) * (e - m);
            var /= static_cast<double>(n - 1);
            const double want_m = s.mu_x0(t) * x0v + s.mu_y(t) * yv, want_v = s.sigma2(t);
            const double se_m = std::sqrt(want_v / static_cast<double>(n));
            const double se_v = want_v * std::sqrt(2.0 / static_cast<double>(n - 1));
            const double zm = std::abs(m - want_m) / se_m, zv = std::abs(var - want_v) / se_v;
            worst_z = std::max({worst_z, zm, zv});
            mc_ok = mc_ok && zm <= 3.0 && zv <= 3.0;
        }
    }
    return {analytic <= 1e-9 && mc_ok,
            fmt("analytic composition error %.2e, Monte-Carlo worst deviation %.2f SE", analytic, worst_z)};
}

// 4 ---------------------------------------------------------------------------
Outcome oracle_round_trip() {
    double worst = 0.0;
    for (Variant v : kVariants) {
        const ScheduleTable s = build_schedule({32, 2.2, v});
        TensorBatch x0({5, 4}), y({5, 4});
        std::mt19937_64 gen(4);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (double& e : x0.data()) e = u(gen);
        for (double& e : y.data()) e = u(gen);
        const FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch&) { return x0; });
        SamplerOptions o;
        o.zero_noise = true;
        const auto r = reverse_chain(G, y, s, o);
        for (std::size_t k = 0; k < x0.numel(); ++k) worst = std::max(worst, std::abs(r.x0[k] - x0[k]));
    }
    return {worst <= 1e-6, fmt("max |x0_hat - x0| %.2e over both variants", worst)};
}

// 5 ---------------------------------------------------------------------------
Outcome contraction() {
    TensorBatch c({3, 4});
    for (std::size_t k = 0; k < c.numel(); ++k) c[k] = 0.25 * std::sin(static_cast<double>(k) + 1.0) + 0.1;
    std::vector<TensorBatch> outputs;
    const FunctionGenerator G([&](const TensorBatch&, int, const TensorBatch&, const TensorBatch& u) {
        TensorBatch r(u.shape());
        for (std::size_t k = 0; k < r.numel(); ++k) r[k] = 0.5 * u[k] + c[k];
        outputs.push_back(r);
        return r;
    });
    SamplerOptions o;
    o.r_max = 50;
    const auto est = self_consistent_estimate(G, c, 5, c, o);

    auto dist = [&](const TensorBatch& a) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.numel(); ++k) s += (a[k] - 2.0 * c[k]) * (a[k] - 2.0 * c[k]);
        return std::sqrt(s);
    };
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < c.numel(); ++k) {
        const double r = 0.5 * est.x0_star[k] + c[k] - est.x0_star[k];
        num += r * r;
        den += est.x0_star[k] * est.x0_star[k];
    }
    const double residual = std::sqrt(num / den);
    bool ratios_ok = outputs.size() >= 2;
    double worst_ratio_dev = 0.0;
    for (std::size_t r = 1; r < outputs.size(); ++r) {
        const double ratio = dist(outputs[r]) / dist(outputs[r - 1]);
        worst_ratio_dev = std::max(worst_ratio_dev, std::abs(ratio - 0.5) / 0.5);
    }
    ratios_ok = ratios_ok && worst_ratio_dev <= 0.1;
    return {residual < 0.01 && ratios_ok,
            fmt("%d recursions, residual %.2e, error ratio within %.1f%% of 0.5", est.recursions, residual,
                100.0 * worst_ratio_dev)};
}

// 6 ---------------------------------------------------------------------------
TensorBatch random_batch(Shape s, std::uint64_t seed, double scale = 0.8) {
    TensorBatch t(std::move(s));
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& v : t.data()) v = u(gen);
    return t;
}

std::vector<std::size_t> probes(std::size_t n, std::size_t limit) {
    std::vector<std::size_t> out;
    if (n <= limit) {
        for (std::size_t k = 0; k < n; ++k) out.push_back(k);
    } else {
        for (std::size_t j = 0; j < limit; ++j) out.push_back(j * (n - 1) / (limit - 1));
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Max relative error over probed parameters of f's analytic gradient.
double param_check(ParamSet& params, const ParamGrads& grads, const std::function<double()>& f, double h,
                   int& count) {
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k : probes(params.at(p).numel(), 16)) {
            double& w = params.at(p)[k];
            const double orig = w;
            const double fd = oracle::central_difference(
                [&](double v) {
                    w = v;
                    const double r = f();
                    w = orig;
                    return r;
                },
                orig, h);
            worst = std::max(worst, oracle::relative_error(grads[p][k], fd));
            ++count;
        }
    }
    return worst;
}

Outcome gradient_checks() {
    NetConfig nc;  // default mlp
    const Shape sample{8};
    const Shape bs{4, 8};
    const std::vector<int> ts = {1, 9, 20, 32};
    double worst = 0.0;
    int count = 0;

    GeneratorNet G(nc, sample, 21);
    const auto xt = random_batch(bs, 1), y = random_batch(bs, 2), xp = random_batch(bs, 3), seed = random_batch(bs, 4, 1.0);
    const auto gg = generator_backward(G, xt, ts, y, xp, seed);
    auto gf = [&](const TensorBatch& x) { return dot(G.forward(x, ts, y, xp).data(), seed.data()); };
    for (std::size_t k = 0; k < xt.numel(); ++k) {
        const double fd = oracle::central_difference(
            [&](double v) {
                TensorBatch x = xt;
                x[k] = v;
                return gf(x);
            },
            xt[k], 1e-3);
        worst = std::max(worst, oracle::relative_error(gg.x_t[k], fd));
        ++count;
    }
    const double g_worst = std::max(worst, param_check(G.params(), gg.params, [&] { return gf(xt); }, 1e-3, count));

    // Leaky ReLU makes D piecewise linear; short steps stay inside one piece.
    constexpr double kKink = 1e-6;
    DiscriminatorNet D(nc, sample, 22);
    const auto xc = random_batch(bs, 5);
    const std::vector<double> w = {0.6, -1.2, 0.3, 0.9};
    const auto dg = discriminator_backward(D, xc, ts, xt, w);
    auto df = [&](const TensorBatch& x) { return dot(D.forward(x, ts, xt), w); };
    double d_worst = 0.0;
    for (std::size_t k = 0; k < xc.numel(); ++k) {
        const double fd = oracle::central_difference(
            [&](double v) {
                TensorBatch x = xc;
                x[k] = v;
                return df(x);
            },
            xc[k], kKink);
        d_worst = std::max(d_worst, oracle::relative_error(dg.candidate[k], fd));
        ++count;
    }
    d_worst = std::max(d_worst, param_check(D.params(), dg.params, [&] { return df(xc); }, kKink, count));

    const auto gp = gradient_penalty(D, xc, ts, xt);
    auto mean_gp = [&] {
        const auto r = gradient_penalty(D, xc, ts, xt);
        double s = 0.0;
        for (double v : r.grad_norm2) s += v;
        return s / static_cast<double>(r.grad_norm2.size());
    };
    const double gp_worst = param_check(D.params(), gp.params, mean_gp, kKink, count);

    const double all = std::max({g_worst, d_worst, gp_worst});
    return {all <= 1e-4, fmt("%d probes; max relative error G %.1e, D %.1e, penalty %.1e", count, g_worst, d_worst,
                             gp_worst)};
}

// 7 ---------------------------------------------------------------------------
Outcome loss_values() {
    const TensorBatch a({2, 2}, std::vector<double>{1, 2, 3, 4});
    const TensorBatch b({2, 2}, std::vector<double>{0, 3, 2, 5});  // |a-b| = 1 everywhere
    const std::vector<double> zeros = {0.0, 0.0};
    const double lg = generator_loss(a, b, zeros, 1.0);
    const double ld = discriminator_loss(zeros, zeros, zeros, 1.0);
    const double eg = std::abs(lg - (1.0 + std::log(2.0))), ed = std::abs(ld - 2.0 * std::log(2.0));
    return {eg <= 1e-12 && ed <= 1e-12, fmt("L_G error %.1e, L_D error %.1e", eg, ed)};
}

// 8 ---------------------------------------------------------------------------
double trailing_l1(const std::vector<StepStats>& h, std::size_t end, std::size_t window) {
    double s = 0.0;
    for (std::size_t i = end - window; i < end; ++i) s += h[i].l1;
    return s / static_cast<double>(window);
}

Outcome toy_training() {
    ExperimentConfig cfg;
    cfg.task = Task::Gauss2Gauss;
    cfg.n_pairs = 2000;
    cfg.schedule.T = 32;
    cfg.net.kind = NetKind::Mlp;
    cfg.train.steps = 2000;
    cfg.train.batch_size = 64;
    cfg.seed = 1;
    cfg.out_dir = scratch("toy").string();
    const auto ds = make_synthetic_pairs(cfg.task, static_cast<std::size_t>(cfg.n_pairs), cfg.seed);
    const TrainResult tr = train(cfg, ds);
    const Checkpoint ck = load_checkpoint(tr.checkpoint);

    const auto [x0, y] = ds.subset(Split::Test);
    SamplerOptions so = cfg.effective_sampler();
    so.seed = cfg.seed;
    const auto res = synthesize(ck.state.generator, y, build_schedule(cfg.effective_schedule()), so, false);
    const MetricReport model = evaluate_batch(x0, res.x0, Normalization::DataRange);
    const MetricReport copy = evaluate_batch(x0, y, Normalization::DataRange);
    const double gain = *model.aggregate_psnr - *copy.aggregate_psnr;

    const double l1_100 = trailing_l1(tr.history, 100, 100), l1_end = trailing_l1(tr.history, 2000, 100);
    const double drop = 1.0 - l1_end / l1_100;
    fs::remove_all(cfg.out_dir);
    return {gain >= 3.0 && drop >= 0.5,
            fmt("test PSNR %.2f dB vs copy-source %.2f dB (+%.2f), smoothed l1 %.4f -> %.4f (-%.0f%%)",
                *model.aggregate_psnr, *copy.aggregate_psnr, gain, l1_100, l1_end, 100.0 * drop)};
}

// 9 ---------------------------------------------------------------------------
Outcome ablations() {
    const long steps = env_long("BRIDGEKIT_ACCEPT_C9_STEPS", 3000);
    const int seeds = static_cast<int>(env_long("BRIDGEKIT_ACCEPT_C9_SEEDS", 5));
    struct Arm {
        const char* name;
        void (*apply)(TrainConfig&);
        std::vector<double> psnr;
    };
    std::vector<Arm> arms = {
        {"full", [](TrainConfig&) {}, {}},
        {"w/o self-consistency", [](TrainConfig& t) { t.no_self_consistency = true; }, {}},
        {"w/o soft prior", [](TrainConfig& t) { t.no_soft_prior = true; }, {}},
        {"w/o source guidance", [](TrainConfig& t) { t.no_source_guidance = true; }, {}},
    };
    for (int seed = 1; seed <= seeds; ++seed) {
        const auto ds = make_synthetic_pairs(Task::Shapes16, 1000, static_cast<std::uint64_t>(seed));
        const auto [x0, y] = ds.subset(Split::Test);
        for (auto& arm : arms) {
            ExperimentConfig cfg;
            cfg.task = Task::Shapes16;
            cfg.n_pairs = 1000;
            cfg.schedule.T = 32;
            cfg.net.kind = NetKind::TinyUnet;
            cfg.train.steps = steps;
            cfg.train.batch_size = 8;
            cfg.seed = static_cast<std::uint64_t>(seed);
            cfg.log_every = 100;
            arm.apply(cfg.train);
            cfg.out_dir = scratch("ablation").string();
            const TrainResult tr = train(cfg, ds);
            const Checkpoint ck = load_checkpoint(tr.checkpoint);
            SamplerOptions so = cfg.effective_sampler();
            so.seed = cfg.seed;
            const auto res = synthesize(ck.state.generator, y, build_schedule(cfg.effective_schedule()), so,
                                        cfg.train.no_source_guidance);
            const double p = evaluate_batch(x0, res.x0, Normalization::PerImage).psnr_summary.mean;
            arm.psnr.push_back(p);
            std::printf("  criterion 9 progress: seed %d, %s: %.2f dB\n", seed, arm.name, p);
            std::fflush(stdout);
            fs::remove_all(cfg.out_dir);
        }
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double full = median(arms[0].psnr), nsc = median(arms[1].psnr), nsp = median(arms[2].psnr),
                 nsg = median(arms[3].psnr);
    const bool ok = full >= nsc && full >= nsp && nsg + 2.0 <= std::min({full, nsc, nsp});
    return {ok, fmt("median PSNR over %d seeds x %ld steps: full %.2f, w/o self-consistency %.2f, w/o soft prior "
                    "%.2f, w/o source guidance %.2f dB",
                    seeds, steps, full, nsc, nsp, nsg)};
}

// 10 --------------------------------------------------------------------------
Outcome metric_values() {
    std::vector<double> ref(100), test(100);
    for (std::size_t i = 0; i < 100; ++i) {
        ref[i] = 0.9 * static_cast<double>(i) / 99.0;
        test[i] = ref[i] + 0.1;
    }
    const double pe = std::abs(psnr(ref, test) - 20.0);

    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(16 * 16), b(16 * 16);
    for (double& v : a) v = u(gen);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::clamp(a[i] + 0.2 * (u(gen) - 0.5), 0.0, 1.0);
    const double se = std::abs(ssim({a, 16, 16}, {b, 16, 16}) - oracle::ssim_brute(a, b, 16, 16));

    const std::vector<double> wa = {1.5, 2.5, 3.5, 4.5, 5.5, 6.5}, wb = {1, 2, 3, 4, 5, 6};
    const double wp = wilcoxon_signed_rank(wa, wb).p_value;
    const double we = std::abs(wp - 0.03125);
    return {pe <= 1e-9 && se <= 1e-10 && we <= 1e-15,
            fmt("PSNR error %.1e, SSIM vs window oracle %.1e, Wilcoxon p %.5f", pe, se, wp)};
}

// 11 --------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    ExperimentConfig cfg;
    cfg.n_pairs = 300;
    cfg.schedule.T = 16;
    cfg.net.kind = NetKind::Mlp;
    cfg.train.steps = 10;
    cfg.train.batch_size = 32;
    cfg.seed = 77;
    cfg.out_dir = scratch("determinism").string();
    const auto ds = make_synthetic_pairs(cfg.task, 300, cfg.seed);
    const std::string first = slurp(train(cfg, ds).checkpoint);
    const std::string second = slurp(train(cfg, ds).checkpoint);

    const Checkpoint ck = load_checkpoint(fs::path(cfg.out_dir) / "checkpoint.brck");
    const auto [x0, y] = ds.subset(Split::Test);
    SamplerOptions so = cfg.effective_sampler();
    so.seed = 5;
    const ScheduleTable table = build_schedule(cfg.effective_schedule());
    const auto s1 = synthesize(ck.state.generator, y, table, so, false);
    const auto s2 = synthesize(ck.state.generator, y, table, so, false);
    fs::remove_all(cfg.out_dir);
    const bool ck_same = !first.empty() && first == second;
    const bool s_same = s1.x0 == s2.x0;
    return {ck_same && s_same, fmt("checkpoints (%zu bytes) %s, samples %s", first.size(),
                                   ck_same ? "identical" : "DIFFER", s_same ? "identical" : "DIFFER")};
}

struct Criterion {
    int id;
    const char* title;
    double budget_s;  // <= 0: no runtime bound
    bool soft;
    Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "schedule invariants", 1.0, false, schedule_invariants},
        {2, "posterior oracle equivalence", 10.0, false, posterior_oracles},
        {3, "Markov/marginal consistency", 30.0, false, markov_consistency},
        {4, "oracle-generator round trip", 1.0, false, oracle_round_trip},
        {5, "self-consistency convergence", 1.0, false, contraction},
        {6, "gradient checks", 30.0, false, gradient_checks},
        {7, "loss unit values", 0.0, false, loss_values},
        {8, "toy training (gauss2gauss)", 600.0, false, toy_training},
        {9, "ablation direction (shapes16)", 3600.0, true, ablations},
        {10, "metrics", 0.0, false, metric_values},
        {11, "determinism", 0.0, false, determinism},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int hard_failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass && !c.soft) ++hard_failures;
        std::string timing = fmt("%.2f s", secs);
        if (c.budget_s > 0.0) timing += fmt(" of %.0f s budget%s", c.budget_s, in_time ? "" : ", OVER BUDGET");
        std::printf("criterion %d: %s%s  %s: %s (%s)\n", c.id, pass ? "PASS" : "FAIL", c.soft ? " [soft]" : "",
                    c.title, o.detail.c_str(), timing.c_str());
        std::fflush(stdout);
    }
    return hard_failures == 0 ? 0 : 1;
}
