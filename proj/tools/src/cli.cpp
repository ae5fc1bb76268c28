#include "bridgekit/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "bridgekit/config.hpp"
#include "bridgekit/data.hpp"
#include "bridgekit/metrics.hpp"
#include "bridgekit/schedule.hpp"
#include "bridgekit/training.hpp"

namespace bridgekit::cli {

namespace fs = std::filesystem;

namespace {

struct DataMakeArgs {
    std::string task = "gauss2gauss";
    long n = 2000;
    std::uint64_t seed = 0;
    std::string out;
};

struct ScheduleArgs {
    int T = 1000;
    double gamma = 2.2;
    std::string variant = "selfrdb";
    std::string out;
};

struct TrainArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out_dir;
    std::string resume;
};

struct SampleArgs {
    std::string checkpoint, input, output;
    std::optional<int> T;
    std::optional<double> rel_tol;
    std::optional<int> r_max;
    std::optional<std::uint64_t> seed;
    bool emit_trajectory = false;
};

struct EvalArgs {
    std::string ref, test, report, baseline;
    std::string normalization = "auto";
};

struct VerifyArgs {
    std::vector<std::string> suites;
    bool quiet = false;
};

void apply_sets(ExperimentConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(ErrorCategory::Usage, "--set expects key=value, got '" + s + "'");
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t");
            const auto e = v.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
        };
        set_config_key(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
}

void cmd_data_make(const DataMakeArgs& a, std::ostream& out) {
    if (a.n <= 0) fail(ErrorCategory::Usage, "--n must be positive");
    const auto ds = make_synthetic_pairs(parse_task(a.task), static_cast<std::size_t>(a.n), a.seed);
    save_dataset(a.out, ds);
    // Convenience copies of the test split for sample/eval.
    const auto [x0, y] = ds.subset(Split::Test);
    save_tensor(a.out + ".test.x0.brtk", x0);
    save_tensor(a.out + ".test.y.brtk", y);
    out << "wrote " << a.n << " pairs of shape " << shape_string(Shape(ds.x0.shape().begin() + 1, ds.x0.shape().end()))
        << " to " << a.out << ".{x0,y,split}.brtk (" << x0.batch() << " test pairs in " << a.out
        << ".test.{x0,y}.brtk)\n";
}

void cmd_schedule_export(const ScheduleArgs& a, std::ostream& out) {
    const ScheduleTable table = build_schedule({a.T, a.gamma, parse_variant(a.variant)});
    if (a.out.empty()) {
        export_schedule_csv(table, out);
        return;
    }
    std::ofstream f(a.out);
    if (!f) fail(ErrorCategory::Io, "cannot write '" + a.out + "'");
    export_schedule_csv(table, f);
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
    std::optional<Checkpoint> resume;
    ExperimentConfig cfg;
    if (!a.resume.empty()) {
        resume = load_checkpoint(a.resume);
        cfg = resume->config;
    } else if (!a.config.empty()) {
        cfg = load_config(a.config);
    }
    apply_sets(cfg, a.sets);
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    cfg.validate();

    const PairedDataset ds = cfg.data.empty()
                                 ? make_synthetic_pairs(cfg.task, static_cast<std::size_t>(cfg.n_pairs), cfg.seed)
                                 : load_dataset(cfg.data);
    const long total = planned_steps(cfg.train, ds.indices(Split::Train).size());
    out << "training " << total << " steps into " << cfg.out_dir << '\n';
    const TrainResult res = train(cfg, ds, resume);
    if (!res.history.empty()) {
        const auto& last = res.history.back();
        out << "final loss_g " << last.loss_g << " loss_d " << last.loss_d << " l1 " << last.l1 << '\n';
    }
    out << "checkpoint: " << res.checkpoint.string() << '\n';
}

void cmd_sample(const SampleArgs& a, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    ScheduleConfig sc = ck.config.effective_schedule();
    if (a.T) sc.T = *a.T;
    SamplerOptions opts = ck.config.effective_sampler();
    opts.seed = ck.config.seed;
    if (a.rel_tol) opts.rel_tol = *a.rel_tol;
    if (a.r_max) opts.r_max = ck.config.train.no_self_consistency ? 1 : *a.r_max;
    if (a.seed) opts.seed = *a.seed;
    opts.emit_trajectory = a.emit_trajectory;
    opts.validate();

    const ScheduleTable table = build_schedule(sc);
    const TensorBatch y = load_tensor(a.input);
    const SampleResult res =
        synthesize(ck.state.generator, y, table, opts, ck.config.train.no_source_guidance);
    save_tensor(a.output, res.x0);
    if (a.emit_trajectory) {
        // trajectory holds x_T .. x_0
        const int T = table.T();
        for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
            save_tensor(a.output + ".t" + std::to_string(T - static_cast<int>(k)) + ".brtk", res.trajectory[k]);
        }
    }
    out << "sampled " << y.batch() << " items, " << res.generator_calls << " generator calls, mean recursions "
        << res.mean_recursions << '\n';
}

std::vector<double> read_report_psnr(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::Io, "cannot open '" + path + "'");
    std::vector<double> v;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string idx, p;
        std::getline(ls, idx, ',');
        std::getline(ls, p, ',');
        try {
            v.push_back(p == "inf" ? std::numeric_limits<double>::infinity() : std::stod(p));
        } catch (const std::exception&) {
            fail(ErrorCategory::Format, "baseline report '" + path + "': bad psnr field '" + p + "'");
        }
    }
    return v;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    const TensorBatch ref = load_tensor(a.ref);
    const TensorBatch test = load_tensor(a.test);
    Normalization norm;
    if (a.normalization == "auto") norm = ref.rank() >= 4 ? Normalization::PerImage : Normalization::DataRange;
    else if (a.normalization == "per-image") norm = Normalization::PerImage;
    else if (a.normalization == "data-range") norm = Normalization::DataRange;
    else fail(ErrorCategory::Usage, "--normalization must be auto, per-image or data-range");

    MetricReport rep = evaluate_batch(ref, test, norm);
    if (!a.baseline.empty()) {
        const auto base = read_report_psnr(a.baseline);
        if (base.size() != rep.psnr.size()) {
            fail(ErrorCategory::Shape, "baseline report has " + std::to_string(base.size()) + " rows, expected " +
                                           std::to_string(rep.psnr.size()));
        }
        rep.p_value = wilcoxon_signed_rank(rep.psnr, base).p_value;
    }

    std::ostringstream csv;
    csv << std::setprecision(10) << "index,psnr,ssim\n";
    for (std::size_t i = 0; i < rep.psnr.size(); ++i) {
        csv << i << ',' << rep.psnr[i] << ',';
        if (!rep.ssim.empty()) csv << rep.ssim[i];
        csv << '\n';
    }
    std::ostringstream foot;
    foot << std::setprecision(6) << "# psnr " << rep.psnr_summary.mean << " +- " << rep.psnr_summary.stddev << '\n';
    if (!rep.ssim.empty()) foot << "# ssim " << rep.ssim_summary.mean << " +- " << rep.ssim_summary.stddev << '\n';
    if (rep.aggregate_psnr) foot << "# aggregate_psnr " << *rep.aggregate_psnr << '\n';
    if (rep.p_value) foot << "# p_value " << *rep.p_value << '\n';
    csv << foot.str();

    if (a.report.empty()) {
        out << csv.str();
        return;
    }
    std::ofstream f(a.report);
    if (!f) fail(ErrorCategory::Io, "cannot write '" + a.report + "'");
    f << csv.str();
    out << foot.str();
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    VerifyOptions o;
    if (!a.suites.empty()) {
        o.schedule = o.posterior = o.sampler = false;
        for (const auto& s : a.suites) {
            if (s == "schedule") o.schedule = true;
            else if (s == "posterior") o.posterior = true;
            else if (s == "sampler") o.sampler = true;
            else if (s == "all") o.schedule = o.posterior = o.sampler = true;
            else fail(ErrorCategory::Usage, "unknown verify suite '" + s + "'");
        }
    }
    o.quiet = a.quiet;
    return run_verify(o, out) == 0 ? 0 : 1;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"bridgekit: diffusion-bridge image translation toolkit", "bridgekit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    DataMakeArgs dm;
    auto* data = app.add_subcommand("data", "Synthetic paired datasets");
    data->require_subcommand(1);
    auto* make = data->add_subcommand("make", "Generate a paired dataset bundle");
    make->add_option("--task", dm.task, "gauss2gauss or shapes16")->capture_default_str();
    make->add_option("--n", dm.n, "Number of pairs")->capture_default_str();
    make->add_option("--seed", dm.seed, "Seed")->capture_default_str();
    make->add_option("--out", dm.out, "Output stem")->required();

    ScheduleArgs sa;
    auto* sched = app.add_subcommand("schedule", "Noise schedule tools");
    sched->require_subcommand(1);
    auto* exp = sched->add_subcommand("export", "Write the schedule table as CSV");
    exp->add_option("--T", sa.T, "Number of steps")->capture_default_str();
    exp->add_option("--gamma", sa.gamma, "Endpoint variance scale")->capture_default_str();
    exp->add_option("--variant", sa.variant, "selfrdb or regular")->capture_default_str();
    exp->add_option("--out", sa.out, "Output CSV (stdout when omitted)");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train generator and discriminator");
    tr->add_option("--config", ta.config, "key = value config file");
    tr->add_option("--set", ta.sets, "Override one config key (key=value); repeatable");
    tr->add_option("--out-dir", ta.out_dir, "Run directory (overrides out_dir)");
    tr->add_option("--resume", ta.resume, "Continue from a checkpoint");
    tr->footer("Config keys:\n" + config_key_docs());

    SampleArgs sp;
    auto* sm = app.add_subcommand("sample", "Synthesize targets for a batch of sources");
    sm->add_option("--checkpoint", sp.checkpoint, "Trained checkpoint")->required();
    sm->add_option("--input", sp.input, "Source batch container")->required();
    sm->add_option("--output", sp.output, "Output container")->required();
    sm->add_option("--T", sp.T, "Override number of steps");
    sm->add_option("--rel-tol", sp.rel_tol, "Recursion convergence threshold");
    sm->add_option("--r-max", sp.r_max, "Recursion cap");
    sm->add_option("--seed", sp.seed, "Sampling seed (defaults to the run seed)");
    sm->add_flag("--emit-trajectory", sp.emit_trajectory, "Write <output>.t<k>.brtk per timestep");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "PSNR/SSIM report for a synthesized batch");
    ev->add_option("--ref", ea.ref, "Reference container")->required();
    ev->add_option("--test", ea.test, "Synthesized container")->required();
    ev->add_option("--report", ea.report, "CSV report path (stdout when omitted)");
    ev->add_option("--baseline", ea.baseline, "Earlier report to test against (Wilcoxon signed-rank on PSNR)");
    ev->add_option("--normalization", ea.normalization, "auto, per-image or data-range")->capture_default_str();

    VerifyArgs va;
    auto* vf = app.add_subcommand("verify", "Run the schedule, posterior and sampler oracle suites");
    vf->add_option("suites", va.suites, "schedule, posterior, sampler or all (default all)");
    vf->add_flag("--quiet", va.quiet, "Print failures and the summary only");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        err << app.help("", CLI::AppFormatMode::All) << "\nConfig keys:\n" << config_key_docs();
        return 2;
    }

    try {
        if (*make) cmd_data_make(dm, out);
        else if (*exp) cmd_schedule_export(sa, out);
        else if (*tr) cmd_train(ta, out);
        else if (*sm) cmd_sample(sp, out);
        else if (*ev) cmd_eval(ea, out);
        else if (*vf) return cmd_verify(va, out);
        return 0;
    } catch (const Error& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        err << "error: " << category_name(e.category()) << ": " << msg << '\n';
        if (e.category() == ErrorCategory::Usage || e.category() == ErrorCategory::Config) {
            err << "Config keys:\n" << config_key_docs();
        }
        return e.category() == ErrorCategory::Usage ? 2 : 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << category_name(ErrorCategory::Io) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
        return 1;
    }
}

int run_command(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace bridgekit::cli
