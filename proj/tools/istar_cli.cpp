// Command-line entry point: ista-solve, train, eval, infer, gradcheck, params, make-dataset.
//
// Exit codes: 0 success, 2 input/parse error, 3 config/checkpoint mismatch,
// 4 numeric failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "istar/checkpoint.hpp"
#include "istar/gradcheck.hpp"
#include "istar/image.hpp"
#include "istar/ista_solver.hpp"
#include "istar/run_config.hpp"
#include "istar/train.hpp"

namespace fs = std::filesystem;
using namespace istar;

namespace {

constexpr double kReferenceParams = 5.05e6;

struct ConfigArgs {
    std::string file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", file, "key=value configuration file");
        cmd->add_option("--set", sets, "override, e.g. --set model.channels=16")->allow_extra_args(false);
        cmd->add_option("--seed", seed, "seed for every stochastic choice (train.seed)");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!file.empty()) cfg.merge_file(file);
        for (const auto& s : sets) cfg.set_assignment(s);
        if (seed) cfg.set("train.seed", std::to_string(*seed));
        return cfg;
    }
};

std::string default_run_dir(std::uint64_t seed) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream os;
    os << "runs/" << std::put_time(&tm, "%Y%m%d-%H%M%S") << "_seed" << seed;
    return os.str();
}

void require_same_model(const ModelConfig& ck, const ModelConfig& want) {
    auto field = [](const char* name, std::size_t a, std::size_t b) {
        if (a != b)
            throw ConfigMismatch(std::string("checkpoint ") + name + "=" + std::to_string(a) + " but configuration asks for " +
                                 std::to_string(b));
    };
    field("model.scale", ck.scale, want.scale);
    field("model.channels", ck.channels, want.channels);
    field("model.iterations", ck.iterations, want.iterations);
    field("model.st_channels", ck.resolved_st_channels(), want.resolved_st_channels());
    field("model.colors", ck.colors, want.colors);
}

int cmd_ista_solve(const std::string& path, std::optional<double> alpha, std::optional<double> lambda,
                   std::optional<std::size_t> max_iters, std::optional<double> tol, const std::string& trace_out) {
    auto problem = ista::read_problem_file(path);
    if (lambda) {
        problem.lambda = *lambda;
        problem.validate();
    }
    ista::IstaSolverConfig cfg;
    if (alpha) cfg.alpha = *alpha;
    if (max_iters) cfg.max_iters = *max_iters;
    if (tol) cfg.tol = *tol;
    const auto result = ista::solve(problem, cfg);

    std::cout << std::setprecision(12);
    std::cout << "alpha " << result.trace.alpha << "\n";
    std::cout << "iterations " << result.trace.iterations << (result.trace.converged ? " (converged)" : " (budget exhausted)")
              << "\n";
    std::cout << "objective " << result.trace.objectives.back() << "\n";
    std::cout << "fixed_point " << (ista::check_fixed_point(problem, result.solution, result.trace.alpha) ? "yes" : "no")
              << "\n";
    std::cout << "solution";
    for (double v : result.solution) std::cout << ' ' << v;
    std::cout << "\n";
    if (!trace_out.empty()) {
        std::ofstream out(trace_out);
        if (!out) throw InputError("cannot write trace '" + trace_out + "'");
        ista::write_trace_csv(result.trace, out);
    }
    return 0;
}

int cmd_train(const ConfigArgs& args, std::string out_dir, const std::string& resume, const std::string& data_root,
              std::optional<std::uint64_t> steps) {
    RunConfig cfg = args.resolve();
    if (!data_root.empty()) cfg.set("data.root", data_root);
    const ModelConfig mc = cfg.model_config();
    const TrainConfig tc = cfg.train_config();
    if (out_dir.empty()) out_dir = default_run_dir(tc.seed);
    fs::create_directories(out_dir);
    cfg.write((fs::path(out_dir) / "config.txt").string());

    const auto data = load_dataset(cfg.get("data.root"), mc.scale);
    if (cfg.get_bool("data.cache_lr")) cache_lr(cfg.get("data.root"), data);

    std::optional<IstarModel<float>> model;
    TrainOptions opts;
    opts.out_dir = out_dir;
    if (!resume.empty()) {
        Checkpoint ck = load_checkpoint(resume);
        require_same_model(ck.config, mc);
        if (!ck.has_optimizer) throw ConfigMismatch("checkpoint '" + resume + "' has no optimizer state to resume from");
        opts.start_step = checkpoint_next_step(ck);
        model.emplace(ck.config, std::move(ck.params));
    } else {
        model.emplace(mc, tc.seed);
    }
    if (steps) opts.stop_step = *steps;
    opts.on_step = [&](const LossRecord& r) {
        if ((r.step + 1) % 50 == 0) std::cerr << "step " << r.step + 1 << " loss " << r.loss << " lr " << r.lr << "\n";
    };
    const auto log = train(*model, data, tc, opts);
    std::cout << "trained steps " << opts.start_step << ".." << (log.empty() ? opts.start_step : log.back().step + 1)
              << " into " << out_dir << "\n";
    if (!log.empty()) std::cout << "final loss " << log.back().loss << "\n";
    return 0;
}

void print_report(const std::string& title, const EvalReport& r) {
    std::cout << title << " (" << color_mode_name(r.mode) << ", shave " << r.shave << ")\n";
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& s : r.images)
        std::cout << "  " << std::left << std::setw(20) << s.image << std::right << std::setw(10) << s.psnr_db << " dB"
                  << std::setw(9) << s.ssim << "\n";
    std::cout << "  " << std::left << std::setw(20) << "mean" << std::right << std::setw(10) << r.mean_psnr << " dB"
              << std::setw(9) << r.mean_ssim << "\n";
    std::cout.unsetf(std::ios::floatfield);
}

int cmd_eval(const std::string& ckpt, const std::string& dataset, std::optional<std::size_t> scale,
             const std::string& mode_text, const std::string& csv, bool baseline) {
    Checkpoint ck = load_checkpoint(ckpt);
    if (scale && *scale != ck.config.scale)
        throw ConfigMismatch("checkpoint is x" + std::to_string(ck.config.scale) + " but --scale " + std::to_string(*scale));
    const ColorMode mode = parse_color_mode(mode_text);
    IstarModel<float> model(ck.config, std::move(ck.params));
    const auto data = load_dataset(dataset, model.config().scale);
    const auto threads = threads_from_env();

    const auto report = evaluate(model_upscaler(model), data, model.config().scale, mode, threads);
    print_report("ISTAR", report);
    if (baseline) print_report("bicubic", evaluate(bicubic_upscaler(model.config().scale), data, model.config().scale, mode, threads));
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw InputError("cannot write '" + csv + "'");
        write_eval_csv(report, out);
    }
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& in_png, const std::string& out_png,
              const std::string& side_by_side, const std::string& hr_png) {
    Checkpoint ck = load_checkpoint(ckpt);
    IstarModel<float> model(ck.config, std::move(ck.params));
    const Tensor lr = load_png(in_png);
    const Tensor sr = model_upscaler(model)(lr);
    save_png(sr, out_png);
    std::cout << "wrote " << out_png << " (" << sr.dim(1) << "x" << sr.dim(2) << ")\n";
    if (!side_by_side.empty()) {
        std::vector<Tensor> panels{bicubic_upscaler(model.config().scale)(lr), sr};
        if (!hr_png.empty()) {
            Tensor hr = load_png(hr_png);
            if (hr.dim(1) != sr.dim(1) || hr.dim(2) != sr.dim(2))
                hr = crop(hr, (hr.dim(1) - sr.dim(1)) / 2, (hr.dim(2) - sr.dim(2)) / 2, sr.dim(1), sr.dim(2));
            panels.push_back(hr);
        }
        save_png(hconcat(panels), side_by_side);
        std::cout << "wrote " << side_by_side << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::size_t size, std::size_t iterations, std::size_t channels, std::size_t scale, std::uint64_t seed,
                  double eps) {
    ModelConfig mc;
    mc.scale = scale;
    mc.channels = channels;
    mc.iterations = iterations;
    const auto r = model_grad_check(mc, size, seed, eps);
    std::cout << "coordinates checked " << r.checked << ", kink-adjacent skipped " << r.skipped_kink << "\n";
    std::cout << "max relative error " << std::scientific << r.max_rel_error << " at " << r.worst_param << "["
              << r.worst_index << "]\n";
    const bool pass = r.max_rel_error < 1e-4 && r.checked > 0;
    std::cout << (pass ? "PASS" : "FAIL") << " (threshold 1e-4)\n";
    return pass ? 0 : 4;
}

int cmd_params(const ConfigArgs& args, std::size_t height, std::size_t width) {
    const ModelConfig mc = args.resolve().model_config();
    std::map<std::string, std::size_t> groups;
    std::vector<std::string> order;
    std::size_t block0 = 0;
    std::map<std::string, std::size_t> block0_units;
    std::vector<std::string> unit_order;
    for (const auto& l : istar_layout(mc)) {
        std::string group = l.name.substr(0, l.name.find('.'));
        if (group == "blocks") {
            const auto rest = l.name.substr(7);
            const auto dot = rest.find('.');
            if (rest.substr(0, dot) == "0") {
                block0 += l.param_count();
                const auto unit = rest.substr(dot + 1, rest.find('.', dot + 1) - dot - 1);
                if (!block0_units.count(unit)) unit_order.push_back(unit);
                block0_units[unit] += l.param_count();
            }
        }
        if (!groups.count(group)) order.push_back(group);
        groups[group] += l.param_count();
    }
    const std::size_t total = count_params(mc);
    std::cout << mc.to_text();
    std::cout << "per ISTA block " << block0 << "\n";
    for (const auto& u : unit_order) std::cout << "  " << u << " " << block0_units[u] << "\n";
    for (const auto& g : order) std::cout << g << " " << groups[g] << "\n";
    std::cout << "total " << total << "\n";
    std::cout << std::fixed << std::setprecision(3) << "total_millions " << total / 1e6 << " (reference 5.05 M, deviation "
              << std::showpos << 100.0 * (static_cast<double>(total) - kReferenceParams) / kReferenceParams << std::noshowpos
              << "%)\n";
    std::cout << "macs " << estimate_macs(mc, height, width) << " for " << height << "x" << width << " LR input ("
              << estimate_macs(mc, height, width) / 1e9 << " G)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ISTA-inspired super-resolution toolkit"};
    app.require_subcommand(1);

    auto* solve = app.add_subcommand("ista-solve", "run classical ISTA on a matrix problem file");
    std::string problem_path, trace_out;
    std::optional<double> alpha, lambda, tol;
    std::optional<std::size_t> max_iters;
    solve->add_option("problem", problem_path, "problem file")->required();
    solve->add_option("--alpha", alpha, "step size (default 0.99/L)");
    solve->add_option("--lambda", lambda, "override the l1 weight from the file");
    solve->add_option("--max-iters", max_iters, "iteration budget");
    solve->add_option("--tol", tol, "relative objective decrease stopping threshold");
    solve->add_option("--trace-out", trace_out, "write iter,objective,residual CSV");

    auto* train_cmd = app.add_subcommand("train", "train ISTAR with l1 loss and Adam");
    ConfigArgs train_args;
    train_args.attach(train_cmd);
    std::string out_dir, resume, data_root;
    std::optional<std::uint64_t> steps;
    train_cmd->add_option("--out-dir", out_dir, "run directory (default runs/<timestamp>_seed<seed>)");
    train_cmd->add_option("--resume", resume, "checkpoint with optimizer state");
    train_cmd->add_option("--data", data_root, "dataset root (overrides data.root)");
    train_cmd->add_option("--steps", steps, "stop after this many total steps");

    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint on <root>/HR");
    std::string eval_ckpt, eval_root, eval_mode = "Y", eval_csv;
    std::optional<std::size_t> eval_scale;
    bool baseline = false;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
    eval_cmd->add_option("--dataset", eval_root, "dataset root")->required();
    eval_cmd->add_option("--scale", eval_scale, "expected scale; must match the checkpoint");
    eval_cmd->add_option("--mode", eval_mode, "Y or RGB");
    eval_cmd->add_option("--csv", eval_csv, "write image,psnr_db,ssim CSV");
    eval_cmd->add_flag("--baseline", baseline, "also report bicubic");

    auto* infer_cmd = app.add_subcommand("infer", "upscale one PNG");
    std::string infer_ckpt, in_png, out_png, side_png, hr_png;
    infer_cmd->add_option("--ckpt", infer_ckpt, "checkpoint")->required();
    infer_cmd->add_option("input", in_png, "LR PNG")->required();
    infer_cmd->add_option("output", out_png, "SR PNG")->required();
    infer_cmd->add_option("--side-by-side", side_png, "write bicubic|model|HR comparison PNG");
    infer_cmd->add_option("--hr", hr_png, "ground-truth PNG for the comparison");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the tiny double-precision model");
    std::size_t gc_size = 8, gc_iters = 1, gc_channels = 4, gc_scale = 2;
    std::uint64_t gc_seed = 0;
    double gc_eps = 1e-4;
    grad_cmd->add_option("--size", gc_size, "input extent");
    grad_cmd->add_option("--iters", gc_iters, "ISTA blocks K");
    grad_cmd->add_option("--channels", gc_channels, "feature width");
    grad_cmd->add_option("--scale", gc_scale, "upscaling factor");
    grad_cmd->add_option("--seed", gc_seed, "seed");
    grad_cmd->add_option("--eps", gc_eps, "central-difference step");

    auto* params_cmd = app.add_subcommand("params", "parameter count and MAC estimate");
    ConfigArgs params_args;
    params_args.attach(params_cmd);
    std::size_t macs_h = 48, macs_w = 48;
    params_cmd->add_option("--height", macs_h, "LR height for the MAC estimate");
    params_cmd->add_option("--width", macs_w, "LR width for the MAC estimate");

    auto* make_cmd = app.add_subcommand("make-dataset", "write the synthetic mini-corpus to <out>/HR");
    std::string make_out;
    std::size_t make_count = 20, make_size = 128;
    std::uint64_t make_seed = 0;
    make_cmd->add_option("--out", make_out, "dataset root")->required();
    make_cmd->add_option("--count", make_count, "number of images");
    make_cmd->add_option("--size", make_size, "image extent in pixels");
    make_cmd->add_option("--seed", make_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*solve) return cmd_ista_solve(problem_path, alpha, lambda, max_iters, tol, trace_out);
        if (*train_cmd) return cmd_train(train_args, out_dir, resume, data_root, steps);
        if (*eval_cmd) return cmd_eval(eval_ckpt, eval_root, eval_scale, eval_mode, eval_csv, baseline);
        if (*infer_cmd) return cmd_infer(infer_ckpt, in_png, out_png, side_png, hr_png);
        if (*grad_cmd) return cmd_gradcheck(gc_size, gc_iters, gc_channels, gc_scale, gc_seed, gc_eps);
        if (*params_cmd) return cmd_params(params_args, macs_h, macs_w);
        if (*make_cmd) {
            write_synth_corpus(make_out, make_count, make_size, make_seed);
            std::cout << "wrote " << make_count << " images to " << make_out << "/HR\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
