#include "istar/train.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "istar/checkpoint.hpp"
#include "istar/image.hpp"

namespace istar {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (!(lr0 > 0)) throw InputError("train.lr0 must be > 0");
    if (halve_every < 1) throw InputError("train.halve_every must be >= 1");
    if (steps_per_epoch < 1) throw InputError("train.steps_per_epoch must be >= 1");
    if (batch < 1) throw InputError("train.batch must be >= 1");
    if (patch < 1) throw InputError("train.patch must be >= 1");
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
    return config.lr0 * std::ldexp(1.0, -static_cast<int>(epoch / config.halve_every));
}

std::string format_loss_row(const LossRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%llu,%llu,%.17g,%.9g", static_cast<unsigned long long>(r.step),
                  static_cast<unsigned long long>(r.epoch), r.lr, static_cast<double>(r.loss));
    return buf;
}

std::uint64_t checkpoint_next_step(const Checkpoint& ck) {
    const auto& v = ck.meta_value("train.next_step");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw InputError("checkpoint: bad train.next_step '" + v + "'");
    }
}

namespace {

// Keeps the header and rows with step < next_step, so a resumed run appends
// where the checkpoint left off.
void prepare_loss_log(const fs::path& path, std::uint64_t next_step) {
    std::vector<std::string> keep{kLossHeader};
    if (next_step > 0 && fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (std::stoull(line.substr(0, line.find(','))) < next_step) keep.push_back(line);
        }
    }
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

} // namespace

std::vector<LossRecord> train(IstarModel<float>& model, const std::vector<ImagePair>& data,
                              const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    if (data.empty()) throw InputError("train: dataset is empty");
    if (data.front().scale != model.config().scale)
        throw ConfigMismatch("train: dataset scale " + std::to_string(data.front().scale) +
                             " differs from model scale " + std::to_string(model.config().scale));

    const std::uint64_t stop = options.stop_step ? options.stop_step : config.total_steps();
    PatchSampler sampler(config.patch, config.seed, config.augment);
    sampler.set_next_step(options.start_step);

    std::ofstream log;
    fs::path dir;
    if (!options.out_dir.empty()) {
        dir = options.out_dir;
        fs::create_directories(dir);
        prepare_loss_log(dir / "loss.csv", options.start_step);
        log.open(dir / "loss.csv", std::ios::app);
    }
    auto save = [&](std::uint64_t next_step, const std::string& name) {
        save_checkpoint((dir / name).string(), model.config(), model.params(), true,
                        {{"train.next_step", std::to_string(next_step)}, {"train.seed", std::to_string(config.seed)}});
    };

    std::vector<LossRecord> records;
    for (std::uint64_t s = options.start_step; s < stop; ++s) {
        const Batch batch = sampler.sample_batch(data, config.batch);
        LossRecord rec;
        rec.step = s;
        rec.epoch = s / config.steps_per_epoch;
        rec.lr = learning_rate(config, rec.epoch);
        {
            Graph<float> g;
            Var input = g.constant(batch.lr, "lr_batch");
            Var target = g.constant(batch.hr, "hr_batch");
            Var loss = g.l1_loss(model.forward(g, input), target, "loss");
            rec.loss = g.value(loss)[0];
            g.backward(loss);
        }
        adam_step(model.params(), rec.lr, config.adam);
        model.project_constraints();
        records.push_back(rec);

        if (log.is_open()) log << format_loss_row(rec) << '\n' << std::flush;
        if (options.on_step) options.on_step(rec);
        if (!dir.empty() && config.checkpoint_every && (s + 1) % config.checkpoint_every == 0)
            save(s + 1, "ckpt_step" + std::to_string(s + 1) + ".istar");
    }
    if (!dir.empty()) save(stop, "last.istar");
    return records;
}

Upscaler bicubic_upscaler(std::size_t scale) {
    return [scale](const Tensor& lr) { return bicubic_resize(lr, lr.dim(1) * scale, lr.dim(2) * scale); };
}

Upscaler model_upscaler(const IstarModel<float>& model) {
    return [&model](const Tensor& lr) {
        const Tensor out = model.infer(lr.reshaped(Shape{1, lr.dim(0), lr.dim(1), lr.dim(2)}));
        return out.reshaped(Shape{out.dim(1), out.dim(2), out.dim(3)});
    };
}

EvalReport evaluate(const Upscaler& upscale, const std::vector<ImagePair>& data, std::size_t scale, ColorMode mode,
                    std::size_t threads) {
    EvalReport report;
    report.shave = scale;
    report.mode = mode;
    report.images.resize(data.size());
    std::vector<std::exception_ptr> errors(data.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < data.size(); i = next++) {
            try {
                const Tensor sr = quantize_8bit(upscale(data[i].lr));
                sr.ensure_finite("output for '" + data[i].source + "'");
                const Tensor hr = quantize_8bit(data[i].hr);
                report.images[i] = {data[i].source, psnr(sr, hr, scale, mode), ssim(sr, hr, scale, mode)};
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(threads, data.size()));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (const auto& s : report.images) {
        report.mean_psnr += s.psnr_db;
        report.mean_ssim += s.ssim;
    }
    if (!data.empty()) {
        report.mean_psnr /= static_cast<double>(data.size());
        report.mean_ssim /= static_cast<double>(data.size());
    }
    return report;
}

void write_eval_csv(const EvalReport& report, std::ostream& out) {
    out << "image,psnr_db,ssim\n" << std::setprecision(10);
    for (const auto& s : report.images) out << s.image << ',' << s.psnr_db << ',' << s.ssim << '\n';
    out << "mean," << report.mean_psnr << ',' << report.mean_ssim << '\n';
}

std::size_t threads_from_env() {
    if (const char* v = std::getenv("ISTAR_THREADS")) {
        try {
            const long n = std::stol(v);
            if (n >= 1) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
        throw InputError(std::string("ISTAR_THREADS must be a positive integer, got '") + v + "'");
    }
    return 1;
}

} // namespace istar
