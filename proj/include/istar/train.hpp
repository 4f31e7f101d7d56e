#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "istar/checkpoint.hpp"
#include "istar/dataset.hpp"
#include "istar/metrics.hpp"
#include "istar/model.hpp"

namespace istar {

struct TrainConfig {
    double lr0 = 1e-4;
    /// Learning rate halves every this many epochs.
    std::size_t halve_every = 200;
    /// An "epoch" is a fixed number of optimizer steps.
    std::size_t steps_per_epoch = 1;
    std::size_t epochs = 1000;
    std::size_t batch = 16;
    std::size_t patch = 48;
    std::uint64_t seed = 0;
    /// Write a checkpoint every this many steps; 0 disables periodic checkpoints.
    std::size_t checkpoint_every = 0;
    bool augment = true;
    AdamOptions adam{};

    std::size_t total_steps() const { return epochs * steps_per_epoch; }
    void validate() const;
};

/// lr0 * 0.5^floor(epoch / halve_every).
double learning_rate(const TrainConfig& config, std::size_t epoch);

struct LossRecord {
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;
    double lr = 0;
    float loss = 0;
};

/// "step,epoch,lr,loss" with round-trip precision.
std::string format_loss_row(const LossRecord& r);
inline constexpr const char* kLossHeader = "step,epoch,lr,loss";

struct TrainOptions {
    /// Directory for loss.csv and checkpoints; empty keeps everything in memory.
    std::string out_dir;
    /// First step to run (non-zero when resuming).
    std::uint64_t start_step = 0;
    /// Stop after this step count instead of config.total_steps() (0 = no override).
    std::uint64_t stop_step = 0;
    std::function<void(const LossRecord&)> on_step;
};

/**
 * Single-threaded l1/Adam training. Step s uses the sampler batch with index
 * s and the learning rate of epoch s / steps_per_epoch. Checkpoints carry the
 * optimizer moments and the next step index so a resumed run continues
 * exactly where the original would have been.
 */
std::vector<LossRecord> train(IstarModel<float>& model, const std::vector<ImagePair>& data,
                              const TrainConfig& config, const TrainOptions& options = {});

/// Checkpoint metadata written by train(): train.next_step and train.seed.
std::uint64_t checkpoint_next_step(const Checkpoint& ck);

struct ImageScore {
    std::string image;
    double psnr_db = 0;
    double ssim = 0;
};

struct EvalReport {
    std::vector<ImageScore> images;
    double mean_psnr = 0;
    double mean_ssim = 0;
    std::size_t shave = 0;
    ColorMode mode = ColorMode::Y;
};

/// LR [3,h,w] -> SR [3,rh,rw] (unclipped).
using Upscaler = std::function<Tensor(const Tensor&)>;

Upscaler bicubic_upscaler(std::size_t scale);
Upscaler model_upscaler(const IstarModel<float>& model);

/**
 * Runs the upscaler on every pair, clips and quantizes to 8 bits, then scores
 * with shave = scale. Images are processed by up to `threads` workers; the
 * report keeps dataset order.
 */
EvalReport evaluate(const Upscaler& upscale, const std::vector<ImagePair>& data, std::size_t scale,
                    ColorMode mode = ColorMode::Y, std::size_t threads = 1);

/// "image,psnr_db,ssim" rows followed by a "mean" row.
void write_eval_csv(const EvalReport& report, std::ostream& out);

/// Worker cap from ISTAR_THREADS (default 1).
std::size_t threads_from_env();

} // namespace istar
