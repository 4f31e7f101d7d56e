#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "istar/tensor.hpp"

namespace istar {

/// Aligned LR/HR sample. hr extents are exactly scale x lr extents.
struct ImagePair {
    Tensor hr;  ///< [3, rH, rW] in [0,1]
    Tensor lr;  ///< [3, H, W] in [0,1]
    std::size_t scale = 1;
    std::string source;
};

/// Center-crops HR to multiples of `scale`, then bicubic-downscales by `scale`.
ImagePair make_pair(const Tensor& hr, std::size_t scale, std::string source = {});

/// Sorted list of `<root>/HR/*.png`.
std::vector<std::string> list_hr_images(const std::string& root);
/// Loads every HR image under `root` and degrades it. Throws InputError when empty.
std::vector<ImagePair> load_dataset(const std::string& root, std::size_t scale);
/// Writes `<root>/LRx{r}/<name>.png` for each pair (cache of the degraded inputs).
void cache_lr(const std::string& root, const std::vector<ImagePair>& pairs);

struct Batch {
    Tensor lr;  ///< [B, 3, p, p]
    Tensor hr;  ///< [B, 3, rp, rp]
};

/**
 * Seeded patch sampler. Picks are numbered q = step * batch + b; pick q uses
 * image perm_e[q mod n] where perm_e is the shuffled order of epoch
 * e = q / n, and a crop offset and dihedral augmentation drawn from a
 * generator keyed by (seed, q). Any batch is therefore a pure function of
 * (seed, step), which makes resumption exact.
 */
class PatchSampler {
public:
    PatchSampler(std::size_t patch = 48, std::uint64_t seed = 0, bool augment = true)
        : patch_(patch), seed_(seed), augment_(augment) {}

    std::size_t patch() const noexcept { return patch_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_step() const noexcept { return next_step_; }
    void set_next_step(std::uint64_t s) noexcept { next_step_ = s; }

    /// Batch number `step`; does not touch the cursor.
    Batch batch_at(const std::vector<ImagePair>& pairs, std::size_t batch, std::uint64_t step) const;
    /// Batch at the cursor, then advances it.
    Batch sample_batch(const std::vector<ImagePair>& pairs, std::size_t batch);

private:
    std::size_t patch_;
    std::uint64_t seed_;
    bool augment_;
    std::uint64_t next_step_ = 0;
};

/// Applies rotation by 90 * k degrees (counter-clockwise) then, if flip, a horizontal mirror.
Tensor dihedral(const Tensor& chw, int rotations, bool flip);

/// Deterministic synthetic HR images: gradients, checkerboards, stripes, rings, blobs.
std::vector<Tensor> synth_corpus(std::size_t count, std::size_t size, std::uint64_t seed);
/// Writes synth_corpus into `<root>/HR/img_NNN.png`.
void write_synth_corpus(const std::string& root, std::size_t count, std::size_t size, std::uint64_t seed);

} // namespace istar
