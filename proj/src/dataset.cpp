#include "istar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "istar/image.hpp"

namespace istar {

namespace fs = std::filesystem;

namespace {

// splitmix64: portable and cheap to key by (seed, index).
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

std::uint64_t mix_key(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    SplitMix m{seed ^ (tag * 0xD1B54A32D192ED03ULL)};
    m.state ^= index * 0x8CB92BA72F3D8DD7ULL;
    return m.next();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix rng{mix_key(seed, 1, epoch)};
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

} // namespace

ImagePair make_pair(const Tensor& hr, std::size_t scale, std::string source) {
    if (hr.rank() != 3 || hr.dim(0) != 3) throw ShapeError("make_pair expects a [3,H,W] image");
    if (scale < 1) throw InputError("make_pair: scale must be >= 1");
    const std::size_t H = hr.dim(1) / scale * scale, W = hr.dim(2) / scale * scale;
    if (H < 4 * scale || W < 4 * scale) throw ShapeError("make_pair: image too small for scale");
    ImagePair p;
    p.hr = crop(hr, (hr.dim(1) - H) / 2, (hr.dim(2) - W) / 2, H, W);
    p.lr = scale == 1 ? p.hr : bicubic_resize(p.hr, H / scale, W / scale);
    for (auto& v : p.lr.data()) v = std::clamp(v, 0.0f, 1.0f);
    p.scale = scale;
    p.source = std::move(source);
    return p;
}

std::vector<std::string> list_hr_images(const std::string& root) {
    const fs::path dir = fs::path(root) / "HR";
    if (!fs::is_directory(dir)) throw InputError("dataset: missing directory '" + dir.string() + "'");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<ImagePair> load_dataset(const std::string& root, std::size_t scale) {
    std::vector<ImagePair> pairs;
    for (const auto& f : list_hr_images(root)) pairs.push_back(make_pair(load_png(f), scale, fs::path(f).stem().string()));
    if (pairs.empty()) throw InputError("dataset '" + root + "' contains no HR images");
    return pairs;
}

void cache_lr(const std::string& root, const std::vector<ImagePair>& pairs) {
    if (pairs.empty()) return;
    const fs::path dir = fs::path(root) / ("LRx" + std::to_string(pairs.front().scale));
    fs::create_directories(dir);
    for (const auto& p : pairs) save_png(p.lr, (dir / (p.source + ".png")).string());
}

Tensor dihedral(const Tensor& chw, int rotations, bool flip) {
    Tensor cur = chw;
    for (int r = 0; r < ((rotations % 4) + 4) % 4; ++r) {
        const std::size_t C = cur.dim(0), H = cur.dim(1), W = cur.dim(2);
        Tensor next(Shape{C, W, H});
        // counter-clockwise: out(y, x) = in(x, W - 1 - y)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < W; ++y)
                for (std::size_t x = 0; x < H; ++x) next[(c * W + y) * H + x] = cur[(c * H + x) * W + (W - 1 - y)];
        cur = std::move(next);
    }
    if (flip) {
        const std::size_t C = cur.dim(0), H = cur.dim(1), W = cur.dim(2);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y) {
                float* row = cur.ptr() + (c * H + y) * W;
                std::reverse(row, row + W);
            }
    }
    return cur;
}

Batch PatchSampler::batch_at(const std::vector<ImagePair>& pairs, std::size_t batch, std::uint64_t step) const {
    if (pairs.empty()) throw InputError("sample_batch: empty dataset");
    if (batch == 0) throw InputError("sample_batch: batch must be >= 1");
    const std::size_t r = pairs.front().scale;
    const std::size_t p = patch_, hp = patch_ * r;
    for (const auto& pr : pairs) {
        if (pr.scale != r) throw InputError("sample_batch: mixed scales in dataset");
        if (pr.lr.dim(1) < p || pr.lr.dim(2) < p)
            throw InputError("sample_batch: image '" + pr.source + "' smaller than the " + std::to_string(p) + " px patch");
    }
    Batch out{Tensor(Shape{batch, 3, p, p}), Tensor(Shape{batch, 3, hp, hp})};
    const std::size_t n = pairs.size();
    std::uint64_t cached_epoch = ~0ULL;
    std::vector<std::size_t> order;
    for (std::size_t b = 0; b < batch; ++b) {
        const std::uint64_t q = step * batch + b;
        const std::uint64_t epoch = q / n;
        if (epoch != cached_epoch) {
            order = epoch_order(n, seed_, epoch);
            cached_epoch = epoch;
        }
        const ImagePair& pr = pairs[order[q % n]];
        SplitMix rng{mix_key(seed_, 2, q)};
        const std::size_t top = rng.below(pr.lr.dim(1) - p + 1);
        const std::size_t left = rng.below(pr.lr.dim(2) - p + 1);
        Tensor lr = crop(pr.lr, top, left, p, p);
        Tensor hr = crop(pr.hr, top * r, left * r, hp, hp);
        if (augment_) {
            const auto code = rng.below(8);
            lr = dihedral(lr, static_cast<int>(code % 4), code >= 4);
            hr = dihedral(hr, static_cast<int>(code % 4), code >= 4);
        }
        std::copy(lr.data().begin(), lr.data().end(), out.lr.ptr() + b * lr.numel());
        std::copy(hr.data().begin(), hr.data().end(), out.hr.ptr() + b * hr.numel());
    }
    return out;
}

Batch PatchSampler::sample_batch(const std::vector<ImagePair>& pairs, std::size_t batch) {
    Batch b = batch_at(pairs, batch, next_step_);
    ++next_step_;
    return b;
}

std::vector<Tensor> synth_corpus(std::size_t count, std::size_t size, std::uint64_t seed) {
    constexpr double pi = std::numbers::pi;
    std::vector<Tensor> images;
    for (std::size_t k = 0; k < count; ++k) {
        SplitMix rng{mix_key(seed, 3, k)};
        Tensor img(Shape{3, size, size});
        // Two colors whose luma differs by at least 0.3, so edges show up in Y metrics.
        double c0[3], c1[3];
        auto luma = [](const double* c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };
        do {
            for (int c = 0; c < 3; ++c) {
                c0[c] = rng.uniform(0.05, 0.95);
                c1[c] = rng.uniform(0.05, 0.95);
            }
        } while (std::abs(luma(c0) - luma(c1)) < 0.3);
        const double angle = rng.uniform(0, pi);
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double period = rng.uniform(5.0, 18.0);
        const double phase = rng.uniform(0, 2 * pi);
        const double cx = rng.uniform(0.3, 0.7) * size, cy = rng.uniform(0.3, 0.7) * size;
        struct Disk { double x, y, rad, col[3]; };
        std::vector<Disk> disks(4 + rng.below(5));
        for (auto& d : disks) {
            d.x = rng.uniform(0, size);
            d.y = rng.uniform(0, size);
            d.rad = rng.uniform(0.05, 0.25) * size;
            for (auto& v : d.col) v = rng.uniform(0.0, 1.0);
        }
        double waves[4][3];
        for (auto& w : waves) {
            w[0] = rng.uniform(0.02, 0.3);
            w[1] = rng.uniform(0.02, 0.3);
            w[2] = rng.uniform(0, 2 * pi);
        }
        const std::size_t kind = k % 6;
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const double fx = static_cast<double>(x), fy = static_cast<double>(y);
                const double along = fx * ca + fy * sa, across = -fx * sa + fy * ca;
                double t = 0;  // blend factor between c0 and c1
                switch (kind) {
                    case 0:  // gradient with a hard diagonal edge
                        t = 0.7 * fx / size + (along > cx ? 0.3 : 0.0);
                        break;
                    case 1:  // rotated checkerboard
                        t = ((static_cast<long>(std::floor(along / period)) + static_cast<long>(std::floor(across / period))) & 1) ? 1.0 : 0.0;
                        break;
                    case 2:  // smooth stripes
                        t = 0.5 + 0.5 * std::sin(2 * pi * along / period + phase);
                        break;
                    case 3:  // hard rings
                        t = std::sin(2 * pi * std::hypot(fx - cx, fy - cy) / period + phase) > 0 ? 1.0 : 0.0;
                        break;
                    case 4:  // square-wave stripes
                        t = std::sin(2 * pi * along / period + phase) > 0 ? 1.0 : 0.0;
                        break;
                    default: {  // sum of sinusoids
                        double acc = 0;
                        for (const auto& w : waves) acc += std::sin(w[0] * fx + w[1] * fy + w[2]);
                        t = 0.5 + 0.125 * acc;
                    }
                }
                for (std::size_t c = 0; c < 3; ++c) {
                    double v = c0[c] + (c1[c] - c0[c]) * t;
                    if (kind == 0 || kind == 2 || kind == 5) {
                        for (const auto& d : disks)
                            if (std::hypot(fx - d.x, fy - d.y) < d.rad) v = d.col[c];
                    }
                    img[(c * size + y) * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
        images.push_back(quantize_8bit(img));
    }
    return images;
}

void write_synth_corpus(const std::string& root, std::size_t count, std::size_t size, std::uint64_t seed) {
    const fs::path dir = fs::path(root) / "HR";
    fs::create_directories(dir);
    const auto images = synth_corpus(count, size, seed);
    for (std::size_t k = 0; k < images.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%03zu.png", k);
        save_png(images[k], (dir / name).string());
    }
}

} // namespace istar
