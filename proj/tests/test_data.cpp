#include <doctest.h>

#include <png.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "helpers.hpp"
#include "istar/dataset.hpp"
#include "istar/errors.hpp"
#include "istar/image.hpp"

using namespace istar;
namespace fs = std::filesystem;
using testutil::random_tensor;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("istar_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_raw_png(const std::string& path, unsigned w, unsigned h, const std::vector<unsigned char>& bytes,
                   unsigned format) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = w;
    img.height = h;
    img.format = format;
    REQUIRE(png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr) != 0);
}

// imresize-style antialiased cubic weight, written directly from the formula.
double cubic(double x) {
    const double a = -0.5, t = std::abs(x);
    if (t <= 1) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
    if (t < 2) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
    return 0;
}

double weight(std::size_t out_idx, long in_idx, double scale) {
    const double u = (double(out_idx) + 1) / scale + 0.5 * (1 - 1 / scale);  // 1-based input coordinate
    const double d = u - double(in_idx + 1);
    return scale < 1 ? scale * cubic(scale * d) : cubic(d);
}

// Literal 2-D double loop: out(y,x) = sum_j sum_k wy(y,j) wx(x,k) in(clamp(j), clamp(k)) / normalizers.
TensorD oracle_resize(const Tensor& in, std::size_t oh, std::size_t ow) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const double sy = double(oh) / double(H), sx = double(ow) / double(W);
    const long reach_y = long(std::ceil(2.0 / std::min(sy, 1.0))) + 2, reach_x = long(std::ceil(2.0 / std::min(sx, 1.0))) + 2;
    TensorD out({C, oh, ow});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                const long cy = long(std::floor((double(y) + 0.5) / sy)), cx = long(std::floor((double(x) + 0.5) / sx));
                double acc = 0, ny = 0, nx = 0;
                for (long j = cy - reach_y; j <= cy + reach_y; ++j) ny += weight(y, j, sy);
                for (long k = cx - reach_x; k <= cx + reach_x; ++k) nx += weight(x, k, sx);
                for (long j = cy - reach_y; j <= cy + reach_y; ++j)
                    for (long k = cx - reach_x; k <= cx + reach_x; ++k) {
                        const long jj = std::clamp(j, 0L, long(H) - 1), kk = std::clamp(k, 0L, long(W) - 1);
                        acc += weight(y, j, sy) * weight(x, k, sx) * double(in[(c * H + jj) * W + kk]);
                    }
                out[(c * oh + y) * ow + x] = acc / (ny * nx);
            }
    return out;
}

Tensor smooth_image(std::size_t h, std::size_t w, double phase) {
    Tensor t({3, h, w});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                t[(c * h + i) * w + j] = float(0.5 + 0.3 * std::sin(0.21 * double(i) + phase + double(c)) *
                                                         std::cos(0.17 * double(j) - phase));
    return t;
}

double max_interior_diff(const Tensor& a, const Tensor& b, std::size_t band) {
    const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    double m = 0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = band; i + band < H; ++i)
            for (std::size_t j = band; j + band < W; ++j)
                m = std::max(m, std::abs(double(a[(c * H + i) * W + j]) - double(b[(c * H + i) * W + j])));
    return m;
}

Tensor batch_item(const Tensor& batch, std::size_t b) {
    const std::size_t C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    std::vector<float> v(batch.ptr() + b * C * H * W, batch.ptr() + (b + 1) * C * H * W);
    return Tensor({C, H, W}, std::move(v));
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("png round trip is within half a code") {
    auto dir = scratch("png");
    auto t = random_tensor<float>({3, 7, 9}, 1, 0, 1);
    save_png(t, (dir / "a.png").string());
    auto back = load_png((dir / "a.png").string());
    REQUIRE(back.shape() == t.shape());
    CHECK(testutil::max_abs_diff(t, back) <= 1.0 / 510 + 1e-7);
    // Out-of-range values are clipped on save.
    Tensor wild({3, 2, 2}, std::vector<float>(12, 1.7f));
    wild[0] = -3.0f;
    save_png(wild, (dir / "b.png").string());
    auto wb = load_png((dir / "b.png").string());
    CHECK(wb[0] == 0.0f);
    CHECK(wb[1] == 1.0f);
}

TEST_CASE("byte audit of a known 2x2 png") {
    auto dir = scratch("audit");
    const std::vector<unsigned char> bytes{0, 128, 255, 64, 0, 128, 255, 64, 0, 128, 255, 64};
    write_raw_png((dir / "k.png").string(), 2, 2, bytes, PNG_FORMAT_RGB);
    auto t = load_png((dir / "k.png").string());
    REQUIRE(t.shape() == Shape{3, 2, 2});
    // pixel p (row-major) holds bytes[3p..3p+2]; channel c is plane c.
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t c = 0; c < 3; ++c) CHECK(t[c * 4 + p] == float(bytes[3 * p + c]) / 255.0f);
    CHECK(t[0] == 0.0f);
    CHECK(t[4 + 0] == 128.0f / 255.0f);
    CHECK(t[8 + 0] == 1.0f);
}

TEST_CASE("black png is all zero") {
    auto dir = scratch("black");
    write_raw_png((dir / "z.png").string(), 3, 2, std::vector<unsigned char>(18, 0), PNG_FORMAT_RGB);
    auto t = load_png((dir / "z.png").string());
    for (float v : t.data()) CHECK(v == 0.0f);
}

TEST_CASE("non-rgb and missing files are input errors") {
    auto dir = scratch("bad");
    write_raw_png((dir / "g.png").string(), 2, 2, std::vector<unsigned char>(4, 9), PNG_FORMAT_GRAY);
    write_raw_png((dir / "a.png").string(), 2, 2, std::vector<unsigned char>(16, 9), PNG_FORMAT_RGBA);
    CHECK_THROWS_AS(load_png((dir / "g.png").string()), InputError);
    CHECK_THROWS_AS(load_png((dir / "a.png").string()), InputError);
    CHECK_THROWS_AS(load_png((dir / "none.png").string()), InputError);
}

TEST_CASE("quantize snaps to codes") {
    Tensor t({3}, std::vector<float>{0.5f, -0.2f, 0.999f});
    auto q = quantize_8bit(t);
    CHECK(q[0] == 128.0f / 255.0f);
    CHECK(q[1] == 0.0f);
    CHECK(q[2] == 1.0f);
}

TEST_CASE("bicubic keeps constants") {
    Tensor t = Tensor::full({3, 9, 11}, 0.37f);
    for (auto [h, w] : {std::pair{18, 22}, std::pair{4, 5}, std::pair{27, 7}}) {
        auto y = bicubic_resize(t, h, w);
        for (float v : y.data()) REQUIRE(std::abs(v - 0.37f) < 1e-6);
    }
}

TEST_CASE("bicubic upscale reproduces a linear ramp in the interior") {
    Tensor t({3, 6, 16});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 16; ++j) t[(c * 6 + i) * 16 + j] = float(j) / 16.0f;
    auto y = bicubic_resize(t, 12, 32);
    for (std::size_t o = 4; o < 28; ++o) {
        const double want = ((double(o) + 0.5) / 2.0 - 0.5) / 16.0;
        REQUIRE(std::abs(y[(1 * 12 + 5) * 32 + o] - want) < 1e-6);
    }
}

TEST_CASE("bicubic matches the literal double loop") {
    Tensor t({3, 8, 8});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = float((i * 37 + 11) % 17) / 16.0f;
    auto y = bicubic_resize(t, 4, 4);
    auto want = oracle_resize(t, 4, 4);
    CHECK(testutil::max_abs_diff(y.cast<double>(), want) < 1e-6);
    auto up = bicubic_resize(t, 13, 16);
    CHECK(testutil::max_abs_diff(up.cast<double>(), oracle_resize(t, 13, 16)) < 1e-6);
    CHECK_THROWS_AS(bicubic_resize(Tensor({3, 3, 8}), 2, 4), ShapeError);
}

TEST_CASE("crop and hconcat") {
    auto t = random_tensor<float>({3, 6, 5}, 3);
    auto c = crop(t, 1, 2, 3, 2);
    CHECK(c.shape() == Shape{3, 3, 2});
    CHECK(c[(2 * 3 + 1) * 2 + 1] == t[(2 * 6 + 2) * 5 + 3]);
    CHECK_THROWS_AS(crop(t, 4, 0, 3, 2), ShapeError);
    auto h = hconcat({t, Tensor::full({3, 4, 2}, 1.0f)});
    CHECK(h.shape() == Shape{3, 6, 7});
    CHECK(h[(0 * 6 + 5) * 7 + 6] == 0.0f);  // padded below the shorter image
    CHECK(h[(0 * 6 + 1) * 7 + 6] == 1.0f);
}

}

TEST_SUITE("dataset") {

TEST_CASE("make_pair crops to a multiple of the scale") {
    auto p = make_pair(smooth_image(401, 403, 0.1), 2, "x");
    CHECK(p.hr.shape() == Shape{3, 400, 402});
    CHECK(p.lr.shape() == Shape{3, 200, 201});
    auto q = make_pair(smooth_image(50, 47, 0.1), 3);
    CHECK(q.hr.shape() == Shape{3, 48, 45});
    CHECK(q.lr.shape() == Shape{3, 16, 15});
    for (float v : q.lr.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    CHECK_THROWS(make_pair(smooth_image(7, 40, 0), 2));
}

TEST_CASE("degradation commutes with cropping away from borders") {
    const std::size_t r = 2;
    auto hr = smooth_image(64, 72, 0.4);
    auto lr = bicubic_resize(hr, 32, 36);
    for (auto [i, j] : {std::pair{2, 3}, std::pair{5, 1}}) {
        auto hr_c = crop(hr, 2 * r * i, 2 * r * j, 40, 40);
        auto lr_c = crop(lr, 2 * i, 2 * j, 20, 20);
        CHECK(max_interior_diff(bicubic_resize(hr_c, 20, 20), lr_c, 4) < 1e-6);
    }
}

TEST_CASE("sampled patches are aligned") {
    std::vector<ImagePair> pairs;
    for (int k = 0; k < 3; ++k) pairs.push_back(make_pair(smooth_image(60, 64, k), 2));
    for (bool augment : {false, true}) {
        PatchSampler s(16, 5, augment);
        auto b = s.batch_at(pairs, 6, 3);
        REQUIRE(b.lr.shape() == Shape{6, 3, 16, 16});
        REQUIRE(b.hr.shape() == Shape{6, 3, 32, 32});
        for (std::size_t i = 0; i < 6; ++i) {
            auto lr = batch_item(b.lr, i);
            auto redeg = bicubic_resize(batch_item(b.hr, i), 16, 16);
            CHECK(max_interior_diff(redeg, lr, 4) < 1e-6);
        }
    }
}

TEST_CASE("sampler is a pure function of seed and step") {
    auto corpus = synth_corpus(4, 40, 3);
    std::vector<ImagePair> pairs;
    for (auto& c : corpus) pairs.push_back(make_pair(c, 2));
    PatchSampler a(8, 11), b(8, 11), other(8, 12);
    std::vector<Batch> seq;
    for (int k = 0; k < 5; ++k) seq.push_back(a.sample_batch(pairs, 3));
    CHECK(a.next_step() == 5);
    for (int k = 0; k < 5; ++k) {
        auto again = b.sample_batch(pairs, 3);
        CHECK(again.lr == seq[k].lr);
        CHECK(again.hr == seq[k].hr);
        CHECK(b.batch_at(pairs, 3, k).hr == seq[k].hr);
    }
    CHECK_FALSE(other.batch_at(pairs, 3, 0).lr == seq[0].lr);
    for (float v : seq[2].hr.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    PatchSampler big(64, 0);
    CHECK_THROWS_AS(big.batch_at(pairs, 1, 0), InputError);
    CHECK_THROWS_AS(a.batch_at({}, 1, 0), InputError);
}

TEST_CASE("dihedral group") {
    auto t = random_tensor<float>({3, 4, 5}, 2);
    auto r1 = dihedral(t, 1, false);
    CHECK(r1.shape() == Shape{3, 5, 4});
    CHECK(dihedral(dihedral(t, 2, false), 2, false) == t);
    CHECK(dihedral(dihedral(t, 0, true), 0, true) == t);
    // Counter-clockwise: top-right corner moves to top-left.
    CHECK(r1[0] == t[4]);
}

TEST_CASE("synthetic corpus is deterministic and 8-bit") {
    auto a = synth_corpus(6, 32, 9), b = synth_corpus(6, 32, 9);
    REQUIRE(a.size() == 6);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(a[k] == b[k]);
        CHECK(a[k] == quantize_8bit(a[k]));
    }
    CHECK_FALSE(synth_corpus(1, 32, 10)[0] == a[0]);
}

TEST_CASE("dataset folders") {
    auto root = scratch("ds");
    CHECK_THROWS_AS(load_dataset(root.string(), 2), InputError);
    fs::create_directories(root / "HR");
    CHECK_THROWS_AS(load_dataset(root.string(), 2), InputError);
    write_synth_corpus(root.string(), 3, 24, 1);
    auto names = list_hr_images(root.string());
    REQUIRE(names.size() == 3);
    CHECK(std::is_sorted(names.begin(), names.end()));
    auto pairs = load_dataset(root.string(), 2);
    CHECK(pairs.size() == 3);
    CHECK(pairs[0].hr == synth_corpus(3, 24, 1)[0]);
    cache_lr(root.string(), pairs);
    CHECK(fs::exists(root / "LRx2"));
    std::size_t n = 0;
    for (auto& e : fs::directory_iterator(root / "LRx2")) n += e.path().extension() == ".png";
    CHECK(n == 3);
}

}
