#include "istar/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <png.h>

namespace istar {

namespace {

Shape require_chw(const Tensor& image, const char* what) {
    const auto& s = image.shape();
    if (s.size() == 4 && s[0] == 1) return Shape{s[1], s[2], s[3]};
    if (s.size() != 3) throw ShapeError(std::string(what) + " expects a [C,H,W] image, got " + shape_str(s));
    return s;
}

std::uint8_t to_byte(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::round(c * 255.0));
}

struct Contribution {
    std::vector<std::size_t> index;
    std::vector<double> weight;
};

// Weight tables for one axis, following the usual imresize construction:
// output i (1-based) maps to u = i / s + 0.5 (1 - 1/s) in input coordinates.
std::vector<Contribution> contributions(std::size_t in, std::size_t out) {
    const double s = static_cast<double>(out) / static_cast<double>(in);
    const double width = s < 1.0 ? 4.0 / s : 4.0;
    const auto taps = static_cast<long>(std::ceil(width)) + 2;
    std::vector<Contribution> table(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double u = static_cast<double>(i + 1) / s + 0.5 * (1.0 - 1.0 / s);
        const long left = static_cast<long>(std::floor(u - width / 2.0));
        auto& c = table[i];
        double total = 0;
        for (long t = 0; t < taps; ++t) {
            const long j = left + t;  // 1-based input index
            const double d = u - static_cast<double>(j);
            const double w = s < 1.0 ? s * cubic_kernel(s * d) : cubic_kernel(d);
            if (w == 0.0) continue;
            c.index.push_back(static_cast<std::size_t>(std::clamp<long>(j, 1, static_cast<long>(in)) - 1));
            c.weight.push_back(w);
            total += w;
        }
        for (auto& w : c.weight) w /= total;
    }
    return table;
}

} // namespace

double cubic_kernel(double x) {
    const double a = std::abs(x);
    if (a <= 1.0) return (1.5 * a - 2.5) * a * a + 1.0;
    if (a < 2.0) return ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0;
    return 0.0;
}

Tensor load_png(const std::string& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw InputError("cannot read PNG '" + path + "': " + img.message);
    const bool rgb = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const bool alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    const bool wide = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    if (!rgb || alpha || wide) {
        png_image_free(&img);
        throw InputError("PNG '" + path + "' is not 8-bit RGB");
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
        throw InputError("cannot decode PNG '" + path + "': " + img.message);
    const std::size_t H = img.height, W = img.width;
    Tensor out(Shape{3, H, W});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                out[(c * H + y) * W + x] = static_cast<float>(buf[(y * W + x) * 3 + c]) / 255.0f;
    return out;
}

void save_png(const Tensor& image, const std::string& path) {
    const Shape s = require_chw(image, "save_png");
    if (s[0] != 3) throw ShapeError("save_png expects 3 channels");
    const std::size_t H = s[1], W = s[2];
    std::vector<std::uint8_t> buf(H * W * 3);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c) buf[(y * W + x) * 3 + c] = to_byte(image[(c * H + y) * W + x]);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(W);
    img.height = static_cast<png_uint_32>(H);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
        throw InputError("cannot write PNG '" + path + "': " + img.message);
}

Tensor quantize_8bit(const Tensor& image) {
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.numel(); ++i) out[i] = static_cast<float>(to_byte(image[i])) / 255.0f;
    return out;
}

Tensor bicubic_resize(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    const Shape s = require_chw(image, "bicubic_resize");
    const std::size_t C = s[0], H = s[1], W = s[2];
    if (H < 4 || W < 4) throw ShapeError("bicubic_resize: input extents must be >= 4, got " + shape_str(s));
    if (out_h == 0 || out_w == 0) throw ShapeError("bicubic_resize: output extents must be >= 1");

    const auto rows = contributions(H, out_h);
    const auto cols = contributions(W, out_w);
    std::vector<double> tmp(out_h * W);
    Tensor out(Shape{C, out_h, out_w});
    for (std::size_t c = 0; c < C; ++c) {
        const float* plane = image.ptr() + c * H * W;
        for (std::size_t i = 0; i < out_h; ++i) {
            const auto& rc = rows[i];
            for (std::size_t x = 0; x < W; ++x) {
                double acc = 0;
                for (std::size_t t = 0; t < rc.index.size(); ++t) acc += rc.weight[t] * plane[rc.index[t] * W + x];
                tmp[i * W + x] = acc;
            }
        }
        for (std::size_t i = 0; i < out_h; ++i) {
            for (std::size_t j = 0; j < out_w; ++j) {
                const auto& cc = cols[j];
                double acc = 0;
                for (std::size_t t = 0; t < cc.index.size(); ++t) acc += cc.weight[t] * tmp[i * W + cc.index[t]];
                out[(c * out_h + i) * out_w + j] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    const Shape s = require_chw(image, "crop");
    if (h == 0 || w == 0 || top + h > s[1] || left + w > s[2])
        throw ShapeError("crop window exceeds image " + shape_str(s));
    Tensor out(Shape{s[0], h, w});
    for (std::size_t c = 0; c < s[0]; ++c)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(image.ptr() + (c * s[1] + top + y) * s[2] + left, w, out.ptr() + (c * h + y) * w);
    return out;
}

Tensor hconcat(const std::vector<Tensor>& images) {
    if (images.empty()) throw ShapeError("hconcat: no images");
    std::size_t H = 0, W = 0;
    for (const auto& im : images) {
        const Shape s = require_chw(im, "hconcat");
        if (s[0] != 3) throw ShapeError("hconcat expects 3-channel images");
        H = std::max(H, s[1]);
        W += s[2];
    }
    Tensor out(Shape{3, H, W});
    std::size_t x0 = 0;
    for (const auto& im : images) {
        const Shape s = require_chw(im, "hconcat");
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < s[1]; ++y)
                std::copy_n(im.ptr() + (c * s[1] + y) * s[2], s[2], out.ptr() + (c * H + y) * W + x0);
        x0 += s[2];
    }
    return out;
}

} // namespace istar
