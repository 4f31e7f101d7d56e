#include "istar/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace istar {

namespace {

constexpr std::size_t kWindow = 11;

Shape chw(const Tensor& t) {
    const auto& s = t.shape();
    if (s.size() == 4 && s[0] == 1) return Shape{s[1], s[2], s[3]};
    if (s.size() != 3 || s[0] != 3) throw ShapeError("metrics expect a [3,H,W] image, got " + shape_str(s));
    return s;
}

std::vector<double> gaussian_window() {
    std::vector<double> w(kWindow * kWindow);
    const double sigma = 1.5;
    double total = 0;
    for (std::size_t i = 0; i < kWindow; ++i)
        for (std::size_t j = 0; j < kWindow; ++j) {
            const double dy = static_cast<double>(i) - 5.0, dx = static_cast<double>(j) - 5.0;
            const double v = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            w[i * kWindow + j] = v;
            total += v;
        }
    for (auto& v : w) v /= total;
    return w;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t H, std::size_t W) {
    static const std::vector<double> win = gaussian_window();
    const double C1 = (0.01 * 255) * (0.01 * 255);
    const double C2 = (0.03 * 255) * (0.03 * 255);
    double total = 0;
    for (std::size_t y = 0; y + kWindow <= H; ++y) {
        for (std::size_t x = 0; x + kWindow <= W; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < kWindow; ++i)
                for (std::size_t j = 0; j < kWindow; ++j) {
                    const double w = win[i * kWindow + j];
                    const double va = a[(y + i) * W + x + j], vb = b[(y + i) * W + x + j];
                    ma += w * va;
                    mb += w * vb;
                    saa += w * va * va;
                    sbb += w * vb * vb;
                    sab += w * va * vb;
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
    }
    return total / static_cast<double>((H - kWindow + 1) * (W - kWindow + 1));
}

} // namespace

const char* color_mode_name(ColorMode mode) noexcept { return mode == ColorMode::Y ? "Y" : "RGB"; }

ColorMode parse_color_mode(const std::string& text) {
    if (text == "Y" || text == "y") return ColorMode::Y;
    if (text == "RGB" || text == "rgb") return ColorMode::RGB;
    throw InputError("unknown color mode '" + text + "' (expected Y or RGB)");
}

std::vector<std::vector<double>> metric_planes(const Tensor& image, std::size_t shave, ColorMode mode,
                                               std::size_t& height, std::size_t& width) {
    const Shape s = chw(image);
    const std::size_t H = s[1], W = s[2];
    if (2 * shave >= H || 2 * shave >= W) throw InputError("metrics: shave border too large for image");
    height = H - 2 * shave;
    width = W - 2 * shave;
    auto px = [&](std::size_t c, std::size_t y, std::size_t x) {
        return static_cast<double>(image[(c * H + y + shave) * W + x + shave]);
    };
    std::vector<std::vector<double>> planes;
    if (mode == ColorMode::Y) {
        std::vector<double> p(height * width);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                p[y * width + x] = 65.481 * px(0, y, x) + 128.553 * px(1, y, x) + 24.966 * px(2, y, x) + 16.0;
        planes.push_back(std::move(p));
    } else {
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<double> p(height * width);
            for (std::size_t y = 0; y < height; ++y)
                for (std::size_t x = 0; x < width; ++x) p[y * width + x] = 255.0 * px(c, y, x);
            planes.push_back(std::move(p));
        }
    }
    return planes;
}

double psnr(const Tensor& a, const Tensor& b, std::size_t shave, ColorMode mode) {
    if (chw(a) != chw(b)) throw ShapeError("psnr: extents differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::size_t H = 0, W = 0;
    const auto pa = metric_planes(a, shave, mode, H, W);
    const auto pb = metric_planes(b, shave, mode, H, W);
    double se = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < pa.size(); ++c)
        for (std::size_t i = 0; i < pa[c].size(); ++i, ++n) {
            const double d = pa[c][i] - pb[c][i];
            se += d * d;
        }
    const double mse = se / static_cast<double>(n);
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Tensor& a, const Tensor& b, std::size_t shave, ColorMode mode) {
    if (chw(a) != chw(b)) throw ShapeError("ssim: extents differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::size_t H = 0, W = 0;
    const auto pa = metric_planes(a, shave, mode, H, W);
    const auto pb = metric_planes(b, shave, mode, H, W);
    if (H < kWindow || W < kWindow) throw InputError("ssim: image smaller than the 11x11 window");
    double total = 0;
    for (std::size_t c = 0; c < pa.size(); ++c) total += ssim_plane(pa[c], pb[c], H, W);
    return total / static_cast<double>(pa.size());
}

} // namespace istar
