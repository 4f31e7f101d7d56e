#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace istar {

struct ModelConfig {
    std::size_t scale = 2;
    std::size_t channels = 64;
    std::size_t iterations = 16;
    /// Bottleneck width of the threshold predictor; 0 means channels / 4 (at least 1).
    std::size_t st_channels = 0;
    std::size_t colors = 3;

    std::size_t resolved_st_channels() const { return st_channels ? st_channels : std::max<std::size_t>(1, channels / 4); }
    void validate() const;

    /// "model.key=value" lines in fixed order.
    std::string to_text() const;
    /// Configs are equal when they describe the same layout (st_channels compared after resolution).
    friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
        return a.scale == b.scale && a.channels == b.channels && a.iterations == b.iterations &&
               a.resolved_st_channels() == b.resolved_st_channels() && a.colors == b.colors;
    }
};

/// One learned tensor of the network.
struct LayerSpec {
    std::string name;  ///< prefix; tensors are <name>.weight / <name>.bias, or <name> for scalars
    std::size_t out = 0;
    std::size_t in = 0;
    std::size_t kernel = 0;  ///< 0 marks a single learned scalar
    /// Init multiplier on the uniform +-sqrt(6 / fan_in) range; the initial value for scalars.
    double init_gain = 1.0;
    /// Feature-map resolution relative to the LR input (always 1 for ISTAR convs).
    std::size_t resolution = 1;

    bool is_scalar() const { return kernel == 0; }
    std::size_t param_count() const { return is_scalar() ? 1 : out * in * kernel * kernel + out; }
    /// Multiply-accumulates on an H x W LR input; zero for scalars.
    std::uint64_t macs(std::size_t height, std::size_t width) const {
        if (is_scalar()) return 0;
        const std::uint64_t pixels = static_cast<std::uint64_t>(height * resolution) * (width * resolution);
        return static_cast<std::uint64_t>(out) * in * kernel * kernel * pixels;
    }
};

/// The full layer inventory of ISTAR in forward order.
std::vector<LayerSpec> istar_layout(const ModelConfig& config);

/// Parameter tensor names in store order.
std::vector<std::string> istar_param_names(const ModelConfig& config);

} // namespace istar
