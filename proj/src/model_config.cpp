#include "istar/model_config.hpp"

#include <algorithm>
#include <sstream>

#include "istar/errors.hpp"

namespace istar {

void ModelConfig::validate() const {
    if (scale < 1) throw InputError("model.scale must be >= 1");
    if (channels < 1) throw InputError("model.channels must be >= 1");
    if (iterations < 1) throw InputError("model.iterations must be >= 1");
    if (colors < 1) throw InputError("model.colors must be >= 1");
}

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os << "model.scale=" << scale << '\n'
       << "model.channels=" << channels << '\n'
       << "model.iterations=" << iterations << '\n'
       << "model.st_channels=" << resolved_st_channels() << '\n'
       << "model.colors=" << colors << '\n';
    return os.str();
}

std::vector<LayerSpec> istar_layout(const ModelConfig& cfg) {
    cfg.validate();
    const auto C = cfg.channels;
    const auto S = cfg.resolved_st_channels();
    const auto r = cfg.scale;
    std::vector<LayerSpec> layers;
    auto conv = [&](std::string name, std::size_t out, std::size_t in, std::size_t k, double gain = 1.0) {
        layers.push_back(LayerSpec{std::move(name), out, in, k, gain, 1});
    };

    conv("head", C, cfg.colors, 3);
    conv("dty.0", C, C, 3);
    conv("dty.1", C, C, 3);
    for (std::size_t k = 0; k < cfg.iterations; ++k) {
        const std::string b = "blocks." + std::to_string(k) + ".";
        for (const char* unit : {"mse", "msa"}) {
            const std::string u = b + unit + ".";
            conv(u + "branch1", C, C, 1);
            conv(u + "branch3", C, C, 3);
            conv(u + "branch5.0", C, C, 3);
            conv(u + "branch5.1", C, C, 3);
            conv(u + "fuse", C, 3 * C, 1);
        }
        conv(b + "msa.gate", C, C, 1);
        conv(b + "combine", C, 2 * C, 1);
        conv(b + "st.reduce", S, C, 1);
        conv(b + "st.expand", C, S, 1);
        // Scalar init value. Small so the threshold starts below typical feature size.
        layers.push_back(LayerSpec{b + "st.theta_max", 1, 1, 0, 0.1, 1});
        conv(b + "pad.0", C, C, 3);
        conv(b + "pad.1", C, C, 3, 0.1);
    }
    conv("tail.pad.0", C, C, 3);
    conv("tail.pad.1", C, C, 3, 0.1);
    // Damped so the initial output stays near the centered input.
    conv("upscale", cfg.colors * r * r, C, 3, 0.1);
    return layers;
}

std::vector<std::string> istar_param_names(const ModelConfig& config) {
    std::vector<std::string> names;
    for (const auto& l : istar_layout(config)) {
        if (l.is_scalar()) {
            names.push_back(l.name);
        } else {
            names.push_back(l.name + ".weight");
            names.push_back(l.name + ".bias");
        }
    }
    return names;
}

} // namespace istar
