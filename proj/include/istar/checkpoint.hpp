#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "istar/model_config.hpp"
#include "istar/param_store.hpp"

namespace istar {

using MetaEntries = std::vector<std::pair<std::string, std::string>>;

/**
 * Binary checkpoint layout (all integers u32 little-endian):
 *
 *   "ISTAR001"
 *   text length, text block of key=value lines (model.* keys, optional
 *     optimizer=adam / optimizer.step, then caller metadata)
 *   tensor count
 *   per tensor: name length, UTF-8 name, rank, extents..., float32 LE data
 *
 * Optimizer state, when present, follows the parameters as <name>.m and
 * <name>.v tensors.
 */
struct Checkpoint {
    ModelConfig config;
    ParamStore<float> params;
    bool has_optimizer = false;
    MetaEntries meta;  ///< entries beyond model.* and optimizer.*

    /// Value of a metadata key; throws InputError if missing.
    const std::string& meta_value(const std::string& key) const;
};

void write_checkpoint(std::ostream& out, const ModelConfig& config, const ParamStore<float>& params,
                      bool include_optimizer, const MetaEntries& meta = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParamStore<float>& params,
                     bool include_optimizer, const MetaEntries& meta = {});
Checkpoint load_checkpoint(const std::string& path);

} // namespace istar
