#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "istar/ista_solver.hpp"
#include "istar/model_config.hpp"
#include "istar/train.hpp"

namespace istar {

/**
 * Flat key=value settings namespaced model.*, train.*, data.*, eval.* and
 * solver.*. Every key has a default; setting an unknown key is an error.
 * Files are UTF-8 with '#' comments.
 */
class RunConfig {
public:
    RunConfig();

    /// Throws InputError for unknown keys.
    void set(const std::string& key, const std::string& value);
    /// "key=value" override as given on the command line.
    void set_assignment(const std::string& assignment);
    const std::string& get(const std::string& key) const;

    void merge_file(const std::string& path);
    void merge_stream(std::istream& in, const std::string& origin = "<stream>");

    std::size_t get_size(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    ista::IstaSolverConfig solver_config() const;

    /// Fully resolved configuration, one key per line in declaration order.
    std::string to_text() const;
    void write(const std::string& path) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace istar
