#include "istar/run_config.hpp"

#include <fstream>
#include <istream>
#include <sstream>

namespace istar {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

RunConfig::RunConfig()
    : entries_{
          {"model.scale", "2"},
          {"model.channels", "64"},
          {"model.iterations", "16"},
          {"model.st_channels", "0"},
          {"model.colors", "3"},
          {"train.lr0", "0.0001"},
          {"train.halve_every", "200"},
          {"train.steps_per_epoch", "1"},
          {"train.epochs", "1000"},
          {"train.batch", "16"},
          {"train.patch", "48"},
          {"train.seed", "0"},
          {"train.checkpoint_every", "0"},
          {"train.augment", "true"},
          {"data.root", "data"},
          {"data.cache_lr", "false"},
          {"eval.root", ""},
          {"eval.mode", "Y"},
          {"solver.alpha", "0"},
          {"solver.max_iters", "10000"},
          {"solver.tol", "1e-10"},
      } {}

void RunConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    throw InputError("unknown configuration key '" + key + "'");
}

void RunConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InputError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw InputError("unknown configuration key '" + key + "'");
}

void RunConfig::merge_stream(std::istream& in, const std::string& origin) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            set_assignment(line);
        } catch (const InputError& e) {
            throw InputError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void RunConfig::merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    merge_stream(in, path);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        const auto n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw InputError(key + ": expected a non-negative integer, got '" + v + "'");
    }
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

double RunConfig::get_double(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InputError(key + ": expected a number, got '" + v + "'");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InputError(key + ": expected true or false, got '" + v + "'");
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.scale = get_size("model.scale");
    m.channels = get_size("model.channels");
    m.iterations = get_size("model.iterations");
    m.st_channels = get_size("model.st_channels");
    m.colors = get_size("model.colors");
    m.validate();
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.lr0 = get_double("train.lr0");
    t.halve_every = get_size("train.halve_every");
    t.steps_per_epoch = get_size("train.steps_per_epoch");
    t.epochs = get_size("train.epochs");
    t.batch = get_size("train.batch");
    t.patch = get_size("train.patch");
    t.seed = get_u64("train.seed");
    t.checkpoint_every = get_size("train.checkpoint_every");
    t.augment = get_bool("train.augment");
    t.validate();
    return t;
}

ista::IstaSolverConfig RunConfig::solver_config() const {
    ista::IstaSolverConfig s;
    s.alpha = get_double("solver.alpha");
    s.max_iters = get_size("solver.max_iters");
    s.tol = get_double("solver.tol");
    return s;
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
    return os.str();
}

void RunConfig::write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << to_text();
}

} // namespace istar
