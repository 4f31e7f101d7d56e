#include "istar/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "istar/model.hpp"

namespace istar {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'T', 'A', 'R', '0', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw InputError("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_bytes(std::istream& in, std::uint32_t n) {
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw InputError("checkpoint: truncated file");
    return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (float v : t.data()) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
    }
}

std::pair<std::string, Tensor> get_tensor(std::istream& in) {
    std::string name = get_bytes(in, get_u32(in));
    const auto rank = get_u32(in);
    if (rank == 0 || rank > 8) throw InputError("checkpoint: bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& e : shape) e = get_u32(in);
    Tensor t(shape);
    for (auto& v : t.data()) {
        const std::uint32_t bits = get_u32(in);
        std::memcpy(&v, &bits, 4);
    }
    return {std::move(name), std::move(t)};
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw InputError("checkpoint: bad integer for " + key + ": '" + value + "'");
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

const std::string& Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    throw InputError("checkpoint: missing metadata key '" + key + "'");
}

void write_checkpoint(std::ostream& out, const ModelConfig& config, const ParamStore<float>& params,
                      bool include_optimizer, const MetaEntries& meta) {
    validate_params(config, params);
    std::string text = config.to_text();
    if (include_optimizer) text += "optimizer=adam\noptimizer.step=" + std::to_string(params.step()) + "\n";
    for (const auto& [k, v] : meta) text += k + "=" + v + "\n";

    out.write(kMagic, sizeof kMagic);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_u32(out, static_cast<std::uint32_t>(params.size() * (include_optimizer ? 3 : 1)));
    for (const auto& e : params.entries()) put_tensor(out, e.name, e.value);
    if (include_optimizer) {
        for (const auto& e : params.entries()) {
            put_tensor(out, e.name + ".m", e.m);
            put_tensor(out, e.name + ".v", e.v);
        }
    }
    if (!out) throw InputError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw InputError("checkpoint: bad magic");

    Checkpoint ck;
    std::istringstream text(get_bytes(in, get_u32(in)));
    std::string line;
    bool seen[5] = {false, false, false, false, false};
    while (std::getline(text, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("checkpoint: malformed header line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "model.scale") ck.config.scale = parse_size(key, value), seen[0] = true;
        else if (key == "model.channels") ck.config.channels = parse_size(key, value), seen[1] = true;
        else if (key == "model.iterations") ck.config.iterations = parse_size(key, value), seen[2] = true;
        else if (key == "model.st_channels") ck.config.st_channels = parse_size(key, value), seen[3] = true;
        else if (key == "model.colors") ck.config.colors = parse_size(key, value), seen[4] = true;
        else if (key == "optimizer") {
            if (value != "adam") throw InputError("checkpoint: unknown optimizer '" + value + "'");
            ck.has_optimizer = true;
        } else if (key == "optimizer.step") {
            ck.params.set_step(parse_size(key, value));
        } else if (key.rfind("model.", 0) == 0) {
            throw InputError("checkpoint: unknown model key '" + key + "'");
        } else {
            ck.meta.emplace_back(key, value);
        }
    }
    for (bool s : seen)
        if (!s) throw InputError("checkpoint: incomplete model configuration");
    ck.config.validate();

    const auto count = get_u32(in);
    std::vector<std::pair<std::string, Tensor>> moments;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = get_tensor(in);
        if (ck.has_optimizer && (ends_with(name, ".m") || ends_with(name, ".v")))
            moments.emplace_back(std::move(name), std::move(t));
        else
            ck.params.add(name, std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw InputError("checkpoint: trailing bytes");
    validate_params(ck.config, ck.params);

    if (ck.has_optimizer) {
        if (moments.size() != 2 * ck.params.size()) throw ConfigMismatch("checkpoint: incomplete optimizer state");
        for (auto& [name, t] : moments) {
            const std::string base = name.substr(0, name.size() - 2);
            if (!ck.params.contains(base)) throw ConfigMismatch("checkpoint: optimizer state for unknown '" + base + "'");
            auto& e = ck.params.entry(base);
            if (t.shape() != e.value.shape()) throw ConfigMismatch("checkpoint: moment shape mismatch for '" + base + "'");
            (ends_with(name, ".m") ? e.m : e.v) = std::move(t);
        }
    }
    return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& config, const ParamStore<float>& params,
                     bool include_optimizer, const MetaEntries& meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint '" + path + "'");
    write_checkpoint(out, config, params, include_optimizer, meta);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

} // namespace istar
