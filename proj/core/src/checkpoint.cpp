#include "teddn/checkpoint.hpp"

#include "teddn/config.hpp"
#include "teddn/error.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace teddn {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'D', 'N'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("truncated checkpoint " + path);
    return v;
}

std::string take_string(std::ifstream& in, const std::string& path, std::uint64_t max_len) {
    const auto len = take<std::uint64_t>(in, path);
    if (len > max_len) throw ConfigError("corrupt checkpoint " + path + ": oversized field");
    std::string s(static_cast<size_t>(len), '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw ConfigError("truncated checkpoint " + path);
    return s;
}

struct Header {
    ModelConfig config;
    std::uint64_t count = 0;
};

Header read_header(std::ifstream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ConfigError("not a checkpoint file: " + path);
    }
    const auto version = take<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw ConfigError("checkpoint " + path + " has unsupported version "
                          + std::to_string(version));
    }
    const auto scalar = take<std::uint32_t>(in, path);
    if (scalar != sizeof(real)) {
        throw ConfigError("checkpoint " + path + " stores " + std::to_string(scalar * 8)
                          + "-bit scalars, this build uses " + std::to_string(sizeof(real) * 8)
                          + "-bit");
    }
    Header h;
    h.config = model_config_from_json(take_string(in, path, 1u << 20));
    h.count = take<std::uint64_t>(in, path);
    return h;
}

} // namespace

void save_checkpoint(TeddnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path);

    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(sizeof(real)));

    const std::string cfg = model_config_to_json(model.config());
    put(out, static_cast<std::uint64_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    auto params = model.parameters();
    put(out, static_cast<std::uint64_t>(params.size()));
    for (Parameter* p : params) {
        put(out, static_cast<std::uint64_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put(out, static_cast<std::uint32_t>(p->value.rank()));
        for (long d = 0; d < p->value.rank(); ++d) put(out, static_cast<std::int64_t>(p->value.extent(d)));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(real)));
    }
    if (!out) throw FormatError("write failed on checkpoint " + path);
}

ModelConfig peek_checkpoint_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path);
    return read_header(in, path).config;
}

void load_checkpoint_into(TeddnModel& model, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path);
    const Header header = read_header(in, path);

    auto params = model.parameters();
    if (header.count != params.size()) {
        throw ConfigError("checkpoint " + path + " holds " + std::to_string(header.count)
                          + " parameters, model has " + std::to_string(params.size()));
    }
    for (Parameter* p : params) {
        const std::string name = take_string(in, path, 4096);
        if (name != p->name) {
            throw ConfigError("checkpoint parameter '" + name + "' does not match model parameter '"
                              + p->name + "'");
        }
        const auto rank = take<std::uint32_t>(in, path);
        if (rank != static_cast<std::uint32_t>(p->value.rank())) {
            throw ConfigError("checkpoint parameter '" + name + "' has rank "
                              + std::to_string(rank) + ", model expects "
                              + std::to_string(p->value.rank()));
        }
        for (long d = 0; d < p->value.rank(); ++d) {
            const auto dim = take<std::int64_t>(in, path);
            if (dim != p->value.extent(d)) {
                throw ConfigError("checkpoint parameter '" + name + "' has extent "
                                  + std::to_string(dim) + " on axis " + std::to_string(d)
                                  + ", model expects " + std::to_string(p->value.extent(d)));
            }
        }
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(real)));
        if (!in) throw ConfigError("truncated checkpoint " + path + " at parameter '" + name + "'");
    }
    in.peek();
    if (!in.eof()) throw ConfigError("checkpoint " + path + " has trailing bytes");
}

TeddnModel load_checkpoint(const std::string& path) {
    TeddnModel model = TeddnModel::build(peek_checkpoint_config(path), 0);
    load_checkpoint_into(model, path);
    return model;
}

} // namespace teddn
