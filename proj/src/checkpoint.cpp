#include "camo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "camo/error.hpp"

namespace camo {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'C', 'A', 'M', 'O', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ofstream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s)
{
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw ModelStateError("truncated checkpoint: " + path.string());
    }
    return v;
}

std::string get_string(std::ifstream& in, const std::filesystem::path& path)
{
    const auto n = get<std::uint32_t>(in, path);
    if (n > (1u << 26)) {
        throw ModelStateError("corrupt checkpoint header: " + path.string());
    }
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) {
        throw ModelStateError("truncated checkpoint: " + path.string());
    }
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write checkpoint: " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, ckpt.kind);
    put_string(out, ckpt.backbone_id);
    put_string(out, ckpt.metadata.dump());
    put<std::uint64_t>(out, ckpt.params.size());
    out.write(reinterpret_cast<const char*>(ckpt.params.data()),
              static_cast<std::streamsize>(ckpt.params.size() * sizeof(float)));
    if (!out) {
        throw IoError("failed writing checkpoint: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path.string());
    }
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ModelStateError("not a checkpoint file: " + path.string());
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw ModelStateError("unsupported checkpoint version " + std::to_string(version) + ": " +
                              path.string());
    }
    Checkpoint ckpt;
    ckpt.kind = get_string(in, path);
    ckpt.backbone_id = get_string(in, path);
    try {
        ckpt.metadata = nlohmann::json::parse(get_string(in, path));
    } catch (const nlohmann::json::exception&) {
        throw ModelStateError("corrupt checkpoint metadata: " + path.string());
    }
    const auto count = get<std::uint64_t>(in, path);
    if (count > (1ull << 32)) {
        throw ModelStateError("corrupt checkpoint parameter count: " + path.string());
    }
    ckpt.params.resize(count);
    if (!in.read(reinterpret_cast<char*>(ckpt.params.data()),
                 static_cast<std::streamsize>(count * sizeof(float)))) {
        throw ModelStateError("truncated checkpoint: " + path.string());
    }
    return ckpt;
}

nn::ConvNet network_from_checkpoint(const Checkpoint& ckpt, const std::string& expected_kind)
{
    if (ckpt.kind != expected_kind) {
        throw ModelStateError("checkpoint holds a '" + ckpt.kind + "', expected '" + expected_kind + "'");
    }
    nn::ConvNet net(nn::parse_net_id(ckpt.backbone_id), 0);
    net.set_flat_params(ckpt.params);
    return net;
}

}  // namespace camo
