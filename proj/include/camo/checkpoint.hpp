#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camo/nn.hpp"

namespace camo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned container shared by generator, detector and visual
/// discriminator weights.
///
/// Layout (little-endian): "CAMOCKPT", u32 version, then three u32-length
/// prefixed strings (kind, backbone id, metadata JSON), u64 parameter count
/// and the float32 parameters.
struct Checkpoint {
    std::string kind;
    std::string backbone_id;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads weights into a network built from the checkpoint's backbone id,
/// refusing a kind mismatch.
nn::ConvNet network_from_checkpoint(const Checkpoint& ckpt, const std::string& expected_kind);

}  // namespace camo
