#pragma once

// "BYVC" checkpoint container.
//
//   magic "BYVC" | u32 version | u32 header_len | header JSON (UTF-8)
//   u32 tensor_count, then per tensor:
//     u32 name_len | name | u32 ndim | u32 dims[ndim] | f32 data
//
// All integers and floats are little-endian. Parameters come first in
// declaration order; optimizer moments follow as "adam.m.<name>" and
// "adam.v.<name>" when the header says so.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "byov/model.hpp"
#include "byov/numerics/adam.hpp"

namespace byov::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

struct Checkpoint {
  ArchConfig arch;
  std::uint64_t step = 0;
  std::string rng_state;  // textual engine state; empty if not recorded
  nlohmann::json config = nlohmann::json::object();  // training config echo
  ModelParams<float> params;
  std::optional<num::AdamState<float>> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace byov::model
