#pragma once

#include <string>
#include <unordered_map>

#include "lspgcn/layers.hpp"

namespace lspgcn {

/// Binary model checkpoint. Layout (all little-endian):
///   magic "LSPD" | u32 version (1) | u32 spec-json length | spec json bytes
///   | u32 tensor count | per tensor: u32 name length, name bytes,
///     u32 rank, u64 dims..., float32 data.
/// Round trips are bitwise exact.
void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     const std::vector<NamedParam>& params);

struct LoadedCheckpoint {
    ModelSpec spec;
    std::unordered_map<std::string, Tensor> params;
};

/// Validates magic, version, and that tensor shapes are self-consistent.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Convenience: construct the model described by the checkpoint and fill its
/// parameters (shape agreement enforced).
Model load_model(const std::string& path);

}  // namespace lspgcn
