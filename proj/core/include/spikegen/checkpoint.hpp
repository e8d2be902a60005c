#pragma once

#include <string>

#include "spikegen/optim.hpp"

namespace spikegen {

/// Versioned binary parameter container: 8-byte magic, u32 version, u32
/// record count, then per record a length-prefixed name, rank, dims and a
/// little-endian f32 payload.
void save_checkpoint(const std::string& path, const ParamStore& params);

/// Loads values into an already-constructed model's parameter store. Every
/// record must match an existing parameter's name and shape exactly.
void load_checkpoint(const std::string& path, ParamStore& params);

}  // namespace spikegen
