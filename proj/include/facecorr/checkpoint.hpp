#pragma once

#include "facecorr/losses.hpp"
#include "facecorr/network.hpp"

#include <cstdint>
#include <string>

namespace facecorr {

/// Checkpoint metadata stored in the JSON manifest that precedes the binary
/// parameter blocks. The parameter order is declared in the manifest, so the
/// format stays self-describing across architecture changes.
struct CheckpointInfo {
    int format_version = 1;
    ArchConfig arch;
    uint64_t seed = 0;
    int phase = 0;
    int epoch = 0;
    LossWeights weights;
};

/// Single-file format: magic line, little-endian manifest byte length,
/// manifest JSON, then flat little-endian 64-bit float parameter blocks in
/// the declared order. Save(load(x)) reproduces x byte for byte.
void save_checkpoint(const std::string& path, const ShapeModel& model, const CheckpointInfo& info);
ShapeModel load_checkpoint(const std::string& path, CheckpointInfo* info_out = nullptr);

}  // namespace facecorr
