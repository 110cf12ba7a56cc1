#pragma once

#include "facecorr/training.hpp"

#include <string>

namespace facecorr {

/// Human-editable run configuration: `key value` lines, '#' comments, a
/// mandatory `config_version 1` record, and hard errors on unknown keys.
/// Every key has a default carrying the standard hyperparameters, so an
/// empty-but-versioned file is a valid config.
TrainConfig read_run_config(const std::string& path);
void write_run_config(const std::string& path, const TrainConfig& config);

/// The documented schema (key, default, description) for --help and docs.
std::string run_config_schema();

}  // namespace facecorr
