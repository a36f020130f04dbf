#pragma once

#include <filesystem>
#include <string>

#include "shad3s/models.hpp"

namespace shad3s {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  BundleSpec spec;
  int epoch = 0;
  std::string note;  // free-form, e.g. the training config as JSON
};

/// One archive: a JSON metadata record (version, spec, channel wiring) plus named weights.
void save_checkpoint(ModelBundle& bundle, const std::filesystem::path& path, int epoch = 0,
                     const std::string& note = {});

/// Reads only the metadata. Throws NotFoundError, or FormatError for a foreign or newer archive.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

ModelBundle load_checkpoint(const std::filesystem::path& path);
/// Refuses (FormatError) an archive whose architecture differs from `expected`.
ModelBundle load_checkpoint(const std::filesystem::path& path, const BundleSpec& expected);

std::string spec_to_json(const BundleSpec& spec);
BundleSpec spec_from_json(const std::string& text);

}  // namespace shad3s
