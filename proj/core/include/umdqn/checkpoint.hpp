#pragma once

#include <map>
#include <string>

#include "umdqn/umnn.hpp"

namespace umdqn {

/// Versioned JSON checkpoint: {"format_version", "meta", "params"} where
/// params is an ordered list of {name, rows, cols, data} with row-major
/// 64-bit float data. Doubles are serialised with round-trip precision.
inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::string& path, const UmnnModel& model,
                     const std::map<std::string, std::string>& meta);

/// Loads parameter values into a model of matching shape and returns the
/// stored metadata. Throws ValidationError on format/shape mismatch.
std::map<std::string, std::string> load_checkpoint(const std::string& path, UmnnModel& model);

/// Reads only the metadata block (to rebuild the model shape first).
std::map<std::string, std::string> read_checkpoint_meta(const std::string& path);

}  // namespace umdqn
