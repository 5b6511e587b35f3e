#pragma once

#include <string>

#include "skt/model.hpp"

namespace skt::model {

// Versioned binary container: config block followed by every named parameter
// array with its shape. Loading validates names and shapes against the
// stored config and refuses mismatches. Byte order is the host's
// (little-endian on every supported target).
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace skt::model
