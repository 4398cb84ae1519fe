#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace dynrisk {

/// Location of a bundled data file. DYNRISK_DATA_DIR in the environment
/// overrides the build-time default.
inline std::filesystem::path data_file(const std::string& name) {
  if (const char* dir = std::getenv("DYNRISK_DATA_DIR"); dir && *dir) {
    return std::filesystem::path(dir) / name;
  }
#ifdef DYNRISK_DATA_DIR
  return std::filesystem::path(DYNRISK_DATA_DIR) / name;
#else
  return std::filesystem::path("data") / name;
#endif
}

}  // namespace dynrisk
