#pragma once

#include <string>

namespace gistkit::detail {

/// Whole-file read; throws IoError.
std::string read_file(const std::string& path);

/// Writes to a sibling temporary file, then renames over `path`. Creates the
/// parent directory. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace gistkit::detail
