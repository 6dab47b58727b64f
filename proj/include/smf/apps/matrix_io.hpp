#pragma once

#include <filesystem>

#include "smf/types.hpp"

namespace smf::apps {

// "SMF1" binary: magic, u32 LE rows, u32 LE cols, row-major f64 LE values.
void write_smf1(const std::filesystem::path& path, const Matrix& M);
Matrix read_smf1(const std::filesystem::path& path);

// Headerless CSV with shortest round-trip decimal formatting.
void write_csv(const std::filesystem::path& path, const Matrix& M);
Matrix read_csv(const std::filesystem::path& path);

/// Dispatches on the extension: ".csv" is CSV, anything else SMF1.
void write_matrix(const std::filesystem::path& path, const Matrix& M);
Matrix read_matrix(const std::filesystem::path& path);

}  // namespace smf::apps
