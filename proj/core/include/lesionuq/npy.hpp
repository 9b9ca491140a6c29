#pragma once

#include <filesystem>

#include "lesionuq/volume.hpp"

namespace lesionuq {

/// Reads a rank-3 NPY (v1.0, v2.0 accepted) file of shape (nz, ny, nx).
/// Float and integer dtypes are widened to double.
/// Errors: FormatError (magic, header, dtype, truncation), ShapeError (rank,
/// fortran order, dims guard), DataError (non-finite values), IoError.
Volume load_volume(const std::filesystem::path& path,
                   std::size_t max_extent = kDefaultMaxExtent);

/// Integer-typed counterpart of load_volume. Negative labels are a DataError.
LabelVolume load_labels(const std::filesystem::path& path,
                        std::size_t max_extent = kDefaultMaxExtent);

/// Writes NPY v1.0, '<f8', C order, shape (nz, ny, nx). Overwrites.
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Writes '|u1' when every label fits in a byte, '<u4' otherwise.
void save_labels(const LabelVolume& v, const std::filesystem::path& path);

}  // namespace lesionuq
