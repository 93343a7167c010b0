#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "modsr/image.hpp"
#include "modsr/registration.hpp"

namespace modsr::io {

/// Binary PGM (P5). Writes 16-bit big-endian (maxval 65535) with intensities
/// in [0,1] mapped linearly and clamped; reads maxval <= 65535 (8 or 16 bit).
void write_pgm(const std::filesystem::path& path, const ImageGrid& img);
ImageGrid read_pgm(const std::filesystem::path& path);

/// Mask as PGM: valid -> 1.0, invalid -> 0.0.
void write_mask_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& mask, int width, int height);

/// `frame_index y1 y2 u v` per line, whitespace separated, `#` comments.
std::vector<CorrespondenceSet> read_correspondences(const std::filesystem::path& path);
void write_correspondences(const std::filesystem::path& path, const std::vector<CorrespondenceSet>& sets);

/// Header line `camera fx fy cx cy skew kappa`, then one line per frame:
/// `frame index h00 h01 h02 h10 h11 h12 h20 h21 h22 photometric_rms reprojection_rms`.
void write_registration(const std::filesystem::path& path, const RegistrationResult& reg);
RegistrationResult read_registration(const std::filesystem::path& path);

/// Files matching a glob pattern (`*` and `?` in the last path component), sorted.
std::vector<std::filesystem::path> glob_files(const std::string& pattern);

/// Trailing integer of a file stem (frame_012.pgm -> 12), or -1.
int index_from_filename(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace modsr::io
