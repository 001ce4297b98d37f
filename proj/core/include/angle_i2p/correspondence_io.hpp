#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "angle_i2p/types.hpp"

namespace angle_i2p {

/// Line-oriented text format:
///
///   K fx fy cx cy width height
///   POSE r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz      (optional)
///   u v qx qy qz d ox oy oz [label]                        (one per record)
///
/// Reals are written with 17 significant digits so a read after a write is
/// bit-exact. Labels are 0/1 and must be present on every record or none.
void write_correspondences(std::ostream& out, const CorrespondenceSet& corrs);
CorrespondenceSet read_correspondences(std::istream& in);

void save_correspondences(const std::filesystem::path& path, const CorrespondenceSet& corrs);
CorrespondenceSet load_correspondences(const std::filesystem::path& path);

/// 17-significant-digit rendering used by every text artifact.
std::string format_real(double value);

}  // namespace angle_i2p
