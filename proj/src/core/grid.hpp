#pragma once

// LPS grid file: the text line `LPSGRID v1 F=<f> N=<n>\n` followed by F*N
// little-endian float32 values, frame by frame (all F bins of frame 0 first).

#include <filesystem>

#include "core/dsp.hpp"

namespace pvae {

void write_lps_grid(const std::filesystem::path& path, const Eigen::MatrixXd& values);
Eigen::MatrixXd read_lps_grid(const std::filesystem::path& path);

}  // namespace pvae
