#include "core/grid.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>

#include "core/error.hpp"
#include "core/io.hpp"

namespace pvae {

void write_lps_grid(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
  char header[64];
  const int n = std::snprintf(header, sizeof header, "LPSGRID v1 F=%d N=%d\n",
                              static_cast<int>(values.rows()), static_cast<int>(values.cols()));
  std::vector<unsigned char> out(header, header + n);
  out.reserve(out.size() + 4 * static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values.data()[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  write_file_atomic(path, out.data(), out.size());
}

Eigen::MatrixXd read_lps_grid(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const auto nl = std::find(bytes.begin(), bytes.end(), '\n');
  require(nl != bytes.end(), ErrorCode::kFormat, "lps grid: missing header");
  const std::string header(bytes.begin(), nl);
  int f = 0, n = 0;
  require(std::sscanf(header.c_str(), "LPSGRID v1 F=%d N=%d", &f, &n) == 2 && f > 0 && n >= 0,
          ErrorCode::kFormat, "lps grid: bad header");
  const std::size_t offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  require(bytes.size() == offset + 4ull * f * n, ErrorCode::kFormat, "lps grid: payload size mismatch");
  Eigen::MatrixXd m(f, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const std::uint32_t bits = get_u32(bytes.data() + offset + 4 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    m.data()[i] = v;
  }
  return m;
}

}  // namespace pvae
