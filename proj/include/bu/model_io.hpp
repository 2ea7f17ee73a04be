#pragma once

#include <filesystem>
#include <iosfwd>

#include "bu/nn.hpp"

namespace bu {

// Binary model format, version 1. All integers are little-endian, all
// parameters IEEE-754 binary64 little-endian.
//
//   char[4]  magic "BUAE"
//   u32      version (1)
//   u32      encoder layer count
//   u32      decoder layer count
//   per layer, encoder first:
//     u32 in_dim, u32 out_dim, u8 activation (0 sigmoid, 1 relu, 2 identity)
//   per layer, in the same order:
//     f64[out_dim * in_dim] weight, row-major
//     f64[out_dim]          bias
inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const AeModel& model);
AeModel read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const AeModel& model);
AeModel load_model(const std::filesystem::path& path);

}  // namespace bu
