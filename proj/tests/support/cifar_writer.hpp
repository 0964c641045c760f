#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

namespace sgap::testing {

// Builds CIFAR-10 style records: label byte then 3072 pixel bytes.
inline std::vector<std::uint8_t> make_cifar_bytes(
    std::size_t records, const std::function<std::uint8_t(std::size_t)>& label,
    const std::function<std::uint8_t(std::size_t, std::size_t)>& pixel) {
  std::vector<std::uint8_t> out;
  out.reserve(records * 3073);
  for (std::size_t r = 0; r < records; ++r) {
    out.push_back(label(r));
    for (std::size_t p = 0; p < 3072; ++p) out.push_back(pixel(r, p));
  }
  return out;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace sgap::testing
