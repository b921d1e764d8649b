#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace toxdebias {

// Versioned binary container for dense parameter arrays:
//   "TXDB" | u32 version | u64 header length | header JSON | float64 arrays
// Integers and doubles are little-endian. The header lists the arrays in
// storage order as {"name", "size"} under "arrays".
struct ArrayFile {
  nlohmann::json header;
  std::map<std::string, std::vector<double>> arrays;

  const std::vector<double>& at(const std::string& name) const;
};

inline constexpr std::uint32_t kArrayFileVersion = 1;

std::string encode_array_file(nlohmann::json header,
                              const std::vector<std::pair<std::string, const std::vector<double>*>>& arrays);
ArrayFile decode_array_file(std::string_view bytes);

}  // namespace toxdebias
