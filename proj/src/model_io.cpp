#include "toxdebias/model_io.hpp"

#include <bit>
#include <cstring>

#include "toxdebias/errors.hpp"

namespace toxdebias {

namespace {

constexpr char kMagic[4] = {'T', 'X', 'D', 'B'};

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("model file truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

const std::vector<double>& ArrayFile::at(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw DataError("model file has no array '" + name + "'");
  return it->second;
}

std::string encode_array_file(
    nlohmann::json header,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& arrays) {
  nlohmann::json listing = nlohmann::json::array();
  for (const auto& [name, data] : arrays) {
    listing.push_back({{"name", name}, {"size", data->size()}});
  }
  header["arrays"] = std::move(listing);
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kArrayFileVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [name, data] : arrays) {
    for (double v : *data) put<double>(out, v);
  }
  return out;
}

ArrayFile decode_array_file(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a model file (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kArrayFileVersion) {
    throw DataError("unsupported model file version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw DataError("model file truncated");
  ArrayFile file;
  try {
    file.header = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model header is not valid JSON: ") + e.what());
  }
  pos += len;
  for (const auto& entry : file.header.at("arrays")) {
    const auto name = entry.at("name").get<std::string>();
    const auto size = entry.at("size").get<std::size_t>();
    if (pos + size * sizeof(double) > bytes.size()) throw DataError("model file truncated");
    std::vector<double> data(size);
    if (size) std::memcpy(data.data(), bytes.data() + pos, size * sizeof(double));
    pos += size * sizeof(double);
    file.arrays.emplace(name, std::move(data));
  }
  if (pos != bytes.size()) throw DataError("trailing bytes in model file");
  return file;
}

}  // namespace toxdebias
