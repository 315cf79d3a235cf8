#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trim/errors.hpp"
#include "trim/tensor.hpp"

namespace trim {

// Binary tensor file: a 16-byte little-endian header followed by the raw
// values, two bytes each, little-endian.
//
//   0  "TRIM"          magic
//   4  kind            1 = feature map (unsigned), 2 = filter set (signed)
//   5  bits            B
//   6  reserved (u16)  zero
//   8  dims (4 x u16)  feature map: channels, height, width, 0
//                      filter set:  filters, channels, k, k
enum class TensorKind : std::uint8_t { feature_map = 1, filter_set = 2 };

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw FormatError("truncated tensor file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint16_t dim16(int v, const char* what) {
  if (v < 0 || v > 0xffff) throw FormatError(std::string(what) + " does not fit the 16-bit header field");
  return static_cast<std::uint16_t>(v);
}

inline void write_header(std::ostream& os, TensorKind kind, int bits, std::array<std::uint16_t, 4> dims) {
  os.write("TRIM", 4);
  os.put(static_cast<char>(kind));
  os.put(static_cast<char>(bits));
  put_u16(os, 0);
  for (auto d : dims) put_u16(os, d);
}

struct Header {
  TensorKind kind{};
  int bits = 0;
  std::array<std::uint16_t, 4> dims{};
};

inline Header read_header(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "TRIM") throw FormatError("bad tensor magic");
  Header h;
  const int kind = is.get();
  const int bits = is.get();
  if (!is) throw FormatError("truncated tensor header");
  if (kind != 1 && kind != 2) throw FormatError("unknown tensor kind " + std::to_string(kind));
  h.kind = static_cast<TensorKind>(kind);
  h.bits = bits;
  get_u16(is);
  for (auto& d : h.dims) d = get_u16(is);
  return h;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const FeatureMap& f) {
  detail::write_header(os, TensorKind::feature_map, f.bits(),
                       {detail::dim16(f.channels(), "channels"), detail::dim16(f.height(), "height"),
                        detail::dim16(f.width(), "width"), 0});
  for (auto v : f.values()) detail::put_u16(os, v);
}

inline void write_tensor(std::ostream& os, const FilterSet& w) {
  detail::write_header(os, TensorKind::filter_set, w.bits(),
                       {detail::dim16(w.filters(), "filters"), detail::dim16(w.channels(), "channels"),
                        detail::dim16(w.k(), "k"), detail::dim16(w.k(), "k")});
  for (auto v : w.values()) detail::put_u16(os, static_cast<std::uint16_t>(v));
}

inline FeatureMap read_feature_map(std::istream& is) {
  const auto h = detail::read_header(is);
  if (h.kind != TensorKind::feature_map) throw FormatError("tensor file holds a filter set, not a feature map");
  const std::size_t n = std::size_t(h.dims[0]) * h.dims[1] * h.dims[2];
  std::vector<Activation> vals(n);
  for (auto& v : vals) v = detail::get_u16(is);
  return FeatureMap(h.dims[0], h.dims[1], h.dims[2], h.bits, std::move(vals));
}

inline FilterSet read_filter_set(std::istream& is) {
  const auto h = detail::read_header(is);
  if (h.kind != TensorKind::filter_set) throw FormatError("tensor file holds a feature map, not a filter set");
  if (h.dims[2] != h.dims[3]) throw FormatError("non-square kernel in tensor header");
  const std::size_t n = std::size_t(h.dims[0]) * h.dims[1] * h.dims[2] * h.dims[3];
  std::vector<Weight> vals(n);
  for (auto& v : vals) v = static_cast<Weight>(static_cast<std::int16_t>(detail::get_u16(is)));
  return FilterSet(h.dims[0], h.dims[1], h.dims[2], h.bits, std::move(vals));
}

// JSON debug form for small tensors.
inline nlohmann::json to_json(const FeatureMap& f) {
  return {{"kind", "feature_map"}, {"bits", f.bits()}, {"channels", f.channels()},
          {"height", f.height()},  {"width", f.width()}, {"values", f.values()}};
}

inline nlohmann::json to_json(const FilterSet& w) {
  return {{"kind", "filter_set"}, {"bits", w.bits()}, {"filters", w.filters()},
          {"channels", w.channels()}, {"k", w.k()}, {"values", w.values()}};
}

inline FeatureMap feature_map_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "feature_map") throw FormatError("JSON tensor is not a feature map");
    return FeatureMap(j.at("channels").get<int>(), j.at("height").get<int>(), j.at("width").get<int>(),
                      j.at("bits").get<int>(), j.at("values").get<std::vector<Activation>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad JSON feature map: ") + e.what());
  }
}

inline FilterSet filter_set_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "filter_set") throw FormatError("JSON tensor is not a filter set");
    return FilterSet(j.at("filters").get<int>(), j.at("channels").get<int>(), j.at("k").get<int>(),
                     j.at("bits").get<int>(), j.at("values").get<std::vector<Weight>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad JSON filter set: ") + e.what());
  }
}

}  // namespace trim
