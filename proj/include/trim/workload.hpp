#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trim/detail/math.hpp"
#include "trim/errors.hpp"

namespace trim {

// Raw convolutional layer fields as read from a model file. Output
// dimensions are never part of the input; they are always derived.
struct LayerGeometry {
  int h_i = 0;
  int w_i = 0;
  int m = 0;  // input channels
  int n = 0;  // filters / output channels
  int k = 0;  // square kernel side
  int stride = 1;
  int padding = 0;

  friend bool operator==(const LayerGeometry&, const LayerGeometry&) = default;
};

struct OutputDims {
  int h_o = 0;
  int w_o = 0;

  friend bool operator==(const OutputDims&, const OutputDims&) = default;
};

namespace detail {

inline int output_extent(int in, int k, int stride, int padding, const char* axis) {
  const int padded = in + 2 * padding;
  if (k > padded) {
    throw GeometryError(std::string("kernel side ") + std::to_string(k) + " exceeds padded " + axis +
                        " " + std::to_string(padded));
  }
  if ((padded - k) % stride != 0) {
    throw ShapeMismatchError(std::string("(") + axis + " + 2*padding - K) = " +
                             std::to_string(padded - k) + " is not divisible by stride " +
                             std::to_string(stride));
  }
  return (padded - k) / stride + 1;
}

inline void check_geometry_fields(const LayerGeometry& g) {
  if (g.h_i < 1) throw ConfigError("h_i", "must be >= 1");
  if (g.w_i < 1) throw ConfigError("w_i", "must be >= 1");
  if (g.m < 1) throw ConfigError("m", "must be >= 1");
  if (g.n < 1) throw ConfigError("n", "must be >= 1");
  if (g.k < 1) throw ConfigError("k", "must be >= 1");
  if (g.stride < 1) throw ConfigError("stride", "must be >= 1");
  if (g.padding < 0) throw ConfigError("padding", "must be >= 0");
}

}  // namespace detail

// Exact convolution output dimensions.
inline OutputDims infer_output_dims(const LayerGeometry& g) {
  detail::check_geometry_fields(g);
  return {detail::output_extent(g.h_i, g.k, g.stride, g.padding, "height"),
          detail::output_extent(g.w_i, g.k, g.stride, g.padding, "width")};
}

// One validated convolutional layer. Immutable after construction.
class LayerShape {
 public:
  LayerShape(int index, const LayerGeometry& g) : index_(index), geom_(g), out_(infer_output_dims(g)) {
    if (index < 1) throw ConfigError("index", "layer indices start at 1");
  }

  int index() const noexcept { return index_; }
  int h_i() const noexcept { return geom_.h_i; }
  int w_i() const noexcept { return geom_.w_i; }
  int m() const noexcept { return geom_.m; }
  int n() const noexcept { return geom_.n; }
  int k() const noexcept { return geom_.k; }
  int stride() const noexcept { return geom_.stride; }
  int padding() const noexcept { return geom_.padding; }
  int h_o() const noexcept { return out_.h_o; }
  int w_o() const noexcept { return out_.w_o; }
  int padded_width() const noexcept { return geom_.w_i + 2 * geom_.padding; }
  int padded_height() const noexcept { return geom_.h_i + 2 * geom_.padding; }
  const LayerGeometry& geometry() const noexcept { return geom_; }

  friend bool operator==(const LayerShape&, const LayerShape&) = default;

 private:
  int index_;
  LayerGeometry geom_;
  OutputDims out_;
};

class CnnModel {
 public:
  CnnModel(std::string name, std::vector<LayerShape> layers) : name_(std::move(name)), layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("layers", "model must contain at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].index() != static_cast<int>(i) + 1) {
        throw ConfigError("layers", "layer indices must be consecutive from 1");
      }
    }
  }

  // Builds consecutive indices from raw geometries.
  static CnnModel from_geometries(std::string name, const std::vector<LayerGeometry>& geoms) {
    std::vector<LayerShape> layers;
    layers.reserve(geoms.size());
    for (std::size_t i = 0; i < geoms.size(); ++i) layers.emplace_back(static_cast<int>(i) + 1, geoms[i]);
    return CnnModel(std::move(name), std::move(layers));
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<LayerShape>& layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return layers_.size(); }
  const LayerShape& layer(int index) const { return layers_.at(static_cast<std::size_t>(index - 1)); }

  friend bool operator==(const CnnModel&, const CnnModel&) = default;

 private:
  std::string name_;
  std::vector<LayerShape> layers_;
};

// 2*K*K*H_O*W_O*M*N (a MAC counts as two operations).
inline std::uint64_t ops_count(const LayerShape& s) {
  using detail::checked_mul;
  std::uint64_t v = 2;
  for (std::uint64_t f : {std::uint64_t(s.k()), std::uint64_t(s.k()), std::uint64_t(s.h_o()),
                          std::uint64_t(s.w_o()), std::uint64_t(s.m()), std::uint64_t(s.n())}) {
    v = checked_mul(v, f, "operation count");
  }
  return v;
}

inline std::uint64_t ops_count(const CnnModel& model) {
  std::uint64_t total = 0;
  for (const auto& l : model.layers()) total = detail::checked_add(total, ops_count(l), "operation count");
  return total;
}

struct Footprint {
  std::uint64_t ifmap_bytes = 0;
  std::uint64_t weight_bytes = 0;

  std::uint64_t total() const noexcept { return ifmap_bytes + weight_bytes; }
};

inline Footprint layer_footprint(const LayerShape& s, int bits) {
  if (bits <= 0 || bits % 8 != 0) throw ConfigError("b", "byte accounting needs a positive multiple of 8 bits");
  const std::uint64_t bytes_per = static_cast<std::uint64_t>(bits / 8);
  using detail::checked_mul;
  Footprint f;
  f.ifmap_bytes = checked_mul(checked_mul(std::uint64_t(s.h_i()) * s.w_i(), s.m(), "ifmap size"), bytes_per,
                              "ifmap size");
  f.weight_bytes = checked_mul(checked_mul(std::uint64_t(s.k()) * s.k(), std::uint64_t(s.m()) * s.n(), "weights"),
                               bytes_per, "weights");
  return f;
}

// Network memory requirement under the two readings of "memory to deal
// with ifmaps and weights": every layer's tensors at once, or the largest
// single-layer working set.
struct NetworkFootprint {
  std::uint64_t all_layers_bytes = 0;
  std::uint64_t peak_layer_bytes = 0;
  int peak_layer = 0;
};

inline NetworkFootprint network_footprint(const CnnModel& model, int bits) {
  NetworkFootprint out;
  for (const auto& l : model.layers()) {
    const auto f = layer_footprint(l, bits);
    out.all_layers_bytes += f.total();
    if (f.total() > out.peak_layer_bytes) {
      out.peak_layer_bytes = f.total();
      out.peak_layer = l.index();
    }
  }
  return out;
}

// The 13 convolutional layers of VGG-16 (3x3 kernels, stride 1, padding 1).
inline CnnModel builtin_vgg16() {
  struct Row {
    int side, m, n;
  };
  static constexpr Row rows[] = {{224, 3, 64},   {224, 64, 64},  {112, 64, 128}, {112, 128, 128}, {56, 128, 256},
                                 {56, 256, 256}, {56, 256, 256}, {28, 256, 512}, {28, 512, 512},  {28, 512, 512},
                                 {14, 512, 512}, {14, 512, 512}, {14, 512, 512}};
  std::vector<LayerGeometry> geoms;
  for (const auto& r : rows) geoms.push_back({r.side, r.side, r.m, r.n, 3, 1, 1});
  return CnnModel::from_geometries("vgg16", geoms);
}

// Divides spatial dimensions by `divisor` (rounding up, at least 1) for
// desk-scale simulation. Channel counts are unchanged.
inline CnnModel scale_spatial(const CnnModel& model, int divisor) {
  if (divisor < 1) throw ConfigError("scale", "must be >= 1");
  std::vector<LayerGeometry> geoms;
  for (const auto& l : model.layers()) {
    auto g = l.geometry();
    g.h_i = std::max(1, static_cast<int>(detail::ceil_div(g.h_i, divisor)));
    g.w_i = std::max(1, static_cast<int>(detail::ceil_div(g.w_i, divisor)));
    geoms.push_back(g);
  }
  return CnnModel::from_geometries(model.name(), geoms);
}

// Keeps only the listed 1-based layers, renumbering from 1.
inline CnnModel select_layers(const CnnModel& model, const std::vector<int>& indices) {
  std::vector<LayerGeometry> geoms;
  for (int idx : indices) {
    if (idx < 1 || idx > static_cast<int>(model.size())) {
      throw ConfigError("layers", "layer " + std::to_string(idx) + " not in model");
    }
    geoms.push_back(model.layer(idx).geometry());
  }
  return CnnModel::from_geometries(model.name(), geoms);
}

// ---- JSON model file -------------------------------------------------------

inline nlohmann::json to_json(const CnnModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    layers.push_back({{"h_i", l.h_i()},
                      {"w_i", l.w_i()},
                      {"m", l.m()},
                      {"n", l.n()},
                      {"k", l.k()},
                      {"stride", l.stride()},
                      {"padding", l.padding()}});
  }
  return {{"name", model.name()}, {"layers", layers}};
}

inline CnnModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model", "expected a JSON object");
  if (!j.contains("layers") || !j.at("layers").is_array()) throw ConfigError("layers", "missing layer array");
  std::vector<LayerGeometry> geoms;
  for (const auto& jl : j.at("layers")) {
    LayerGeometry g;
    auto field = [&](const char* key, int& out, bool required) {
      if (!jl.contains(key)) {
        if (required) throw ConfigError(key, "missing");
        return;
      }
      if (!jl.at(key).is_number_integer()) throw ConfigError(key, "must be an integer");
      out = jl.at(key).get<int>();
    };
    field("h_i", g.h_i, true);
    field("w_i", g.w_i, true);
    field("m", g.m, true);
    field("n", g.n, true);
    field("k", g.k, true);
    field("stride", g.stride, false);
    field("padding", g.padding, false);
    geoms.push_back(g);
  }
  return CnnModel::from_geometries(j.value("name", std::string("model")), geoms);
}

inline CnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("model", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model", std::string("invalid JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace trim
