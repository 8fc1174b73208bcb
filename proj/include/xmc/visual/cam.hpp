#pragma once

#include <xmc/box.hpp>
#include <xmc/visual/network.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace xmc::visual {

// Row-major scalar map.
struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
  double min() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }
  double mean() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
  }
};

struct Cam {
  std::size_t cluster = 0;
  Heatmap heatmap;    // feature-map resolution
  Heatmap upsampled;  // image resolution
};

// Half-pixel-centre bilinear resampling with edge clamping.
inline Heatmap upsample_bilinear(const Heatmap& in, std::size_t out_h, std::size_t out_w) {
  Heatmap out(out_h, out_w);
  if (in.height == 0 || in.width == 0) return out;
  const double sy = static_cast<double>(in.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(in.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, in.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(in.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, in.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = in.at(y0, x0) * (1.0 - wx) + in.at(y0, x1) * wx;
      const double bottom = in.at(y1, x0) * (1.0 - wx) + in.at(y1, x1) * wx;
      out.at(y, x) = top * (1.0 - wy) + bottom * wy;
    }
  }
  return out;
}

// heatmap(y, x) = sum_k W[c, k] * F_k(y, x) for a single image's final
// feature maps F (K x h x w) and the head weight matrix W (N x K).
template <class T>
Heatmap cam_from_features(const Tensor<T>& features, std::size_t sample, const Tensor<T>& head_weight,
                          std::size_t cluster) {
  const std::size_t k = features.dim(1), h = features.dim(2), w = features.dim(3);
  if (cluster >= head_weight.dim(0))
    throw ShapeError("cluster " + std::to_string(cluster) + " out of range for " + std::to_string(head_weight.dim(0)) +
                     " clusters");
  if (head_weight.dim(1) != k) throw ShapeError("head width does not match feature channels");
  Heatmap map(h, w);
  for (std::size_t ch = 0; ch < k; ++ch) {
    const double wk = static_cast<double>(head_weight[cluster * k + ch]);
    if (wk == 0.0) continue;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) map.at(y, x) += wk * static_cast<double>(features.at(sample, ch, y, x));
  }
  return map;
}

// image: (1 x 3 x S x S)
template <class T>
Cam compute_cam(const Network<T>& net, const Tensor<T>& image, std::size_t cluster) {
  if (cluster >= net.n_clusters())
    throw ShapeError("cluster " + std::to_string(cluster) + " out of range for " + std::to_string(net.n_clusters()) +
                     " clusters");
  if (image.dim(0) != 1) throw ShapeError("compute_cam expects a single image, got " + grad::shape_string(image.shape()));
  const auto inf = net.infer(image);
  Cam cam;
  cam.cluster = cluster;
  cam.heatmap = cam_from_features(inf.features, 0, net.head_weight().value, cluster);
  cam.upsampled = upsample_bilinear(cam.heatmap, image.dim(2), image.dim(3));
  return cam;
}

// All CAMs for one image from a single forward pass, for the given clusters.
template <class T>
std::vector<Cam> compute_cams(const Network<T>& net, const Tensor<T>& image, std::span<const std::size_t> clusters) {
  const auto inf = net.infer(image);
  std::vector<Cam> out;
  for (std::size_t c : clusters) {
    Cam cam;
    cam.cluster = c;
    cam.heatmap = cam_from_features(inf.features, 0, net.head_weight().value, c);
    cam.upsampled = upsample_bilinear(cam.heatmap, image.dim(2), image.dim(3));
    out.push_back(std::move(cam));
  }
  return out;
}

// Segments pixels strictly above half the maximum, takes the largest
// 4-connected component (ties: the one reached first in raster order) and
// returns its tight box. A map whose max is non-positive, or which is
// constant, yields no box.
inline std::optional<BoundingBox> extract_box(const Heatmap& map) {
  if (map.values.empty()) return std::nullopt;
  const double hi = map.max();
  if (!(hi > 0.0) || map.min() == hi) return std::nullopt;
  const double threshold = 0.5 * hi;
  const std::size_t h = map.height, w = map.width;
  std::vector<int> label(h * w, -1);
  std::vector<std::size_t> stack;
  std::size_t best_size = 0;
  BoundingBox best{};
  int next_label = 0;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (label[start] >= 0 || !(map.values[start] > threshold)) continue;
    BoundingBox box{static_cast<int>(start % w), static_cast<int>(start / w), static_cast<int>(start % w) + 1,
                    static_cast<int>(start / w) + 1};
    std::size_t size = 0;
    label[start] = next_label;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
      box.x_min = std::min(box.x_min, px);
      box.y_min = std::min(box.y_min, py);
      box.x_max = std::max(box.x_max, px + 1);
      box.y_max = std::max(box.y_max, py + 1);
      auto visit = [&](std::size_t q) {
        if (label[q] < 0 && map.values[q] > threshold) {
          label[q] = next_label;
          stack.push_back(q);
        }
      };
      if (px > 0) visit(p - 1);
      if (px + 1 < static_cast<int>(w)) visit(p + 1);
      if (py > 0) visit(p - w);
      if (py + 1 < static_cast<int>(h)) visit(p + w);
    }
    ++next_label;
    if (size > best_size) {
      best_size = size;
      best = box;
    }
  }
  if (best_size == 0) return std::nullopt;
  return best;
}

inline std::optional<BoundingBox> extract_box(const Cam& cam) { return extract_box(cam.upsampled); }

// Min-max normalization to 8 bits (row-major); a constant map becomes all 0.
inline std::vector<std::uint8_t> heatmap_to_gray(const Heatmap& map) {
  std::vector<std::uint8_t> out(map.values.size(), 0);
  const double lo = map.min(), hi = map.max();
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround((map.values[i] - lo) / (hi - lo) * 255.0));
  return out;
}

}  // namespace xmc::visual
