#pragma once

#include <xmc/box.hpp>
#include <xmc/data/manifest.hpp>
#include <xmc/data/ppm.hpp>
#include <xmc/error.hpp>
#include <xmc/rng.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace xmc::data {

enum class ShapeKind { circle, square, triangle, cross };

struct ObjectClass {
  std::string word;  // single token, e.g. "redcircle"
  std::string shape;
  std::string color;
  ShapeKind kind;
  std::array<std::uint8_t, 3> rgb;
  std::size_t theme;
};

struct Theme {
  std::vector<std::string> words;  // context words
  std::array<std::uint8_t, 3> tint;
  std::vector<std::size_t> classes;
};

// Shapes-world: 4 shapes x 3 colours = 12 object classes, partitioned among
// scene themes; each theme has its own context words and background tint.
struct WorldSpec {
  std::vector<ObjectClass> classes;
  std::vector<Theme> themes;
  std::vector<std::string> function_words{"a", "the", "is", "on", "near", "very"};
  std::size_t canvas = 64;
  std::size_t min_objects = 1, max_objects = 3;
  int min_size = 10, max_size = 24;
  int background_noise = 16;
  int max_attempts = 100;

  // Theme of class (shape s, colour c) is (s + c) mod n_themes, which gives
  // every theme the same number of classes for 1 <= n_themes <= 4.
  static WorldSpec standard(std::size_t n_themes = 3) {
    if (n_themes < 1 || n_themes > 4) throw ConfigError("themes must be between 1 and 4");
    static const char* shapes[] = {"circle", "square", "triangle", "cross"};
    static const char* colors[] = {"red", "green", "blue"};
    static const std::array<std::uint8_t, 3> rgbs[] = {{220, 40, 40}, {40, 180, 60}, {50, 70, 220}};
    static const char* theme_words[][2] = {{"park", "grass"}, {"kitchen", "table"}, {"beach", "sand"}, {"night", "sky"}};
    static const std::array<std::uint8_t, 3> tints[] = {{196, 188, 150}, {150, 162, 178}, {178, 170, 170}, {112, 108, 128}};
    WorldSpec w;
    for (std::size_t t = 0; t < n_themes; ++t) w.themes.push_back({{theme_words[t][0], theme_words[t][1]}, tints[t], {}});
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t theme = (s + c) % n_themes;
        w.themes[theme].classes.push_back(w.classes.size());
        w.classes.push_back({std::string(colors[c]) + shapes[s], shapes[s], colors[c], static_cast<ShapeKind>(s),
                             rgbs[c], theme});
      }
    return w;
  }

  std::vector<std::string> class_words() const {
    std::vector<std::string> out;
    for (const auto& c : classes) out.push_back(c.word);
    return out;
  }
  std::vector<std::string> theme_words() const {
    std::vector<std::string> out;
    for (const auto& t : themes) out.insert(out.end(), t.words.begin(), t.words.end());
    return out;
  }
};

struct Scene {
  RgbImage image;
  std::string caption;
  std::vector<std::string> classes;
  std::vector<GoldBox> boxes;
  std::size_t theme = 0;
  // object pixel masks, parallel to boxes (for verification)
  std::vector<std::vector<std::uint8_t>> masks;
};

namespace detail {

inline bool inside_shape(ShapeKind kind, int size, int px, int py) {
  const double s = size;
  const double x = px + 0.5, y = py + 0.5;
  switch (kind) {
    case ShapeKind::circle: {
      const double r = s / 2.0, dx = x - r, dy = y - r;
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeKind::square: return true;
    case ShapeKind::triangle: {
      // apex at top centre, base along the bottom edge
      const double half = (y / s) * (s / 2.0);
      return std::abs(x - s / 2.0) <= half;
    }
    case ShapeKind::cross: {
      const double arm = s / 3.0;
      return (x >= arm && x <= s - arm) || (y >= arm && y <= s - arm);
    }
  }
  return false;
}

}  // namespace detail

// Renders scene `index` from its own stream so scenes are independent of
// each other and of generation order.
inline Scene render_scene(const WorldSpec& spec, std::uint64_t seed, std::uint64_t index) {
  Rng rng = derive_rng(seed, index);
  Scene scene;
  const std::size_t n = spec.canvas;
  scene.theme = rng.below(spec.themes.size());
  const Theme& theme = spec.themes[scene.theme];

  scene.image = RgbImage(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const int v = theme.tint[c] + rng.range(-spec.background_noise, spec.background_noise);
        scene.image.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }

  // distinct classes from the theme, in draw order
  std::vector<std::size_t> pool = theme.classes;
  rng.shuffle(pool.begin(), pool.end());
  const std::size_t want =
      std::min(pool.size(), spec.min_objects + rng.below(spec.max_objects - spec.min_objects + 1));

  std::vector<BoundingBox> placed;
  std::vector<std::size_t> placed_classes;
  for (std::size_t k = 0; k < want; ++k) {
    bool ok = false;
    BoundingBox box;
    for (int attempt = 0; attempt < spec.max_attempts && !ok; ++attempt) {
      const int size = rng.range(spec.min_size, spec.max_size);
      const int x0 = rng.range(0, static_cast<int>(n) - size);
      const int y0 = rng.range(0, static_cast<int>(n) - size);
      box = {x0, y0, x0 + size, y0 + size};
      // one pixel of clearance between objects
      const BoundingBox grown{box.x_min - 1, box.y_min - 1, box.x_max + 1, box.y_max + 1};
      ok = std::none_of(placed.begin(), placed.end(),
                        [&](const BoundingBox& b) { return intersection_area(grown, b) > 0; });
    }
    if (!ok) break;  // fewer objects
    placed.push_back(box);
    placed_classes.push_back(pool[k]);
  }

  for (std::size_t k = 0; k < placed.size(); ++k) {
    const auto& cls = spec.classes[placed_classes[k]];
    const auto& box = placed[k];
    std::vector<std::uint8_t> mask(n * n, 0);
    for (int py = 0; py < box.height(); ++py)
      for (int px = 0; px < box.width(); ++px)
        if (detail::inside_shape(cls.kind, box.width(), px, py)) {
          const auto x = static_cast<std::size_t>(box.x_min + px), y = static_cast<std::size_t>(box.y_min + py);
          std::copy(cls.rgb.begin(), cls.rgb.end(), scene.image.at(x, y));
          mask[y * n + x] = 1;
        }
    scene.classes.push_back(cls.word);
    scene.boxes.push_back({cls.word, box});
    scene.masks.push_back(std::move(mask));
  }

  std::string caption;
  for (std::size_t k = 0; k < scene.classes.size(); ++k) caption += (k ? " and a " : "a ") + scene.classes[k];
  std::vector<std::string> tw = theme.words;
  rng.shuffle(tw.begin(), tw.end());
  const std::size_t n_theme_words = 1 + rng.below(std::min<std::size_t>(2, tw.size()));
  for (std::size_t k = 0; k < n_theme_words; ++k) caption += " " + tw[k];
  const std::size_t n_function = 2 + rng.below(3);
  for (std::size_t k = 0; k < n_function; ++k)
    caption += " " + spec.function_words[rng.below(spec.function_words.size())];
  scene.caption = std::move(caption);
  return scene;
}

struct GeneratedPaths {
  std::string manifest;
  std::string taxonomy;
  std::string association;
  std::string concreteness;
};

inline std::string rating_string(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Writes images/, manifest.tsv and the gold resources (taxonomy.tsv,
// assoc.tsv, concreteness.tsv) under out_dir. Train scenes use indices
// [0, n_train), test scenes [n_train, n_train + n_test).
inline GeneratedPaths generate_dataset(const WorldSpec& spec, std::size_t n_train, std::size_t n_test,
                                       std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("cannot create '" + out_dir + "/images': " + ec.message());

  std::vector<MultimodalSample> samples;
  std::map<std::pair<std::string, std::string>, std::uint64_t> assoc;
  std::set<std::string> content_words;
  for (const auto& w : spec.class_words()) content_words.insert(w);
  for (const auto& w : spec.theme_words()) content_words.insert(w);

  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    const bool train = i < n_train;
    Scene scene = render_scene(spec, seed, i);
    char name[64];
    std::snprintf(name, sizeof name, "images/%s_%06zu.ppm", train ? "train" : "test", train ? i : i - n_train);
    save_ppm(scene.image, (fs::path(out_dir) / name).string());
    samples.push_back({train ? "train" : "test", name, scene.caption, scene.classes, scene.boxes});
    if (train) {
      std::set<std::string> present;
      for (const auto& tok : detail::split(scene.caption, ' '))
        if (content_words.count(tok)) present.insert(tok);
      for (const auto& a : present)
        for (const auto& b : present)
          if (a != b) ++assoc[{a, b}];
    }
  }

  GeneratedPaths paths{(fs::path(out_dir) / "manifest.tsv").string(), (fs::path(out_dir) / "taxonomy.tsv").string(),
                       (fs::path(out_dir) / "assoc.tsv").string(), (fs::path(out_dir) / "concreteness.tsv").string()};
  write_manifest(samples, paths.manifest);

  auto open = [](const std::string& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p + "' for writing");
    return out;
  };
  {
    auto out = open(paths.taxonomy);
    std::map<std::string, std::string> tax;
    for (const auto& c : spec.classes) tax[c.word] = c.shape;
    for (const auto& [w, cat] : tax) out << w << '\t' << cat << '\n';
  }
  {
    auto out = open(paths.association);
    for (const auto& [pair, n] : assoc) out << pair.first << '\t' << pair.second << '\t' << n << '\n';
  }
  {
    auto out = open(paths.concreteness);
    std::map<std::string, double> ratings;
    for (const auto& w : spec.function_words) ratings[w] = 0.0;
    ratings["and"] = 0.0;
    for (const auto& w : spec.theme_words()) ratings[w] = 0.3;
    for (const auto& w : spec.class_words()) ratings[w] = 1.0;
    for (const auto& [w, r] : ratings) out << w << '\t' << rating_string(r) << '\n';
  }
  return paths;
}

}  // namespace xmc::data
