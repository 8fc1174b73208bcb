#pragma once

#include <xmc/error.hpp>
#include <xmc/grad/adam.hpp>
#include <xmc/text/cooccurrence.hpp>
#include <xmc/visual/network.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace xmc::train {

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // epochs between snapshots, 0 = final only
  visual::EncoderConfig encoder;
  text::TextConfig text;
  grad::AdamConfig adam;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    encoder.validate();
    text.validate();
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

// Applies one key=value setting. Unknown keys raise ConfigError naming the key.
inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  using detail::to_double;
  using detail::to_uint;
  if (key == "batch_size") c.batch_size = to_uint(key, value);
  else if (key == "epochs") c.epochs = to_uint(key, value);
  else if (key == "seed") c.seed = to_uint(key, value);
  else if (key == "checkpoint_interval") c.checkpoint_interval = to_uint(key, value);
  else if (key == "n_clusters") c.encoder.n_clusters = to_uint(key, value);
  else if (key == "visual_threshold") c.encoder.visual_threshold = to_double(key, value);
  else if (key == "image_size") c.encoder.image_size = to_uint(key, value);
  else if (key == "head_init") c.encoder.head_init = visual::head_init_from_string(value);
  else if (key == "head_init_scale") c.encoder.head_init_scale = to_double(key, value);
  else if (key == "channels") {
    c.encoder.channels.clear();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) c.encoder.channels.push_back(to_uint(key, detail::trim(part)));
  } else if (key == "text_threshold") c.text.text_threshold = to_double(key, value);
  else if (key == "learning_rate") c.adam.learning_rate = to_double(key, value);
  else if (key == "beta1") c.adam.beta1 = to_double(key, value);
  else if (key == "beta2") c.adam.beta2 = to_double(key, value);
  else if (key == "epsilon") c.adam.epsilon = to_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

// Flat key=value text; '#' starts a comment line.
inline TrainConfig parse_config(const std::string& text, TrainConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(base, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return base;
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

// Canonical key=value rendering; parse_config(to_text(c)) == c.
inline std::string to_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "batch_size=" << c.batch_size << '\n'
     << "epochs=" << c.epochs << '\n'
     << "seed=" << c.seed << '\n'
     << "checkpoint_interval=" << c.checkpoint_interval << '\n'
     << "n_clusters=" << c.encoder.n_clusters << '\n'
     << "visual_threshold=" << detail::shortest(c.encoder.visual_threshold) << '\n'
     << "image_size=" << c.encoder.image_size << '\n'
     << "channels=";
  for (std::size_t i = 0; i < c.encoder.channels.size(); ++i) os << (i ? "," : "") << c.encoder.channels[i];
  os << '\n'
     << "head_init=" << visual::to_string(c.encoder.head_init) << '\n'
     << "head_init_scale=" << detail::shortest(c.encoder.head_init_scale) << '\n'
     << "text_threshold=" << detail::shortest(c.text.text_threshold) << '\n'
     << "learning_rate=" << detail::shortest(c.adam.learning_rate) << '\n'
     << "beta1=" << detail::shortest(c.adam.beta1) << '\n'
     << "beta2=" << detail::shortest(c.adam.beta2) << '\n'
     << "epsilon=" << detail::shortest(c.adam.epsilon) << '\n';
  return os.str();
}

}  // namespace xmc::train
