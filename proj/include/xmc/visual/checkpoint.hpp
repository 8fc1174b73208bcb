#pragma once

#include <xmc/binary_io.hpp>
#include <xmc/visual/network.hpp>

#include <string>
#include <vector>

namespace xmc::visual {

// Checkpoint layout (little-endian):
//   "XMCK" | u32 version=1 | u32 tensor count |
//   per tensor: u16 name length, name, u8 rank, rank x u32 dims, float32 data
inline constexpr char kCheckpointMagic[4] = {'X', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::size_t logical_rank(const grad::Shape& s) {
  std::size_t rank = 4;
  while (rank > 1 && s[rank - 1] == 1) --rank;
  return rank;
}

}  // namespace detail

template <class T>
std::vector<std::uint8_t> encode_checkpoint(const std::vector<Parameter<T>>& params) {
  io::Writer w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    if (p.name.size() > 0xFFFF) throw FormatError("tensor name too long: " + p.name);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.put_bytes(p.name.data(), p.name.size());
    const auto& shape = p.value.shape();
    const std::size_t rank = detail::logical_rank(shape);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(rank));
    for (std::size_t i = 0; i < rank; ++i) w.put<std::uint32_t>(static_cast<std::uint32_t>(shape[i]));
    for (std::size_t i = 0; i < p.value.size(); ++i) w.put<float>(static_cast<float>(p.value[i]));
  }
  return w.bytes();
}

template <class T = float>
std::vector<Parameter<T>> decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  io::Reader r(bytes, "checkpoint '" + what + "'");
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint '" + what + "': bad magic (expected XMCK)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint '" + what + "': unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto count = r.get<std::uint32_t>();
  std::vector<Parameter<T>> params;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len);
    const auto rank = r.get<std::uint8_t>();
    if (rank < 1 || rank > 4)
      throw FormatError("checkpoint '" + what + "': tensor '" + name + "' has unsupported rank " +
                        std::to_string(rank));
    grad::Shape shape{1, 1, 1, 1};
    for (std::size_t i = 0; i < rank; ++i) shape[i] = r.get<std::uint32_t>();
    const std::size_t n = grad::shape_size(shape);
    r.need(n * sizeof(float));
    Tensor<T> value(shape);
    for (std::size_t i = 0; i < n; ++i) value[i] = static_cast<T>(r.get<float>());
    params.emplace_back(std::move(name), std::move(value));
  }
  if (r.remaining() != 0)
    throw FormatError("checkpoint '" + what + "': " + std::to_string(r.remaining()) + " trailing bytes after " +
                      std::to_string(count) + " tensors");
  return params;
}

template <class T>
void save_checkpoint(const Network<T>& net, const std::string& path) {
  io::write_file(path, encode_checkpoint(net.parameters()));
}

// Recovers the architecture fields (N, channel widths) stored implicitly in a
// checkpoint; threshold and image size come from `base`.
template <class T>
EncoderConfig config_from_parameters(const std::vector<Parameter<T>>& params, EncoderConfig base) {
  if (params.size() < 4 || params.size() % 2 != 0)
    throw FormatError("checkpoint holds " + std::to_string(params.size()) + " tensors, not a conv/head network");
  base.channels.clear();
  for (std::size_t i = 0; i + 2 < params.size(); i += 2) base.channels.push_back(params[i].value.dim(0));
  base.n_clusters = params[params.size() - 2].value.dim(0);
  return base;
}

template <class T = float>
Network<T> load_checkpoint(const std::string& path, const EncoderConfig& config) {
  auto params = decode_checkpoint<T>(io::read_file(path), path);
  return Network<T>::from_parameters(config, std::move(params));
}

// Loads a checkpoint taking its architecture from the file itself.
template <class T = float>
Network<T> load_checkpoint(const std::string& path) {
  auto params = decode_checkpoint<T>(io::read_file(path), path);
  auto config = config_from_parameters(params, EncoderConfig{});
  return Network<T>::from_parameters(config, std::move(params));
}

}  // namespace xmc::visual
