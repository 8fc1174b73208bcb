#pragma once

#include <xmc/error.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace xmc {

// Element of {0,1}^N; the set bits are the clusters an input is assigned to.
class BinaryClusterVector {
 public:
  BinaryClusterVector() = default;
  explicit BinaryClusterVector(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}

  static BinaryClusterVector from_bits(std::vector<std::uint8_t> bits) {
    BinaryClusterVector v;
    for (auto& b : bits) b = b ? 1 : 0;
    v.bits_ = std::move(bits);
    return v;
  }

  std::size_t size() const { return bits_.size(); }
  bool test(std::size_t c) const { return bits_.at(c) != 0; }
  void set(std::size_t c, bool value = true) { bits_.at(c) = value ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }
  bool none() const { return count() == 0; }
  bool all() const { return count() == bits_.size(); }

  std::vector<std::size_t> set_bits() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < bits_.size(); ++c)
      if (bits_[c]) out.push_back(c);
    return out;
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  BinaryClusterVector& operator|=(const BinaryClusterVector& o) {
    if (o.size() != size()) throw ShapeError("cluster vector length mismatch");
    for (std::size_t c = 0; c < bits_.size(); ++c) bits_[c] |= o.bits_[c];
    return *this;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }

  friend bool operator==(const BinaryClusterVector&, const BinaryClusterVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

}  // namespace xmc
