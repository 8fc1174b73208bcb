#pragma once

#include <xmc/cluster_vector.hpp>
#include <xmc/error.hpp>
#include <xmc/grad/adam.hpp>
#include <xmc/grad/init.hpp>
#include <xmc/grad/ops.hpp>
#include <xmc/parallel.hpp>
#include <xmc/rng.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace xmc::visual {

using grad::Parameter;
using grad::Tape;
using grad::Tensor;
using grad::Var;

// How the cluster head (GAP -> linear) weights are initialized. `zero` makes
// every initial output exactly 0.5, so a fresh model assigns each image to
// every cluster; the clusters then stay interchangeable.
enum class HeadInit { he_uniform, zero };

inline const char* to_string(HeadInit h) {
  switch (h) {
    case HeadInit::zero: return "zero";
    case HeadInit::he_uniform: return "he_uniform";
  }
  return "?";
}

inline HeadInit head_init_from_string(const std::string& s) {
  if (s == "zero") return HeadInit::zero;
  if (s == "he_uniform") return HeadInit::he_uniform;
  throw ConfigError("unknown head_init '" + s + "' (expected he_uniform or zero)");
}

struct EncoderConfig {
  std::size_t n_clusters = 150;
  double visual_threshold = 0.5;
  std::size_t image_size = 64;
  // conv3x3 widths; every stage but the last is followed by a 2x2 max pool
  std::vector<std::size_t> channels{16, 32, 64};
  HeadInit head_init = HeadInit::he_uniform;
  double head_init_scale = 1.0;  // multiplies the he_uniform bound

  void validate() const {
    if (n_clusters < 2) throw ConfigError("n_clusters must be >= 2");
    if (!(visual_threshold > 0.0 && visual_threshold < 1.0) && visual_threshold != 1.0)
      throw ConfigError("visual_threshold must lie in (0, 1]");
    if (channels.empty()) throw ConfigError("channels must name at least one conv stage");
    const std::size_t div = std::size_t{1} << (channels.size() - 1);
    if (image_size == 0 || image_size % div != 0)
      throw ConfigError("image_size must be a positive multiple of " + std::to_string(div));
    if (head_init_scale < 0.0) throw ConfigError("head_init_scale must be >= 0");
  }

  std::size_t feature_size() const { return image_size >> (channels.size() - 1); }
};

// bit c = 1 iff probs[c] >= threshold
template <class T>
BinaryClusterVector predict_clusters(std::span<const T> probs, double threshold) {
  BinaryClusterVector v(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c)
    if (static_cast<double>(probs[c]) >= threshold) v.set(c);
  return v;
}

template <class T>
struct Inference {
  Tensor<T> features;  // final conv stage after ReLU, (B, K, h, w)
  Tensor<T> logits;    // (B, N)
  Tensor<T> probs;     // (B, N)
};

// conv stack -> GAP -> linear -> sigmoid
template <class T>
class Network {
 public:
  Network() = default;

  Network(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng = derive_rng(seed, 0x1417);
    std::size_t in = 3;
    for (std::size_t i = 0; i < config_.channels.size(); ++i) {
      const std::size_t out = config_.channels[i];
      Tensor<T> w({out, in, 3, 3});
      grad::he_uniform(w, in * 9, rng);
      Tensor<T> b = Tensor<T>::vector(out);
      if (i == 0) {
        // The first stage sees pixels in [0, 1]. Its draw is taken for
        // inputs mapped to [-1, 1] and folded back: w(2x - 1) = 2w.x - sum(w).
        const std::size_t fan = in * 9;
        for (std::size_t o = 0; o < out; ++o) {
          T total = T(0);
          for (std::size_t k = 0; k < fan; ++k) {
            total += w[o * fan + k];
            w[o * fan + k] *= T(2);
          }
          b[o] = -total;
        }
      }
      params_.emplace_back("conv" + std::to_string(i) + ".weight", std::move(w));
      params_.emplace_back("conv" + std::to_string(i) + ".bias", std::move(b));
      in = out;
    }
    Tensor<T> head = Tensor<T>::matrix(config_.n_clusters, in);
    switch (config_.head_init) {
      case HeadInit::zero: break;
      case HeadInit::he_uniform: grad::he_uniform(head, in, rng, config_.head_init_scale); break;
    }
    params_.emplace_back("head.weight", std::move(head));
    params_.emplace_back("head.bias", Tensor<T>::vector(config_.n_clusters));
  }

  // Assembles a network from named tensors, checking every shape against config.
  static Network from_parameters(const EncoderConfig& config, std::vector<Parameter<T>> params) {
    Network reference(config, 0);
    if (params.size() != reference.params_.size())
      throw ShapeError("network expects " + std::to_string(reference.params_.size()) + " tensors, got " +
                       std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& want = reference.params_[i];
      if (params[i].name != want.name)
        throw ShapeError("tensor " + std::to_string(i) + ": expected '" + want.name + "', got '" + params[i].name +
                         "'");
      if (params[i].value.shape() != want.value.shape())
        throw ShapeError("tensor '" + want.name + "': expected shape " + grad::shape_string(want.value.shape()) +
                         ", got " + grad::shape_string(params[i].value.shape()));
      params[i].zero_grad();
    }
    reference.params_ = std::move(params);
    return reference;
  }

  const EncoderConfig& config() const { return config_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::size_t n_clusters() const { return config_.n_clusters; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  const Parameter<T>& head_weight() const { return params_[params_.size() - 2]; }
  const Parameter<T>& head_bias() const { return params_.back(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void check_images(const Tensor<T>& images) const {
    const auto& s = images.shape();
    if (s[1] != 3 || s[2] != config_.image_size || s[3] != config_.image_size)
      throw ShapeError("visual encoder expects images of shape (batch x 3 x " + std::to_string(config_.image_size) +
                       " x " + std::to_string(config_.image_size) + "), got " + grad::shape_string(s));
  }

  struct Nodes {
    Var features;
    Var logits;
    Var probs;
  };

  // Records the forward pass on `tape`, with params bound as tape leaves.
  static Nodes record(Tape<T>& tape, std::vector<Parameter<T>>& params, Var images, std::size_t stages) {
    Var h = images;
    for (std::size_t i = 0; i < stages; ++i) {
      Var w = tape.parameter(params[2 * i]);
      Var b = tape.parameter(params[2 * i + 1]);
      h = grad::relu(tape, grad::conv2d(tape, h, w, b, 1, 1));
      if (i + 1 < stages) h = grad::maxpool2(tape, h);
    }
    Var pooled = grad::global_avg_pool(tape, h);
    Var logits = grad::linear(tape, pooled, tape.parameter(params[2 * stages]), tape.parameter(params[2 * stages + 1]));
    return {h, logits, grad::sigmoid(tape, logits)};
  }

  Nodes record(Tape<T>& tape, Var images) {
    check_images(tape.value(images));
    return record(tape, params_, images, config_.channels.size());
  }

  // Pure inference on frozen parameters; safe to call concurrently.
  Inference<T> infer(const Tensor<T>& images) const {
    check_images(images);
    Tape<T> tape;
    Var h = tape.constant(images);
    const std::size_t stages = config_.channels.size();
    for (std::size_t i = 0; i < stages; ++i) {
      Var w = tape.constant(params_[2 * i].value);
      Var b = tape.constant(params_[2 * i + 1].value);
      h = grad::relu(tape, grad::conv2d(tape, h, w, b, 1, 1));
      if (i + 1 < stages) h = grad::maxpool2(tape, h);
    }
    Var pooled = grad::global_avg_pool(tape, h);
    Var logits = grad::linear(tape, pooled, tape.constant(params_[2 * stages].value),
                              tape.constant(params_[2 * stages + 1].value));
    Var probs = grad::sigmoid(tape, logits);
    return {tape.value(h), tape.value(logits), tape.value(probs)};
  }

  // probability matrix (batch x N)
  Tensor<T> forward(const Tensor<T>& images) const { return infer(images).probs; }

  std::vector<BinaryClusterVector> predict(const Tensor<T>& images) const {
    const auto probs = forward(images);
    std::vector<BinaryClusterVector> out;
    const std::size_t n = config_.n_clusters;
    for (std::size_t b = 0; b < probs.dim(0); ++b)
      out.push_back(predict_clusters<T>(std::span<const T>(probs.ptr() + b * n, n), config_.visual_threshold));
    return out;
  }

 private:
  EncoderConfig config_;
  std::vector<Parameter<T>> params_;
};

template <class T>
Tensor<T> targets_tensor(std::span<const BinaryClusterVector> targets, std::size_t n_clusters) {
  Tensor<T> t = Tensor<T>::matrix(targets.size(), n_clusters);
  for (std::size_t b = 0; b < targets.size(); ++b) {
    if (targets[b].size() != n_clusters)
      throw ShapeError("target vector " + std::to_string(b) + " has length " + std::to_string(targets[b].size()) +
                       ", expected " + std::to_string(n_clusters));
    for (std::size_t c = 0; c < n_clusters; ++c) t[b * n_clusters + c] = targets[b].test(c) ? T(1) : T(0);
  }
  return t;
}

template <class T>
struct BatchResult {
  T loss;
  Tensor<T> probs;  // (B, N) from the pre-step parameters
};

// One forward + backward + Adam step against binary targets. Each sample is
// differentiated on its own tape and the per-sample gradients are summed in
// index order, so the result does not depend on the worker count.
template <class T>
BatchResult<T> train_batch_outputs(Network<T>& net, grad::Adam<T>& adam, const Tensor<T>& images,
                                   std::span<const BinaryClusterVector> targets, std::size_t threads = 1) {
  net.check_images(images);
  const std::size_t batch = images.dim(0), n = net.n_clusters();
  if (batch == 0) throw ShapeError("train_batch: empty batch");
  if (targets.size() != batch)
    throw ShapeError("train_batch: " + std::to_string(batch) + " images but " + std::to_string(targets.size()) +
                     " target vectors");
  const Tensor<T> all_targets = targets_tensor<T>(targets, n);

  std::vector<std::vector<Parameter<T>>> local(batch);
  std::vector<T> losses(batch);
  Tensor<T> probs(grad::Shape{batch, n, 1, 1});
  const std::size_t stages = net.config().channels.size();
  parallel_for(batch, threads, [&](std::size_t b) {
    auto params = net.parameters();
    for (auto& p : params) p.zero_grad();
    Tape<T> tape;
    Var x = tape.constant(images.slice_batch(b, 1));
    auto nodes = Network<T>::record(tape, params, x, stages);
    Var loss = grad::bce_loss(tape, nodes.probs, all_targets.slice_batch(b, 1));
    losses[b] = tape.value(loss)[0];
    const auto& pv = tape.value(nodes.probs);
    std::copy(pv.ptr(), pv.ptr() + n, probs.ptr() + b * n);
    tape.backward(loss);
    local[b] = std::move(params);
  });

  auto& params = net.parameters();
  const T inv = T(1) / static_cast<T>(batch);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& g = params[i].grad;
    g = Tensor<T>(params[i].value.shape());
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& lg = local[b][i].grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += lg[k];
    }
    for (std::size_t k = 0; k < g.size(); ++k) g[k] *= inv;
  }
  adam.step(params);

  double total = 0.0;
  for (T l : losses) total += static_cast<double>(l);
  return {static_cast<T>(total / static_cast<double>(batch)), std::move(probs)};
}

// Returns the pre-step mean BCE.
template <class T>
T train_batch(Network<T>& net, grad::Adam<T>& adam, const Tensor<T>& images,
              std::span<const BinaryClusterVector> targets, std::size_t threads = 1) {
  return train_batch_outputs(net, adam, images, targets, threads).loss;
}

}  // namespace xmc::visual
