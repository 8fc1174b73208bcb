#pragma once

#include <xmc/parallel.hpp>
#include <xmc/rng.hpp>
#include <xmc/text/cooccurrence.hpp>
#include <xmc/text/counts_io.hpp>
#include <xmc/train/config.hpp>
#include <xmc/train/tokenize.hpp>
#include <xmc/visual/checkpoint.hpp>
#include <xmc/visual/network.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace xmc::train {

using grad::Tensor;

// One (image, caption) pair in training form.
struct TrainingExample {
  Tensor<float> image;  // 1 x 3 x S x S
  std::vector<std::string> tokens;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  std::vector<std::size_t> sample_indices;
  std::vector<BinaryClusterVector> visual_predictions;  // used to update the counts
  std::vector<BinaryClusterVector> text_targets;        // used to train the network
};

struct TrainLog {
  struct Step {
    std::size_t step;
    std::size_t epoch;
    double loss;
  };
  std::vector<Step> steps;
  std::vector<double> epoch_mean_loss;
  std::vector<std::uint64_t> epoch_table_size;  // total joint count after each epoch
  std::vector<double> epoch_seconds;

  std::string to_csv() const {
    std::string out = "step,epoch,loss\n";
    char buf[96];
    for (const auto& s : steps) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", s.step, s.epoch, s.loss);
      out += buf;
    }
    return out;
  }
};

inline Tensor<float> stack_images(const std::vector<TrainingExample>& data, std::span<const std::size_t> idx) {
  const auto& s = data.at(idx[0]).image.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  Tensor<float> out({idx.size(), s[1], s[2], s[3]});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& img = data[idx[b]].image;
    if (img.shape() != s) throw ShapeError("training images differ in shape");
    std::copy(img.ptr(), img.ptr() + per, out.ptr() + b * per);
  }
  return out;
}

// One mutual-supervision step:
//   1. visual inference with the pre-step network
//   2. text inference with the pre-step counts table
//   3. counts updated from (caption, visual prediction)
//   4. network trained against the text vectors from (2)
inline StepRecord train_step(const std::vector<TrainingExample>& data, std::span<const std::size_t> batch,
                             visual::Network<float>& net, text::CooccurrenceTable& table, grad::Adam<float>& adam,
                             const TrainConfig& config, std::size_t threads = 1) {
  if (batch.empty()) throw ShapeError("train_step: empty batch");
  if (table.n_clusters() != net.n_clusters())
    throw ShapeError("train_step: counts table N=" + std::to_string(table.n_clusters()) + " but network N=" +
                     std::to_string(net.n_clusters()));
  StepRecord rec;
  rec.sample_indices.assign(batch.begin(), batch.end());
  const Tensor<float> images = stack_images(data, batch);

  const std::size_t n = net.n_clusters();
  // (2) reads only the pre-step table, so it can be computed first
  for (std::size_t b = 0; b < batch.size(); ++b)
    rec.text_targets.push_back(table.encode_sentence(data[batch[b]].tokens, config.text.text_threshold));
  // (1) and (4) share one forward pass: the training forward runs on the
  // pre-step parameters, so its probabilities are the visual predictions
  auto out = visual::train_batch_outputs<float>(net, adam, images, rec.text_targets, threads);
  rec.loss = out.loss;
  for (std::size_t b = 0; b < batch.size(); ++b)
    rec.visual_predictions.push_back(visual::predict_clusters<float>(
        std::span<const float>(out.probs.ptr() + b * n, n), config.encoder.visual_threshold));
  // (3)
  for (std::size_t b = 0; b < batch.size(); ++b) table.observe(data[batch[b]].tokens, rec.visual_predictions[b]);
  return rec;
}

struct FitOptions {
  std::size_t threads = 1;
  std::string checkpoint_dir;  // empty: no files written
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

struct FitResult {
  visual::Network<float> network;
  text::CooccurrenceTable table;
  TrainLog log;
};

inline std::string epoch_tag(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu", epoch);
  return buf;
}

// epochs x ceil(|data| / batch_size) steps; the visiting order of epoch e is a
// shuffle drawn from the stream seeded with seed + e.
inline FitResult fit(const std::vector<TrainingExample>& data, const TrainConfig& config, const FitOptions& opt = {}) {
  config.validate();
  if (data.empty()) throw ShapeError("fit: empty dataset");
  FitResult r{visual::Network<float>(config.encoder, config.seed), text::CooccurrenceTable(config.encoder.n_clusters),
              {}};
  grad::Adam<float> adam(config.adam);
  if (!opt.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opt.checkpoint_dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory '" + opt.checkpoint_dir + "': " + ec.message());
  }
  auto write_snapshot = [&](const std::string& stem) {
    const auto base = std::filesystem::path(opt.checkpoint_dir) / stem;
    visual::save_checkpoint(r.network, base.string() + ".xmck");
    text::save_counts(r.table, base.string() + ".counts.tsv");
  };

  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed + epoch);
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    std::size_t steps_in_epoch = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      auto rec = train_step(data, std::span<const std::size_t>(order.data() + first, count), r.network, r.table, adam,
                            config, opt.threads);
      rec.step = step++;
      rec.epoch = epoch;
      r.log.steps.push_back({rec.step, epoch, rec.loss});
      total += rec.loss;
      ++steps_in_epoch;
      if (opt.on_step) opt.on_step(rec);
    }
    const double mean = total / static_cast<double>(steps_in_epoch);
    r.log.epoch_mean_loss.push_back(mean);
    r.log.epoch_table_size.push_back(r.table.total_joint());
    r.log.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (opt.on_epoch) opt.on_epoch(epoch, mean);
    if (!opt.checkpoint_dir.empty() && config.checkpoint_interval > 0 && (epoch + 1) % config.checkpoint_interval == 0 &&
        epoch + 1 < config.epochs)
      write_snapshot(epoch_tag(epoch + 1));
  }
  if (!opt.checkpoint_dir.empty()) write_snapshot("final");
  return r;
}

}  // namespace xmc::train
