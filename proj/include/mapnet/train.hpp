#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mapnet/adam.hpp"
#include "mapnet/checkpoint.hpp"
#include "mapnet/model.hpp"
#include "mapnet/sample.hpp"

namespace mapnet {

struct TrainConfig {
  int batch_size = 4;
  int epochs = 80;
  // Stop after this many optimizer steps even mid-epoch; negative = no cap.
  std::int64_t max_steps = -1;
  std::uint64_t seed = 0;
  bool augment = true;
  // Emit an intermediate checkpoint every this many steps; 0 disables.
  int checkpoint_every = 0;
  double lr = 1e-3;

  void validate() const;
};

struct LogRecord {
  std::uint64_t step = 0;  // 1-based optimizer step
  int epoch = 0;           // 0-based
  double loss = 0.0;
  double seconds = 0.0;    // wall time since the start of train()
};

template <typename T>
struct TrainResult {
  std::vector<LogRecord> log;
  Checkpoint checkpoint;
};

using CheckpointHook = std::function<void(const Checkpoint&, std::uint64_t step)>;

// Epoch loop: reshuffle the sample order from the config seed, assemble
// batches in that order (the last may be short), draw one augmentation per
// sample in batch order, then forward, loss, backward and one Adam step.
// A non-finite loss throws NumericError naming the step. When resume is
// given, model, optimizer and PRNG state continue from it.
template <typename T>
TrainResult<T> train(Model<T>& model, const std::vector<Sample>& data, const TrainConfig& tc,
                     const CheckpointHook& on_checkpoint = {}, const Checkpoint* resume = nullptr);

// Stacks samples [first, first+count) of data in the given order into an
// (count,3,h,w) image batch and a (count,1,h,w) mask batch.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> make_batch(const std::vector<Sample>& data, const std::vector<std::size_t>& order,
                                           std::size_t first, std::size_t count);

}  // namespace mapnet
