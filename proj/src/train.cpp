#include "mapnet/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "mapnet/augment.hpp"
#include "mapnet/errors.hpp"
#include "mapnet/loss.hpp"

namespace mapnet {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1, got " + std::to_string(batch_size));
  if (epochs < 0) throw ConfigError("epochs must be non-negative, got " + std::to_string(epochs));
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be a positive finite number");
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> make_batch(const std::vector<Sample>& data, const std::vector<std::size_t>& order,
                                           std::size_t first, std::size_t count) {
  const Sample& s0 = data.at(order.at(first));
  const int h = s0.height(), w = s0.width();
  Tensor<T> images({static_cast<int>(count), 3, h, w});
  Tensor<T> masks({static_cast<int>(count), 1, h, w});
  for (std::size_t b = 0; b < count; ++b) {
    const Sample& s = data.at(order.at(first + b));
    if (s.height() != h || s.width() != w) {
      throw ShapeError("sample " + s.id + " is " + s.image.shape().str() + ", batch expects " +
                       std::to_string(h) + "x" + std::to_string(w));
    }
    std::copy(s.image.data().begin(), s.image.data().end(), images.plane(static_cast<int>(b), 0));
    std::copy(s.mask.data().begin(), s.mask.data().end(), masks.plane(static_cast<int>(b), 0));
  }
  return {std::move(images), std::move(masks)};
}

template <typename T>
TrainResult<T> train(Model<T>& model, const std::vector<Sample>& data, const TrainConfig& tc,
                     const CheckpointHook& on_checkpoint, const Checkpoint* resume) {
  tc.validate();
  if (data.empty()) throw UsageError("train: dataset is empty");
  const ModelConfig& mc = model.config();
  for (const Sample& s : data) {
    if (s.height() != mc.input_h || s.width() != mc.input_w) {
      throw ShapeError("sample " + s.id + " is " + std::to_string(s.height()) + "x" + std::to_string(s.width()) +
                       ", model expects " + std::to_string(mc.input_h) + "x" + std::to_string(mc.input_w));
    }
  }

  Rng rng(tc.seed);
  AdamState<T> adam = AdamState<T>::zeros_like(model.params().params(), tc.lr);
  if (resume != nullptr) {
    std::uint64_t state = 0;
    adam = restore(*resume, model, &state);
    adam.lr = tc.lr;
    rng.set_state(state);
  }

  TrainResult<T> result;
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(data.size());
  std::uint64_t steps_done = 0;
  bool stop = tc.max_steps == 0;
  for (int epoch = 0; epoch < tc.epochs && !stop; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    for (std::size_t first = 0; first < order.size() && !stop; first += tc.batch_size) {
      const std::size_t count = std::min<std::size_t>(tc.batch_size, order.size() - first);
      auto [images, masks] = make_batch<T>(data, order, first, count);
      if (tc.augment) {
        for (std::size_t b = 0; b < count; ++b) {
          const AugmentDraw draw = AugmentDraw::sample(rng);
          if (draw.identity()) continue;
          const int n = static_cast<int>(b);
          Tensor<T> img({1, 3, images.h(), images.w()}), msk({1, 1, masks.h(), masks.w()});
          std::copy(images.plane(n, 0), images.plane(n, 0) + img.size(), img.data().begin());
          std::copy(masks.plane(n, 0), masks.plane(n, 0) + msk.size(), msk.data().begin());
          auto [ai, am] = augment(img, msk, draw);
          std::copy(ai.data().begin(), ai.data().end(), images.plane(n, 0));
          std::copy(am.data().begin(), am.data().end(), masks.plane(n, 0));
        }
      }

      Graph<T> g;
      const Var x = g.input(std::move(images));
      const auto out = model.forward(g, x, Mode::train);
      const Var loss = bce_loss(g, out.logits, masks);
      const double loss_value = g.value(loss)[0];
      const std::uint64_t step = adam.t + 1;
      if (!std::isfinite(loss_value)) {
        throw NumericError("non-finite loss " + std::to_string(loss_value) + " at step " + std::to_string(step) +
                           " (epoch " + std::to_string(epoch) + ")");
      }
      g.backward(loss);
      adam_step(model.params().params(), g.parameter_gradients(), adam);
      ++steps_done;

      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.push_back({adam.t, epoch, loss_value, secs});
      if (tc.checkpoint_every > 0 && on_checkpoint && adam.t % static_cast<std::uint64_t>(tc.checkpoint_every) == 0) {
        on_checkpoint(make_checkpoint(model, adam, rng.state()), adam.t);
      }
      if (tc.max_steps > 0 && steps_done >= static_cast<std::uint64_t>(tc.max_steps)) stop = true;
    }
  }
  result.checkpoint = make_checkpoint(model, adam, rng.state());
  return result;
}

template std::pair<Tensor<float>, Tensor<float>> make_batch(const std::vector<Sample>&,
                                                            const std::vector<std::size_t>&, std::size_t,
                                                            std::size_t);
template std::pair<Tensor<double>, Tensor<double>> make_batch(const std::vector<Sample>&,
                                                              const std::vector<std::size_t>&, std::size_t,
                                                              std::size_t);
template TrainResult<float> train(Model<float>&, const std::vector<Sample>&, const TrainConfig&,
                                  const CheckpointHook&, const Checkpoint*);
template TrainResult<double> train(Model<double>&, const std::vector<Sample>&, const TrainConfig&,
                                   const CheckpointHook&, const Checkpoint*);

}  // namespace mapnet
