#pragma once

#include <span>

#include "bridgekit/rng.hpp"
#include "bridgekit/schedule.hpp"
#include "bridgekit/tensor.hpp"

namespace bridgekit {

// x_t = mu_x0_t x0 + mu_y_t y + sigma_t eps, eps drawn per batch element from
// the (element, t, ForwardMarginal) substream.
TensorBatch sample_marginal(const TensorBatch& x0, const TensorBatch& y, int t, const ScheduleTable& table,
                            const Noise& noise, Purpose purpose = Purpose::ForwardMarginal);

// Per-element timesteps; ts.size() must equal the batch size.
TensorBatch sample_marginal(const TensorBatch& x0, const TensorBatch& y, std::span<const int> ts,
                            const ScheduleTable& table, const Noise& noise,
                            Purpose purpose = Purpose::ForwardMarginal);

// Noise-added source end-point y + sigma_T eps. Returns y unchanged for the
// regular bridge, whose end-point variance is zero.
TensorBatch sample_endpoint(const TensorBatch& y, const ScheduleTable& table, const Noise& noise);

// One forward transition q(x_t | x_{t-1}, y).
TensorBatch sample_step(const TensorBatch& x_prev, const TensorBatch& y, int t, const ScheduleTable& table,
                        const Noise& noise, Purpose purpose = Purpose::ForwardStep);

TensorBatch sample_step(const TensorBatch& x_prev, const TensorBatch& y, std::span<const int> ts,
                        const ScheduleTable& table, const Noise& noise, Purpose purpose = Purpose::ForwardStep);

}  // namespace bridgekit
