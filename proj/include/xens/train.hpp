#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xens/model.hpp"
#include "xens/synthdata.hpp"

namespace xens {

struct TrainConfig {
    size_t epochs = 30;
    size_t batch_size = 32;
    double learning_rate = 0.02;
    double momentum = 0.9;        // 0 disables the velocity term
    uint64_t seed = 1;            // drives the per-epoch shuffle
};

// Mini-batch SGD with cross-entropy loss. Pure function: the input model
// is copied, trained, and returned; reruns with equal arguments produce
// bit-identical weights.
MicroModel train(const MicroModel& model, const Dataset& data, const TrainConfig& cfg);

// Share of examples whose argmax prediction equals the label.
double accuracy(const MicroModel& model, const Dataset& data);

}  // namespace xens
