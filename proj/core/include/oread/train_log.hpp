#pragma once

#include <vector>

namespace oread::experts {

// Per-epoch loss curves from an expert training run. val_loss is empty when
// no videos were held out.
struct TrainLog {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

} // namespace oread::experts
