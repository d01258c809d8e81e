#pragma once

#include <string>

#include "pmgn/trainer.hpp"

namespace pmgn {

// Versioned binary checkpoint "MGCKPT01": surrogate config, flat weights,
// normalizer statistics, Adam moments, step counter and all RNG streams.
// Round-trips bit-exactly; a resumed run reproduces an uninterrupted one.
template <class T>
void save_checkpoint(const TrainState<T>& state, const std::string& path);

template <class T>
TrainState<T> load_checkpoint(const std::string& path);

// Reads only the precision tag so callers can dispatch the right T.
Precision peek_checkpoint_precision(const std::string& path);

}  // namespace pmgn
