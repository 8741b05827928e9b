#pragma once

#include <cmath>
#include <random>

namespace singularguard::rl {

template <class Rng>
void Mlp::init(Rng& rng, double output_gain) {
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const bool last = l == num_layers() - 1;
    const double bound = (last ? output_gain : 1.0) * std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int i = 0; i < in * out; ++i) params_[offsets_[l].weight + i] = dist(rng);
    params_.segment(offsets_[l].bias, out).setZero();
    if (!last) {
      params_.segment(offsets_[l].gain, out).setOnes();
      params_.segment(offsets_[l].shift, out).setZero();
    }
  }
}

}  // namespace singularguard::rl
