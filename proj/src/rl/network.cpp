#include "singularguard/rl/network.hpp"

#include <stdexcept>

namespace singularguard::rl {

namespace {

constexpr double kLayerNormEps = 1e-5;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Mlp::Mlp(std::vector<int> sizes, bool tanh_output, double output_scale)
    : sizes_(std::move(sizes)), tanh_output_(tanh_output), output_scale_(output_scale) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
  }
  Eigen::Index n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    Offsets o{};
    o.weight = n;
    n += static_cast<Eigen::Index>(in) * out;
    o.bias = n;
    n += out;
    if (l < num_layers() - 1) {
      o.gain = n;
      n += out;
      o.shift = n;
      n += out;
    } else {
      o.gain = o.shift = -1;
    }
    offsets_.push_back(o);
  }
  params_ = VectorXd::Zero(n);
  for (int l = 0; l + 1 < num_layers(); ++l) params_.segment(offsets_[l].gain, sizes_[l + 1]).setOnes();
}

VectorXd Mlp::forward(const VectorXd& x, Cache* cache) const {
  if (x.size() != input_size()) throw std::invalid_argument("Mlp input has the wrong size");
  if (cache) {
    cache->inputs.clear();
    cache->normalized.clear();
    cache->inv_std.clear();
    cache->activated.clear();
  }
  VectorXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const Eigen::Map<const RowMajor> w(params_.data() + offsets_[l].weight, out, in);
    if (cache) cache->inputs.push_back(h);
    VectorXd z = w * h + params_.segment(offsets_[l].bias, out);
    if (l == num_layers() - 1) {
      if (cache) cache->pre_output = z;
      h = tanh_output_ ? VectorXd(output_scale_ * z.array().tanh()) : z;
      break;
    }
    const double mean = z.mean();
    const double var = (z.array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    VectorXd xhat = (z.array() - mean) * inv_std;
    VectorXd y = xhat.cwiseProduct(params_.segment(offsets_[l].gain, out)) +
                 params_.segment(offsets_[l].shift, out);
    h = y.array().tanh();
    if (cache) {
      cache->normalized.push_back(std::move(xhat));
      cache->inv_std.push_back(inv_std);
      cache->activated.push_back(h);
    }
  }
  if (cache) cache->output = h;
  return h;
}

VectorXd Mlp::backward(const Cache& cache, const VectorXd& d_output, VectorXd& grad) const {
  if (grad.size() != params_.size()) grad = VectorXd::Zero(params_.size());
  VectorXd dz;
  if (tanh_output_) {
    const VectorXd t = (cache.output / output_scale_);
    dz = d_output.cwiseProduct(VectorXd(output_scale_ * (1.0 - t.array().square())));
  } else {
    dz = d_output;
  }
  for (int l = num_layers() - 1; l >= 0; --l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    if (l < num_layers() - 1) {
      // dz currently holds dL/d(tanh output) of hidden layer l.
      const VectorXd& a = cache.activated[l];
      const VectorXd dy = dz.cwiseProduct(VectorXd(1.0 - a.array().square()));
      const VectorXd& xhat = cache.normalized[l];
      grad.segment(offsets_[l].gain, out) += dy.cwiseProduct(xhat);
      grad.segment(offsets_[l].shift, out) += dy;
      const VectorXd dxhat = dy.cwiseProduct(params_.segment(offsets_[l].gain, out));
      const double mean_dxhat = dxhat.mean();
      const double mean_dxhat_xhat = dxhat.dot(xhat) / out;
      dz = cache.inv_std[l] * (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat);
    }
    const VectorXd& input = cache.inputs[l];
    Eigen::Map<RowMajor> gw(grad.data() + offsets_[l].weight, out, in);
    gw.noalias() += dz * input.transpose();
    grad.segment(offsets_[l].bias, out) += dz;
    const Eigen::Map<const RowMajor> w(params_.data() + offsets_[l].weight, out, in);
    dz = w.transpose() * dz;
  }
  return dz;
}

std::vector<Mlp::LayerView> Mlp::layout() const {
  std::vector<LayerView> views;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const std::string p = "l" + std::to_string(l) + ".";
    views.push_back({p + "weight", offsets_[l].weight, out, in});
    views.push_back({p + "bias", offsets_[l].bias, 1, out});
    if (offsets_[l].gain >= 0) {
      views.push_back({p + "ln_gain", offsets_[l].gain, 1, out});
      views.push_back({p + "ln_shift", offsets_[l].shift, 1, out});
    }
  }
  return views;
}

double global_norm(const VectorXd& g) { return g.norm(); }

double clip_global_norm(VectorXd& g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm && norm > 0.0) g *= max_norm / norm;
  return norm;
}

void Adam::reset(Eigen::Index n) {
  step_count = 0;
  m = VectorXd::Zero(n);
  v = VectorXd::Zero(n);
}

void Adam::step(VectorXd& params, const VectorXd& grad) {
  if (m.size() != params.size()) reset(params.size());
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace singularguard::rl
