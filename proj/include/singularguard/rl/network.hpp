#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace singularguard::rl {

using Eigen::VectorXd;

/// Feed-forward net: every hidden layer is Linear -> LayerNorm -> tanh and
/// the output layer is Linear, optionally followed by scale * tanh.
///
/// Parameters live in one flat vector so optimisers and gradient clipping
/// can treat the network as a single point in parameter space.
class Mlp {
 public:
  struct Cache {
    std::vector<VectorXd> inputs;      // input to each linear layer
    std::vector<VectorXd> normalized;  // LayerNorm x-hat per hidden layer
    std::vector<double> inv_std;       // 1/sqrt(var + eps) per hidden layer
    std::vector<VectorXd> activated;   // tanh output per hidden layer
    VectorXd pre_output;
    VectorXd output;
  };

  Mlp() = default;
  Mlp(std::vector<int> sizes, bool tanh_output, double output_scale = 1.0);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  bool tanh_output() const { return tanh_output_; }
  double output_scale() const { return output_scale_; }

  Eigen::Index num_params() const { return params_.size(); }
  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }

  /// Glorot-uniform weights, zero biases, unit LayerNorm gain; `output_gain`
  /// shrinks the final layer.
  template <class Rng>
  void init(Rng& rng, double output_gain);

  VectorXd forward(const VectorXd& x, Cache* cache = nullptr) const;
  /// Accumulates dL/dparams into `grad` given dL/doutput. Returns dL/dinput.
  VectorXd backward(const Cache& cache, const VectorXd& d_output, VectorXd& grad) const;

  struct LayerView {
    std::string name;
    Eigen::Index offset;
    int rows;
    int cols;
  };
  /// Named parameter blocks (weights, biases, LayerNorm gain/shift) in storage order.
  std::vector<LayerView> layout() const;

 private:
  struct Offsets {
    Eigen::Index weight, bias, gain, shift;
  };
  std::vector<int> sizes_;
  std::vector<Offsets> offsets_;
  bool tanh_output_ = false;
  double output_scale_ = 1.0;
  VectorXd params_;

  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
};

double global_norm(const VectorXd& g);
/// Rescales g in place so its norm is at most max_norm. Returns the norm before clipping.
double clip_global_norm(VectorXd& g, double max_norm);

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  VectorXd m;
  VectorXd v;

  void reset(Eigen::Index n);
  void step(VectorXd& params, const VectorXd& grad);
};

}  // namespace singularguard::rl

#include "singularguard/rl/network_impl.hpp"
