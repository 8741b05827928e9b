#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "singularguard/rl/network.hpp"

using namespace singularguard::rl;

TEST_CASE("layout covers every parameter once") {
  const Mlp net({3, 4, 2}, true, 2.0);
  Eigen::Index total = 0;
  for (const auto& v : net.layout()) total += static_cast<Eigen::Index>(v.rows) * v.cols;
  CHECK(total == net.num_params());
  CHECK(net.num_params() == 3 * 4 + 4 + 4 + 4 + 4 * 2 + 2);
  CHECK_THROWS_AS(Mlp({3}, false), std::invalid_argument);
  CHECK_THROWS_AS(Mlp({3, 0, 1}, false), std::invalid_argument);
}

TEST_CASE("bounded output stays inside the scale") {
  Mlp net({4, 8, 3}, true, 0.7);
  std::mt19937_64 rng(2);
  net.init(rng, 5.0);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int k = 0; k < 100; ++k) {
    VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = n(rng);
    CHECK(net.forward(x).cwiseAbs().maxCoeff() <= 0.7);
  }
  CHECK_THROWS_AS(net.forward(VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("backprop matches central differences for a scalar loss") {
  for (bool tanh_out : {false, true}) {
    Mlp net({2, 5, 4, 3}, tanh_out, 1.5);
    std::mt19937_64 rng(3);
    net.init(rng, 1.0);
    std::normal_distribution<double> n(0.0, 0.3);
    for (Eigen::Index i = 0; i < net.num_params(); ++i) net.params()[i] += n(rng);
    VectorXd x(2), w(3);
    x << 0.4, -0.9;
    w << 1.0, -2.0, 0.5;
    Mlp::Cache cache;
    net.forward(x, &cache);
    VectorXd grad = VectorXd::Zero(net.num_params());
    const VectorXd dx = net.backward(cache, w, grad);
    const double h = 1e-6;
    auto loss = [&](const Mlp& m, const VectorXd& in) { return w.dot(m.forward(in)); };
    for (Eigen::Index i = 0; i < net.num_params(); ++i) {
      Mlp plus = net, minus = net;
      plus.params()[i] += h;
      minus.params()[i] -= h;
      const double num = (loss(plus, x) - loss(minus, x)) / (2 * h);
      CHECK(sgtest::grad_rel(grad[i], num) < 1e-4);
    }
    for (int i = 0; i < 2; ++i) {
      VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      CHECK(sgtest::grad_rel(dx[i], (loss(net, xp) - loss(net, xm)) / (2 * h)) < 1e-4);
    }
  }
}

TEST_CASE("PPO loss gradients on a miniature actor-critic") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = sgtest::mini_problem(seed);
    const auto r = sgtest::check_gradients(p);
    CHECK(r.policy_checked == p.model.policy.flat().size());
    CHECK(r.policy_max_rel < 1e-4);
    CHECK(r.value_max_rel < 1e-4);
  }
}

TEST_CASE("global norm clipping") {
  VectorXd g(3);
  g << 3.0, 4.0, 0.0;
  CHECK(global_norm(g) == doctest::Approx(5.0));
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g.norm() == doctest::Approx(1.0));
  VectorXd small(2);
  small << 0.1, 0.1;
  const VectorXd before = small;
  clip_global_norm(small, 1.0);
  CHECK(small == before);
}

TEST_CASE("Adam: first step moves each coordinate by lr against the gradient sign") {
  Adam opt;
  opt.lr = 0.01;
  VectorXd p = VectorXd::Zero(3);
  VectorXd g(3);
  g << 2.0, -0.5, 0.0;
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p[2] == 0.0);
  CHECK(opt.step_count == 1);
}

TEST_CASE("Adam minimises a quadratic") {
  Adam opt;
  opt.lr = 0.05;
  VectorXd p(2);
  p << 3.0, -2.0;
  for (int k = 0; k < 2000; ++k) opt.step(p, 2.0 * p);
  CHECK(p.norm() < 1e-2);
}
