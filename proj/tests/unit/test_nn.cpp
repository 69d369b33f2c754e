#include <gtest/gtest.h>

#include <cmath>

#include "comex/network.hpp"
#include "comex/nn.hpp"
#include "comex/obsmap.hpp"
#include "comex/policy.hpp"
#include "comex/world.hpp"
#include "oracles.hpp"

namespace comex {
namespace {

using nn::Matrix;
using nn::ParamSet;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

// Scalar objective sum(R .* f(p)) checked against the layer's own backward
// pass; the last tensor in `p` is the layer input.
double layer_error(ParamSet& p, const std::function<Matrix(const ParamSet&)>& forward,
                   const std::function<Matrix(const ParamSet&, const Matrix&, ParamSet&)>& backward, Rng& rng) {
  const Matrix y = forward(p);
  const Matrix r = random_matrix(y.rows(), y.cols(), rng);
  ParamSet g = p.zeros_like();
  g[g.size() - 1] = backward(p, r, g);
  return testing::max_relative_error(p, g, [&] { return r.cwiseProduct(forward(p)).sum(); });
}

TEST(LayerGradients, Dense) {
  Rng rng(1);
  ParamSet p;
  p.add("w", 4, 6);
  p.add("b", 4, 1);
  p.add("x", 6, 3);
  for (int t = 0; t < 3; ++t) p[t] = random_matrix(p[t].rows(), p[t].cols(), rng);
  const double err = layer_error(
      p, [](const ParamSet& q) { return nn::dense_forward(q[0], q[1], q[2]); },
      [](const ParamSet& q, const Matrix& r, ParamSet& g) { return nn::dense_backward(q[0], q[2], r, g[0], g[1]); },
      rng);
  EXPECT_LT(err, 1e-4);
}

TEST(LayerGradients, Relu) {
  Rng rng(2);
  ParamSet p;
  p.add("x", 5, 4);
  p[0] = random_matrix(5, 4, rng);
  const double err = layer_error(
      p, [](const ParamSet& q) { return nn::relu_forward(q[0]); },
      [](const ParamSet& q, const Matrix& r, ParamSet&) { return nn::relu_backward(q[0], r); }, rng);
  EXPECT_LT(err, 1e-4);
}

TEST(LayerGradients, LayerNorm) {
  Rng rng(3);
  ParamSet p;
  p.add("gain", 6, 1);
  p.add("shift", 6, 1);
  p.add("x", 6, 3);
  for (int t = 0; t < 3; ++t) p[t] = random_matrix(p[t].rows(), p[t].cols(), rng);
  const double err = layer_error(
      p, [](const ParamSet& q) { return nn::layernorm_forward(q[0], q[1], q[2]); },
      [](const ParamSet& q, const Matrix& r, ParamSet& g) {
        return nn::layernorm_backward(q[0], q[2], r, g[0], g[1]);
      },
      rng);
  EXPECT_LT(err, 1e-4);
}

TEST(LayerGradients, Conv) {
  Rng rng(4);
  const nn::ConvShape shape{2, 3, 3};
  ParamSet p;
  p.add("w", 3, 2 * 9);
  p.add("b", 3, 1);
  p.add("x", 2 * 9, 4);
  for (int t = 0; t < 3; ++t) p[t] = random_matrix(p[t].rows(), p[t].cols(), rng);
  const double err = layer_error(
      p, [&](const ParamSet& q) { return nn::conv_forward(shape, q[0], q[1], q[2]); },
      [&](const ParamSet& q, const Matrix& r, ParamSet& g) {
        return nn::conv_backward(shape, q[0], q[2], r, g[0], g[1]);
      },
      rng);
  EXPECT_LT(err, 1e-4);
}

TEST(Conv, MatchesDirectSum) {
  Rng rng(5);
  const nn::ConvShape shape{2, 1, 3};
  const Matrix w = random_matrix(1, 18, rng);
  const Matrix b = random_matrix(1, 1, rng);
  const Matrix x = random_matrix(18, 1, rng);
  const Matrix y = nn::conv_forward(shape, w, b, x);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double expected = b(0, 0);
      for (int ch = 0; ch < 2; ++ch)
        for (int kr = 0; kr < 3; ++kr)
          for (int kc = 0; kc < 3; ++kc) {
            const int rr = r + kr - 1, cc = c + kc - 1;
            if (rr < 0 || cc < 0 || rr > 2 || cc > 2) continue;
            expected += w(0, ch * 9 + kr * 3 + kc) * x(ch * 9 + rr * 3 + cc, 0);
          }
      EXPECT_NEAR(y(r * 3 + c, 0), expected, 1e-12);
    }
  }
}

double network_error(const Network& base, int batch, Rng& rng) {
  Network net = base;
  const Matrix x = random_matrix(net.input_size(), batch, rng);
  const Matrix r = random_matrix(net.output_size(), batch, rng);
  Network::Tape tape;
  net.forward(x, tape);
  ParamSet g = net.params().zeros_like();
  net.backward(tape, r, g);
  return testing::max_relative_error(net.params(), g, [&] { return r.cwiseProduct(net.forward(x)).sum(); });
}

TEST(NetworkGradients, MlpActorAndCritic) {
  Rng rng(6);
  const ArchSpec s = testing::toy_arch(ArchKind::Mlp, 4);
  EXPECT_LT(network_error(Network::actor(s, rng), 5, rng), 1e-4);
  EXPECT_LT(network_error(Network::critic(s, rng), 5, rng), 1e-4);
}

TEST(NetworkGradients, CnnActorAndCritic) {
  Rng rng(7);
  const ArchSpec s = testing::toy_arch(ArchKind::Cnn, 4);
  EXPECT_LT(network_error(Network::actor(s, rng), 5, rng), 1e-4);
  EXPECT_LT(network_error(Network::critic(s, rng), 5, rng), 1e-4);
}

TEST(NetworkGradients, InputGradient) {
  Rng rng(8);
  for (ArchKind kind : {ArchKind::Mlp, ArchKind::Cnn}) {
    const Network net = Network::actor(testing::toy_arch(kind, 4), rng);
    ParamSet p;
    p.add("x", net.input_size(), 3);
    p[0] = random_matrix(net.input_size(), 3, rng);
    const Matrix r = random_matrix(10, 3, rng);
    Network::Tape tape;
    net.forward(p[0], tape);
    ParamSet grads = net.params().zeros_like();
    ParamSet g = p.zeros_like();
    g[0] = net.backward(tape, r, grads);
    EXPECT_LT(testing::max_relative_error(p, g, [&] { return r.cwiseProduct(net.forward(p[0])).sum(); }), 1e-4);
  }
}

TEST(Network, DefaultShapes) {
  Rng rng(9);
  const ArchSpec s;
  const Network actor = Network::actor(s, rng);
  EXPECT_EQ(actor.input_size(), 37);
  EXPECT_EQ(actor.output_size(), 10);
  const auto& t = actor.params().tensors();
  EXPECT_EQ(t[0].name, "linear1.weight");
  EXPECT_EQ(t[0].value.size() + t[1].value.size(), 37 * 2400 + 2400);
  const Network critic = Network::critic(s, rng);
  EXPECT_EQ(critic.input_size(), 148);
  EXPECT_EQ(critic.output_size(), 1);
  EXPECT_EQ(s.observation_size(), 37);
}

TEST(Network, CnnShapes) {
  Rng rng(10);
  ArchSpec s;
  s.kind = ArchKind::Cnn;
  const Network actor = Network::actor(s, rng);
  EXPECT_EQ(actor.input_size(), 37);
  EXPECT_EQ(actor.output_size(), 10);
  EXPECT_EQ(actor.params().tensors()[0].value.rows(), 8);
  EXPECT_EQ(Network::critic(s, rng).input_size(), 148);
}

TEST(Network, ForwardIsDeterministic) {
  Rng rng(11);
  const Network actor = Network::actor(testing::toy_arch(ArchKind::Mlp, 4), rng);
  const WorldState st = reset_episode(1, EnvConfig{});
  const Matrix first = actor_forward(actor, build_observation(st, 0));
  for (int k = 0; k < 100; ++k) ASSERT_EQ(actor_forward(actor, build_observation(st, 0)), first);
  EXPECT_TRUE(first.allFinite());
}

TEST(Network, ZeroWeightsGiveUniformOverAvailable) {
  const Network z = Network::zeros(testing::toy_arch(ArchKind::Mlp, 4), NetRole::Actor);
  EnvConfig c;
  c.n_agents = 4;
  const WorldState st = reset_episode(5, c);
  const Observation o = build_observation(st, 0);
  const Matrix logits = actor_forward(z, o);
  EXPECT_TRUE((logits.array() == 0.0).all());
  const std::vector<double> l(logits.data(), logits.data() + 10);
  const ActionDistribution d = masked_distribution(l, o.mask);
  const double expected = 1.0 / static_cast<double>(o.mask.count());
  for (int a = 0; a < kNumActions; ++a) EXPECT_DOUBLE_EQ(d.probs[a], o.mask.test(a) ? expected : 0.0);
}

TEST(MaskedSoftmax, ShiftInvarianceAndMaskedZero) {
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> logits(10);
    for (double& v : logits) v = rng.uniform(-5, 5);
    ActionMask mask;
    mask.set(kStay);
    for (int a = 0; a < 10; ++a)
      if (rng.uniform01() < 0.5) mask.set(a);
    const ActionDistribution d = masked_distribution(logits, mask);
    std::vector<double> shifted = logits;
    for (double& v : shifted) v += 123.0;
    const ActionDistribution e = masked_distribution(shifted, mask);
    double sum = 0.0;
    for (int a = 0; a < 10; ++a) {
      sum += d.probs[a];
      EXPECT_NEAR(d.probs[a], e.probs[a], 1e-12);
      if (!mask.test(a)) {
        EXPECT_EQ(d.probs[a], 0.0);
        EXPECT_TRUE(std::isinf(d.log_probs[a]));
      }
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  EXPECT_THROW(masked_distribution(std::vector<double>(10, 0.0), ActionMask{}), std::invalid_argument);
}

TEST(LogProbGrad, MatchesFiniteDifference) {
  Rng rng(13);
  std::vector<bool> avail(10, true);
  avail[3] = false;
  nn::Vector l(10);
  for (int a = 0; a < 10; ++a) l[a] = rng.normal();
  const nn::Vector g = nn::log_prob_grad(nn::masked_log_softmax(l, avail), 5);
  for (int a = 0; a < 10; ++a) {
    nn::Vector up = l, down = l;
    up[a] += 1e-6;
    down[a] -= 1e-6;
    const double num = (nn::masked_log_softmax(up, avail)[5] - nn::masked_log_softmax(down, avail)[5]) / 2e-6;
    EXPECT_NEAR(g[a], num, 1e-7);
  }
}

TEST(ParamSet, Algebra) {
  ParamSet a;
  a.add("w", 2, 2);
  a[0].setConstant(1.0);
  ParamSet b = a.zeros_like();
  b[0].setConstant(2.0);
  a.axpy(0.5, b);
  EXPECT_EQ(a[0](1, 1), 2.0);
  EXPECT_EQ(a.dot(b), 16.0);
  EXPECT_EQ(a.scalar_count(), 4);
  EXPECT_TRUE(a.all_finite());
  a[0](0, 0) = std::nan("");
  EXPECT_FALSE(a.all_finite());
}

}  // namespace
}  // namespace comex
