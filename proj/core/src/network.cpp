#include "comex/network.hpp"

#include <cmath>
#include <stdexcept>

#include "comex/types.hpp"

namespace comex {

using nn::Matrix;

const char* to_string(ArchKind k) { return k == ArchKind::Mlp ? "mlp" : "cnn"; }
const char* to_string(NetRole r) { return r == NetRole::Actor ? "actor" : "critic"; }

int ArchSpec::observation_size() const { return kFovCells + kFprFeatures + n_agents; }

nlohmann::json to_json(const ArchSpec& s) {
  return {{"kind", to_string(s.kind)},        {"n_agents", s.n_agents},
          {"hidden1", s.hidden1},             {"hidden2", s.hidden2},
          {"conv1_channels", s.conv1_channels}, {"conv2_channels", s.conv2_channels},
          {"fov_embed", s.fov_embed},         {"fpr_embed", s.fpr_embed},
          {"net_embed", s.net_embed},         {"trunk", s.trunk}};
}

ArchSpec arch_spec_from_json(const nlohmann::json& j) {
  ArchSpec s;
  const std::string kind = j.value("kind", std::string("mlp"));
  if (kind == "mlp") {
    s.kind = ArchKind::Mlp;
  } else if (kind == "cnn") {
    s.kind = ArchKind::Cnn;
  } else {
    throw std::invalid_argument("unknown architecture kind '" + kind + "'");
  }
  s.n_agents = j.value("n_agents", s.n_agents);
  s.hidden1 = j.value("hidden1", s.hidden1);
  s.hidden2 = j.value("hidden2", s.hidden2);
  s.conv1_channels = j.value("conv1_channels", s.conv1_channels);
  s.conv2_channels = j.value("conv2_channels", s.conv2_channels);
  s.fov_embed = j.value("fov_embed", s.fov_embed);
  s.fpr_embed = j.value("fpr_embed", s.fpr_embed);
  s.net_embed = j.value("net_embed", s.net_embed);
  s.trunk = j.value("trunk", s.trunk);
  return s;
}

Network::Network(const ArchSpec& spec, NetRole role) : spec_(spec), role_(role) {
  if (spec.n_agents < 1) throw std::invalid_argument("ArchSpec: n_agents must be >= 1");
  build();
}

Network Network::actor(const ArchSpec& spec, Rng& rng) {
  Network net(spec, NetRole::Actor);
  net.initialize(rng);
  return net;
}

Network Network::critic(const ArchSpec& spec, Rng& rng) {
  Network net(spec, NetRole::Critic);
  net.initialize(rng);
  return net;
}

Network Network::zeros(const ArchSpec& spec, NetRole role) { return Network(spec, role); }

int Network::input_size() const { return input_size_; }
int Network::output_size() const { return output_size_; }

int Network::dense(const std::string& name, int in, int out, Sequence& seq) {
  Op op{OpKind::Dense};
  op.weight = params_.add(name + ".weight", out, in);
  op.bias = params_.add(name + ".bias", out, 1);
  seq.push_back(op);
  return op.weight;
}

void Network::layernorm(const std::string& name, int width, Sequence& seq) {
  Op op{OpKind::LayerNorm};
  op.weight = params_.add(name + ".gain", width, 1);
  op.bias = params_.add(name + ".shift", width, 1);
  seq.push_back(op);
}

void Network::conv(const std::string& name, nn::ConvShape shape, Sequence& seq) {
  Op op{OpKind::Conv};
  op.weight = params_.add(name + ".weight", shape.out_channels, shape.in_channels * 9);
  op.bias = params_.add(name + ".bias", shape.out_channels, 1);
  op.conv = shape;
  seq.push_back(op);
}

void Network::build() {
  const int obs = spec_.observation_size();
  const int outputs = role_ == NetRole::Actor ? kNumActions : 1;
  const Op relu{OpKind::Relu};

  if (spec_.kind == ArchKind::Mlp) {
    input_size_ = role_ == NetRole::Actor ? obs : obs * spec_.n_agents;
    Sequence trunk;
    dense("linear1", input_size_, spec_.hidden1, trunk);
    trunk.push_back(relu);
    layernorm("norm1", spec_.hidden1, trunk);
    dense("linear2", spec_.hidden1, spec_.hidden2, trunk);
    trunk.push_back(relu);
    head_weight_ = dense("linear3", spec_.hidden2, outputs, trunk);
    sequences_.push_back(std::move(trunk));
    trunk_ = 0;
  } else {
    Sequence fov;
    conv("fov.conv1", {1, spec_.conv1_channels, kFovSide}, fov);
    fov.push_back(relu);
    conv("fov.conv2", {spec_.conv1_channels, spec_.conv2_channels, kFovSide}, fov);
    fov.push_back(relu);
    dense("fov.fc", spec_.conv2_channels * kFovCells, spec_.fov_embed, fov);
    fov.push_back(relu);
    Sequence fpr;
    dense("fpr.fc", kFprFeatures, spec_.fpr_embed, fpr);
    fpr.push_back(relu);
    Sequence net;
    dense("net.fc", spec_.n_agents, spec_.net_embed, net);
    net.push_back(relu);
    sequences_ = {std::move(fov), std::move(fpr), std::move(net)};

    const int copies = role_ == NetRole::Actor ? 1 : spec_.n_agents;
    for (int a = 0; a < copies; ++a) {
      const int base = a * obs;
      branches_.push_back({base, kFovCells, 0});
      branches_.push_back({base + kFovCells, kFprFeatures, 1});
      branches_.push_back({base + kFovCells + kFprFeatures, spec_.n_agents, 2});
    }
    input_size_ = copies * obs;
    const int embed = copies * (spec_.fov_embed + spec_.fpr_embed + spec_.net_embed);
    Sequence trunk;
    dense("trunk.fc", embed, spec_.trunk, trunk);
    trunk.push_back(relu);
    head_weight_ = dense("head", spec_.trunk, outputs, trunk);
    sequences_.push_back(std::move(trunk));
    trunk_ = static_cast<int>(sequences_.size()) - 1;
  }
  output_size_ = outputs;
}

void Network::initialize(Rng& rng) {
  const double hidden_gain = std::sqrt(2.0);
  for (const auto& seq : sequences_) {
    for (const Op& op : seq) {
      if (op.kind == OpKind::LayerNorm) {
        params_[op.weight].setOnes();
        params_[op.bias].setZero();
      } else if (op.kind == OpKind::Dense || op.kind == OpKind::Conv) {
        if (op.weight == head_weight_) {
          if (role_ == NetRole::Actor) {
            nn::uniform_init(params_[op.weight], 0.01, rng);
          } else {
            nn::orthogonal_init(params_[op.weight], 1.0, rng);
          }
        } else {
          nn::orthogonal_init(params_[op.weight], hidden_gain, rng);
        }
        params_[op.bias].setZero();
      }
    }
  }
}

Matrix Network::run(const Sequence& seq, const Matrix& x, std::vector<Matrix>* tape) const {
  Matrix cur = x;
  for (const Op& op : seq) {
    if (tape) tape->push_back(cur);
    switch (op.kind) {
      case OpKind::Dense:
        cur = nn::dense_forward(params_[op.weight], params_[op.bias], cur);
        break;
      case OpKind::Relu:
        cur = nn::relu_forward(cur);
        break;
      case OpKind::LayerNorm:
        cur = nn::layernorm_forward(params_[op.weight], params_[op.bias], cur);
        break;
      case OpKind::Conv:
        cur = nn::conv_forward(op.conv, params_[op.weight], params_[op.bias], cur);
        break;
    }
  }
  return cur;
}

Matrix Network::run_backward(const Sequence& seq, const std::vector<Matrix>& tape,
                             const Matrix& grad_y, nn::ParamSet& grads) const {
  Matrix g = grad_y;
  for (std::size_t k = seq.size(); k-- > 0;) {
    const Op& op = seq[k];
    const Matrix& x = tape[k];
    switch (op.kind) {
      case OpKind::Dense:
        g = nn::dense_backward(params_[op.weight], x, g, grads[op.weight], grads[op.bias]);
        break;
      case OpKind::Relu:
        g = nn::relu_backward(x, g);
        break;
      case OpKind::LayerNorm:
        g = nn::layernorm_backward(params_[op.weight], x, g, grads[op.weight], grads[op.bias]);
        break;
      case OpKind::Conv:
        g = nn::conv_backward(op.conv, params_[op.weight], x, g, grads[op.weight], grads[op.bias]);
        break;
    }
  }
  return g;
}

Matrix Network::forward(const Matrix& x) const {
  if (x.rows() != input_size_) throw std::invalid_argument("Network::forward: input has wrong size");
  if (branches_.empty()) return run(sequences_[trunk_], x, nullptr);
  std::vector<Matrix> outs;
  Eigen::Index total = 0;
  for (const Branch& b : branches_) {
    outs.push_back(run(sequences_[b.sequence], x.middleRows(b.offset, b.rows), nullptr));
    total += outs.back().rows();
  }
  Matrix z(total, x.cols());
  Eigen::Index row = 0;
  for (const Matrix& o : outs) {
    z.middleRows(row, o.rows()) = o;
    row += o.rows();
  }
  return run(sequences_[trunk_], z, nullptr);
}

Matrix Network::forward(const Matrix& x, Tape& tape) const {
  if (x.rows() != input_size_) throw std::invalid_argument("Network::forward: input has wrong size");
  tape = Tape{};
  if (branches_.empty()) return run(sequences_[trunk_], x, &tape.trunk_inputs);
  std::vector<Matrix> outs;
  Eigen::Index total = 0;
  tape.branch_inputs.resize(branches_.size());
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Branch& b = branches_[i];
    outs.push_back(run(sequences_[b.sequence], x.middleRows(b.offset, b.rows), &tape.branch_inputs[i]));
    tape.branch_out_rows.push_back(outs.back().rows());
    total += outs.back().rows();
  }
  Matrix z(total, x.cols());
  Eigen::Index row = 0;
  for (const Matrix& o : outs) {
    z.middleRows(row, o.rows()) = o;
    row += o.rows();
  }
  return run(sequences_[trunk_], z, &tape.trunk_inputs);
}

Matrix Network::backward(const Tape& tape, const Matrix& grad_out, nn::ParamSet& grads) const {
  const Matrix gz = run_backward(sequences_[trunk_], tape.trunk_inputs, grad_out, grads);
  if (branches_.empty()) return gz;
  Matrix gx = Matrix::Zero(input_size_, grad_out.cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Branch& b = branches_[i];
    const Eigen::Index rows = tape.branch_out_rows[i];
    gx.middleRows(b.offset, b.rows) +=
        run_backward(sequences_[b.sequence], tape.branch_inputs[i], gz.middleRows(row, rows), grads);
    row += rows;
  }
  return gx;
}

bool operator==(const Network& a, const Network& b) {
  return a.spec_ == b.spec_ && a.role_ == b.role_ && a.params_ == b.params_;
}

}  // namespace comex
