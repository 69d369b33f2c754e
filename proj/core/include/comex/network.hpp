#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "comex/nn.hpp"
#include "comex/rng.hpp"

namespace comex {

enum class ArchKind { Mlp, Cnn };
enum class NetRole { Actor, Critic };

const char* to_string(ArchKind k);
const char* to_string(NetRole r);

// Layer widths. MLP defaults follow the 37 -> 2400 -> 300 -> 10 actor; the
// CNN embedding widths are this project's choice.
struct ArchSpec {
  ArchKind kind = ArchKind::Mlp;
  int n_agents = 4;
  int hidden1 = 2400;
  int hidden2 = 300;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int fov_embed = 64;
  int fpr_embed = 32;
  int net_embed = 16;
  int trunk = 128;

  int observation_size() const;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

nlohmann::json to_json(const ArchSpec& spec);
ArchSpec arch_spec_from_json(const nlohmann::json& j);

// A feed-forward network over observation columns. Actors map one agent's
// observation to 10 logits; critics map the concatenated joint observation
// to a scalar value.
class Network {
 public:
  struct Tape;

  static Network actor(const ArchSpec& spec, Rng& rng);
  static Network critic(const ArchSpec& spec, Rng& rng);
  // Shapes only, every parameter zero.
  static Network zeros(const ArchSpec& spec, NetRole role);

  const ArchSpec& spec() const { return spec_; }
  NetRole role() const { return role_; }
  int input_size() const;
  int output_size() const;

  nn::Matrix forward(const nn::Matrix& x) const;
  nn::Matrix forward(const nn::Matrix& x, Tape& tape) const;
  // Accumulates into `grads` (same layout as params()) and returns d/dx.
  nn::Matrix backward(const Tape& tape, const nn::Matrix& grad_out, nn::ParamSet& grads) const;

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  friend bool operator==(const Network&, const Network&);

  enum class OpKind { Dense, Relu, LayerNorm, Conv };
  struct Op {
    OpKind kind;
    int weight = -1;  // parameter indices
    int bias = -1;
    nn::ConvShape conv{};
  };
  using Sequence = std::vector<Op>;
  // Rows [offset, offset + rows) of the input pass through `sequence`; the
  // branch outputs are stacked and fed to the trunk.
  struct Branch {
    int offset;
    int rows;
    int sequence;
  };
  struct Tape {
    std::vector<std::vector<nn::Matrix>> branch_inputs;
    std::vector<nn::Matrix> trunk_inputs;
    std::vector<Eigen::Index> branch_out_rows;
  };

 private:
  Network(const ArchSpec& spec, NetRole role);
  void build();
  void initialize(Rng& rng);

  int dense(const std::string& name, int in, int out, Sequence& seq);
  void layernorm(const std::string& name, int width, Sequence& seq);
  void conv(const std::string& name, nn::ConvShape shape, Sequence& seq);

  nn::Matrix run(const Sequence& seq, const nn::Matrix& x, std::vector<nn::Matrix>* tape) const;
  nn::Matrix run_backward(const Sequence& seq, const std::vector<nn::Matrix>& tape,
                          const nn::Matrix& grad_y, nn::ParamSet& grads) const;

  ArchSpec spec_;
  NetRole role_;
  nn::ParamSet params_;
  std::vector<Sequence> sequences_;
  std::vector<Branch> branches_;  // empty: trunk reads the raw input
  int trunk_ = 0;
  int input_size_ = 0;
  int output_size_ = 0;
  int head_weight_ = -1;  // output layer, initialized separately
};

}  // namespace comex
