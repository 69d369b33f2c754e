#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "comex/rng.hpp"

namespace comex::nn {

// Activations are stored feature-major: one column per sample.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ParamTensor {
  std::string name;
  Matrix value;

  friend bool operator==(const ParamTensor& a, const ParamTensor& b) {
    return a.name == b.name && a.value.rows() == b.value.rows() &&
           a.value.cols() == b.value.cols() && a.value == b.value;
  }
};

// Ordered collection of named parameter tensors. Gradients use a ParamSet of
// identical layout, so updates and finite-difference checks can walk both in
// lockstep.
class ParamSet {
 public:
  int add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Matrix& operator[](int i) { return tensors_[i].value; }
  const Matrix& operator[](int i) const { return tensors_[i].value; }
  int size() const { return static_cast<int>(tensors_.size()); }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }
  std::vector<ParamTensor>& tensors() { return tensors_; }

  Eigen::Index scalar_count() const;
  ParamSet zeros_like() const;
  void set_zero();
  void axpy(double alpha, const ParamSet& other);  // this += alpha * other
  double dot(const ParamSet& other) const;
  bool all_finite() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<ParamTensor> tensors_;
};

// Primitive layers. Each backward pass accumulates parameter gradients and
// returns the gradient with respect to its input.

Matrix dense_forward(const Matrix& weight, const Matrix& bias, const Matrix& x);
Matrix dense_backward(const Matrix& weight, const Matrix& x, const Matrix& grad_y,
                      Matrix& grad_weight, Matrix& grad_bias);

Matrix relu_forward(const Matrix& x);
Matrix relu_backward(const Matrix& x, const Matrix& grad_y);

inline constexpr double kLayerNormEps = 1e-5;
Matrix layernorm_forward(const Matrix& gain, const Matrix& shift, const Matrix& x);
Matrix layernorm_backward(const Matrix& gain, const Matrix& x, const Matrix& grad_y,
                          Matrix& grad_gain, Matrix& grad_shift);

// 3x3 kernel, stride 1, zero padding 1. Input rows hold in_channels planes of
// side x side cells (channel-major, then row-major); weight is
// out_channels x (in_channels * 9).
struct ConvShape {
  int in_channels;
  int out_channels;
  int side;
};
Matrix conv_forward(const ConvShape& shape, const Matrix& weight, const Matrix& bias, const Matrix& x);
Matrix conv_backward(const ConvShape& shape, const Matrix& weight, const Matrix& x,
                     const Matrix& grad_y, Matrix& grad_weight, Matrix& grad_bias);

// Log-probabilities of a categorical over `logits` restricted to `available`
// (unavailable entries get -inf). At least one entry must be available.
Vector masked_log_softmax(const Vector& logits, const std::vector<bool>& available);

// Gradient of log p(action) with respect to the logits: onehot - p.
Vector log_prob_grad(const Vector& log_probs, int action);

// Initializers.
void orthogonal_init(Matrix& m, double gain, Rng& rng);
void uniform_init(Matrix& m, double bound, Rng& rng);

}  // namespace comex::nn
