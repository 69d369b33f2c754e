#include "comex/nn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace comex::nn {

int ParamSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  tensors_.push_back({std::move(name), Matrix::Zero(rows, cols)});
  return size() - 1;
}

Eigen::Index ParamSet::scalar_count() const {
  Eigen::Index n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  out.set_zero();
  return out;
}

void ParamSet::set_zero() {
  for (auto& t : tensors_) t.value.setZero();
}

void ParamSet::axpy(double alpha, const ParamSet& other) {
  if (other.size() != size()) throw std::invalid_argument("ParamSet::axpy: layout mismatch");
  for (int i = 0; i < size(); ++i) tensors_[i].value += alpha * other[i];
}

double ParamSet::dot(const ParamSet& other) const {
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += tensors_[i].value.cwiseProduct(other[i]).sum();
  return s;
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

Matrix dense_forward(const Matrix& weight, const Matrix& bias, const Matrix& x) {
  Matrix y = weight * x;
  y.colwise() += bias.col(0);
  return y;
}

Matrix dense_backward(const Matrix& weight, const Matrix& x, const Matrix& grad_y,
                      Matrix& grad_weight, Matrix& grad_bias) {
  grad_weight.noalias() += grad_y * x.transpose();
  grad_bias.col(0) += grad_y.rowwise().sum();
  return weight.transpose() * grad_y;
}

Matrix relu_forward(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& grad_y) {
  return (x.array() > 0.0).select(grad_y, 0.0);
}

Matrix layernorm_forward(const Matrix& gain, const Matrix& shift, const Matrix& x) {
  const double n = static_cast<double>(x.rows());
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).sum() / n;
    const Vector centered = x.col(c).array() - mean;
    const double inv_std = 1.0 / std::sqrt(centered.squaredNorm() / n + kLayerNormEps);
    y.col(c) = (centered * inv_std).cwiseProduct(gain.col(0)) + shift.col(0);
  }
  return y;
}

Matrix layernorm_backward(const Matrix& gain, const Matrix& x, const Matrix& grad_y,
                          Matrix& grad_gain, Matrix& grad_shift) {
  const double n = static_cast<double>(x.rows());
  Matrix grad_x(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).sum() / n;
    const Vector centered = x.col(c).array() - mean;
    const double inv_std = 1.0 / std::sqrt(centered.squaredNorm() / n + kLayerNormEps);
    const Vector xhat = centered * inv_std;
    grad_gain.col(0) += grad_y.col(c).cwiseProduct(xhat);
    grad_shift.col(0) += grad_y.col(c);
    const Vector g = grad_y.col(c).cwiseProduct(gain.col(0));
    const double sum_g = g.sum();
    const double sum_gx = g.dot(xhat);
    grad_x.col(c) = (inv_std / n) * (n * g.array() - sum_g - xhat.array() * sum_gx).matrix();
  }
  return grad_x;
}

namespace {

// Columns are output pixels, rows are (channel, kr, kc) taps.
Matrix im2col(const ConvShape& s, const double* plane) {
  const int pixels = s.side * s.side;
  Matrix cols = Matrix::Zero(s.in_channels * 9, pixels);
  for (int ch = 0; ch < s.in_channels; ++ch) {
    for (int kr = 0; kr < 3; ++kr) {
      for (int kc = 0; kc < 3; ++kc) {
        const int tap = ch * 9 + kr * 3 + kc;
        for (int r = 0; r < s.side; ++r) {
          const int sr = r + kr - 1;
          if (sr < 0 || sr >= s.side) continue;
          for (int c = 0; c < s.side; ++c) {
            const int sc = c + kc - 1;
            if (sc < 0 || sc >= s.side) continue;
            cols(tap, r * s.side + c) = plane[ch * pixels + sr * s.side + sc];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const ConvShape& s, const Matrix& cols, double* plane) {
  const int pixels = s.side * s.side;
  for (int ch = 0; ch < s.in_channels; ++ch) {
    for (int kr = 0; kr < 3; ++kr) {
      for (int kc = 0; kc < 3; ++kc) {
        const int tap = ch * 9 + kr * 3 + kc;
        for (int r = 0; r < s.side; ++r) {
          const int sr = r + kr - 1;
          if (sr < 0 || sr >= s.side) continue;
          for (int c = 0; c < s.side; ++c) {
            const int sc = c + kc - 1;
            if (sc < 0 || sc >= s.side) continue;
            plane[ch * pixels + sr * s.side + sc] += cols(tap, r * s.side + c);
          }
        }
      }
    }
  }
}

}  // namespace

Matrix conv_forward(const ConvShape& s, const Matrix& weight, const Matrix& bias, const Matrix& x) {
  const int pixels = s.side * s.side;
  if (x.rows() != s.in_channels * pixels) throw std::invalid_argument("conv_forward: input shape");
  Matrix y(s.out_channels * pixels, x.cols());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const Vector column = x.col(b);
    Matrix out = weight * im2col(s, column.data());
    out.colwise() += bias.col(0);
    // out is out_channels x pixels; store channel-major.
    for (int ch = 0; ch < s.out_channels; ++ch) {
      y.block(ch * pixels, b, pixels, 1) = out.row(ch).transpose();
    }
  }
  return y;
}

Matrix conv_backward(const ConvShape& s, const Matrix& weight, const Matrix& x,
                     const Matrix& grad_y, Matrix& grad_weight, Matrix& grad_bias) {
  const int pixels = s.side * s.side;
  Matrix grad_x = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    const Vector column = x.col(b);
    const Matrix cols = im2col(s, column.data());
    Matrix gy(s.out_channels, pixels);
    for (int ch = 0; ch < s.out_channels; ++ch) {
      gy.row(ch) = grad_y.block(ch * pixels, b, pixels, 1).transpose();
    }
    grad_weight.noalias() += gy * cols.transpose();
    grad_bias.col(0) += gy.rowwise().sum();
    const Matrix grad_cols = weight.transpose() * gy;
    Vector gx = Vector::Zero(x.rows());
    col2im_add(s, grad_cols, gx.data());
    grad_x.col(b) = gx;
  }
  return grad_x;
}

Vector masked_log_softmax(const Vector& logits, const std::vector<bool>& available) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double max_logit = kNegInf;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (available[i]) max_logit = std::max(max_logit, logits[i]);
  }
  if (max_logit == kNegInf) throw std::invalid_argument("masked_log_softmax: every action is masked");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (available[i]) sum += std::exp(logits[i] - max_logit);
  }
  const double log_z = max_logit + std::log(sum);
  Vector out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) out[i] = available[i] ? logits[i] - log_z : kNegInf;
  return out;
}

Vector log_prob_grad(const Vector& log_probs, int action) {
  Vector g = -log_probs.array().exp().matrix();
  g[action] += 1.0;
  return g;
}

void orthogonal_init(Matrix& m, double gain, Rng& rng) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  const bool tall = rows >= cols;
  Matrix a(tall ? rows : cols, tall ? cols : rows);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  m = gain * (tall ? q : Matrix(q.transpose()));
}

void uniform_init(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

}  // namespace comex::nn
