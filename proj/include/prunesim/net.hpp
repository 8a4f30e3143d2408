#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "prunesim/errors.hpp"
#include "prunesim/math.hpp"

namespace prunesim {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// One learnable tensor plus its gradient and Adam moments.
template <typename T>
struct Param {
  Mat<T> value, grad, m, v;

  void setup(Eigen::Index rows, Eigen::Index cols) {
    value.setZero(rows, cols);
    grad.setZero(rows, cols);
    m.setZero(rows, cols);
    v.setZero(rows, cols);
  }
};

// Orthogonal initialization (modified Gram-Schmidt over the smaller
// dimension, computed in double), scaled by `gain`.
template <typename T>
void orthogonal_init(Mat<T>& w, double gain, RandomStream& rng) {
  const bool transpose = w.rows() > w.cols();
  Eigen::MatrixXd a(transpose ? w.cols() : w.rows(), transpose ? w.rows() : w.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.normal();
  }
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index k = 0; k < r; ++k) {
      a.row(r) -= a.row(r).dot(a.row(k)) * a.row(k);
    }
    const double norm = a.row(r).norm();
    a.row(r) /= (norm > 1e-12 ? norm : 1.0);
  }
  const Eigen::MatrixXd q = transpose ? Eigen::MatrixXd(a.transpose()) : a;
  w = (gain * q).cast<T>();
}

struct ConvSpec {
  int out_c = 0;
  int kernel = 0;
  int stride = 1;
};

// Convolution over CHW-flattened column-sample batches, valid padding,
// optional fused ReLU. im2col + GEMM; the column matrix is cached for the
// backward pass.
template <typename T>
class Conv2D {
 public:
  void configure(int in_c, int in_h, int in_w, const ConvSpec& spec, bool relu) {
    in_c_ = in_c;
    in_h_ = in_h;
    in_w_ = in_w;
    out_c_ = spec.out_c;
    k_ = spec.kernel;
    stride_ = spec.stride;
    relu_ = relu;
    out_h_ = (in_h_ - k_) / stride_ + 1;
    out_w_ = (in_w_ - k_) / stride_ + 1;
    if (out_h_ < 1 || out_w_ < 1) throw ConfigError("conv output collapsed to zero");
    weight.setup(out_c_, in_c_ * k_ * k_);
    bias.setup(out_c_, 1);
  }

  void init(double gain, RandomStream& rng) { orthogonal_init(weight.value, gain, rng); }

  int out_dim() const { return out_c_ * out_h_ * out_w_; }
  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }
  int out_c() const { return out_c_; }

  const Mat<T>& forward(const Mat<T>& x) {
    const Eigen::Index n = x.cols();
    const int ohw = out_h_ * out_w_;
    im2col_.resize(in_c_ * k_ * k_, static_cast<Eigen::Index>(ohw) * n);
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          const Eigen::Index col = s * ohw + oy * out_w_ + ox;
          for (int c = 0; c < in_c_; ++c) {
            const int base = c * in_h_ * in_w_;
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = oy * stride_ + ky;
              const int row0 = (c * k_ + ky) * k_;
              const int off = base + iy * in_w_ + ox * stride_;
              for (int kx = 0; kx < k_; ++kx) {
                im2col_(row0 + kx, col) = x(off + kx, s);
              }
            }
          }
        }
      }
    }
    packed_.noalias() = weight.value * im2col_;
    packed_.colwise() += bias.value.col(0);

    y_.resize(out_dim(), n);
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int p = 0; p < ohw; ++p) {
        const Eigen::Index src = s * ohw + p;
        for (int c = 0; c < out_c_; ++c) {
          T v = packed_(c, src);
          if (relu_ && v < T(0)) v = T(0);
          y_(c * ohw + p, s) = v;
        }
      }
    }
    return y_;
  }

  // dy: gradient wrt the (post-activation) output; returns gradient wrt input.
  Mat<T> backward(const Mat<T>& dy) {
    const Eigen::Index n = dy.cols();
    const int ohw = out_h_ * out_w_;
    dpacked_.resize(out_c_, static_cast<Eigen::Index>(ohw) * n);
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int p = 0; p < ohw; ++p) {
        const Eigen::Index dst = s * ohw + p;
        for (int c = 0; c < out_c_; ++c) {
          T g = dy(c * ohw + p, s);
          if (relu_ && y_(c * ohw + p, s) <= T(0)) g = T(0);
          dpacked_(c, dst) = g;
        }
      }
    }
    weight.grad.noalias() += dpacked_ * im2col_.transpose();
    bias.grad.col(0).noalias() += dpacked_.rowwise().sum();

    dcol_.noalias() = weight.value.transpose() * dpacked_;
    Mat<T> dx = Mat<T>::Zero(in_c_ * in_h_ * in_w_, n);
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          const Eigen::Index col = s * ohw + oy * out_w_ + ox;
          for (int c = 0; c < in_c_; ++c) {
            const int base = c * in_h_ * in_w_;
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = oy * stride_ + ky;
              const int row0 = (c * k_ + ky) * k_;
              const int off = base + iy * in_w_ + ox * stride_;
              for (int kx = 0; kx < k_; ++kx) {
                dx(off + kx, s) += dcol_(row0 + kx, col);
              }
            }
          }
        }
      }
    }
    return dx;
  }

  const Mat<T>& output() const { return y_; }

  Param<T> weight, bias;

 private:
  int in_c_ = 0, in_h_ = 0, in_w_ = 0;
  int out_c_ = 0, k_ = 0, stride_ = 1;
  int out_h_ = 0, out_w_ = 0;
  bool relu_ = false;
  Mat<T> im2col_, packed_, dpacked_, dcol_, y_;
};

template <typename T>
class Dense {
 public:
  void configure(int in_dim, int out_dim, bool relu) {
    in_dim_ = in_dim;
    out_dim_ = out_dim;
    relu_ = relu;
    weight.setup(out_dim, in_dim);
    bias.setup(out_dim, 1);
  }

  void init(double gain, RandomStream& rng) { orthogonal_init(weight.value, gain, rng); }

  const Mat<T>& forward(const Mat<T>& x) {
    y_.noalias() = weight.value * x;
    y_.colwise() += bias.value.col(0);
    if (relu_) y_ = y_.cwiseMax(T(0));
    return y_;
  }

  // Needs the forward input x again for the weight gradient.
  Mat<T> backward(const Mat<T>& x, Mat<T> dy) {
    if (relu_) dy = dy.cwiseProduct((y_.array() > T(0)).template cast<T>().matrix());
    weight.grad.noalias() += dy * x.transpose();
    bias.grad.col(0).noalias() += dy.rowwise().sum();
    return weight.value.transpose() * dy;
  }

  const Mat<T>& output() const { return y_; }

  Param<T> weight, bias;

 private:
  int in_dim_ = 0, out_dim_ = 0;
  bool relu_ = false;
  Mat<T> y_;
};

struct NetArch {
  int in_c = 3;
  int in_h = 40;
  int in_w = 80;
  std::vector<ConvSpec> convs = {{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  int fc_dim = 512;
  int n_actions = 2;

  int input_dim() const { return in_c * in_h * in_w; }

  // Reduced architecture for gradient checks (8x8 input, double precision).
  static NetArch reduced() {
    NetArch a;
    a.in_h = 8;
    a.in_w = 8;
    a.convs = {{4, 4, 2}, {4, 3, 1}};
    a.fc_dim = 16;
    return a;
  }
};

// Shared conv trunk -> feature layer -> linear actor (action means) and
// critic (value) heads, with state-independent log standard deviations.
template <typename T>
class PolicyNet {
 public:
  PolicyNet(const NetArch& arch, std::uint64_t seed) : arch_(arch) {
    RandomStream rng(derive_seed(seed, {0xced0ULL}));
    int c = arch.in_c, h = arch.in_h, w = arch.in_w;
    convs_.resize(arch.convs.size());
    for (std::size_t i = 0; i < arch.convs.size(); ++i) {
      convs_[i].configure(c, h, w, arch.convs[i], true);
      convs_[i].init(std::sqrt(2.0), rng);
      c = arch.convs[i].out_c;
      h = convs_[i].out_h();
      w = convs_[i].out_w();
    }
    fc_.configure(c * h * w, arch.fc_dim, true);
    fc_.init(std::sqrt(2.0), rng);
    actor_.configure(arch.fc_dim, arch.n_actions, false);
    actor_.init(0.01, rng);
    critic_.configure(arch.fc_dim, 1, false);
    critic_.init(1.0, rng);
    log_std = Col<T>::Zero(arch.n_actions);
    log_std_grad = Col<T>::Zero(arch.n_actions);
  }

  const NetArch& arch() const { return arch_; }

  // x: (input_dim x batch). Fills action_mean (n_actions x batch) and
  // value (1 x batch).
  void forward(const Mat<T>& x) {
    if (x.rows() != arch_.input_dim()) {
      throw ConfigError("policy forward: observation dimension mismatch");
    }
    const Mat<T>* cur = &x;
    for (auto& conv : convs_) cur = &conv.forward(*cur);
    cur = &fc_.forward(*cur);
    actor_.forward(*cur);
    critic_.forward(*cur);
  }

  const Mat<T>& action_mean() const { return actor_.output(); }
  const Mat<T>& value() const { return critic_.output(); }

  // Backpropagates head gradients; the forward batch x must still be live.
  void backward(const Mat<T>& x, const Mat<T>& d_mean, const Mat<T>& d_value) {
    const Mat<T>& features = fc_.output();
    Mat<T> d_feat = actor_.backward(features, d_mean);
    d_feat += critic_.backward(features, d_value);
    const Mat<T>& last_conv = convs_.back().output();
    Mat<T> d = fc_.backward(last_conv, std::move(d_feat));
    for (std::size_t i = convs_.size(); i-- > 0;) {
      d = convs_[i].backward(d);
    }
  }

  void zero_grad() {
    for_each_param([](Param<T>& p) { p.grad.setZero(); });
    log_std_grad.setZero();
  }

  template <typename F>
  void for_each_param(F&& f) {
    for (auto& conv : convs_) {
      f(conv.weight);
      f(conv.bias);
    }
    f(fc_.weight);
    f(fc_.bias);
    f(actor_.weight);
    f(actor_.bias);
    f(critic_.weight);
    f(critic_.bias);
  }

  // log_std included at the tail; used by the optimizer and grad checks.
  Eigen::VectorXd parameters() const {
    std::vector<double> out;
    const_cast<PolicyNet*>(this)->for_each_param([&](Param<T>& p) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        out.push_back(static_cast<double>(p.value.data()[i]));
      }
    });
    for (Eigen::Index i = 0; i < log_std.size(); ++i) {
      out.push_back(static_cast<double>(log_std[i]));
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
  }

  void set_parameters(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    for_each_param([&](Param<T>& p) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = static_cast<T>(flat[at++]);
      }
    });
    for (Eigen::Index i = 0; i < log_std.size(); ++i) {
      log_std[i] = static_cast<T>(flat[at++]);
    }
  }

  Eigen::VectorXd gradients() const {
    std::vector<double> out;
    const_cast<PolicyNet*>(this)->for_each_param([&](Param<T>& p) {
      for (Eigen::Index i = 0; i < p.grad.size(); ++i) {
        out.push_back(static_cast<double>(p.grad.data()[i]));
      }
    });
    for (Eigen::Index i = 0; i < log_std_grad.size(); ++i) {
      out.push_back(static_cast<double>(log_std_grad[i]));
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
  }

  Col<T> log_std;
  Col<T> log_std_grad;

 private:
  NetArch arch_;
  std::vector<Conv2D<T>> convs_;
  Dense<T> fc_;
  Dense<T> actor_;
  Dense<T> critic_;
};

// Adam with global-norm gradient clipping (log_std included).
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-5)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(PolicyNet<T>& net, double max_grad_norm) {
    double sq = 0.0;
    net.for_each_param([&](Param<T>& p) {
      sq += static_cast<double>(p.grad.squaredNorm());
    });
    sq += static_cast<double>(net.log_std_grad.squaredNorm());
    const double norm = std::sqrt(sq);
    const double scale =
        (max_grad_norm > 0.0 && norm > max_grad_norm) ? max_grad_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const T alpha = static_cast<T>(lr_ * std::sqrt(bc2) / bc1);

    net.for_each_param([&](Param<T>& p) { update(p, scale, alpha); });
    // log_std shares the schedule
    if (ls_m_.size() != net.log_std.size()) {
      ls_m_ = Col<T>::Zero(net.log_std.size());
      ls_v_ = Col<T>::Zero(net.log_std.size());
    }
    for (Eigen::Index i = 0; i < net.log_std.size(); ++i) {
      const T g = static_cast<T>(scale) * net.log_std_grad[i];
      ls_m_[i] = static_cast<T>(beta1_) * ls_m_[i] + static_cast<T>(1.0 - beta1_) * g;
      ls_v_[i] = static_cast<T>(beta2_) * ls_v_[i] + static_cast<T>(1.0 - beta2_) * g * g;
      net.log_std[i] -= alpha * ls_m_[i] / (std::sqrt(ls_v_[i]) + static_cast<T>(eps_));
    }
  }

 private:
  void update(Param<T>& p, double scale, T alpha) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const T g = static_cast<T>(scale) * p.grad.data()[i];
      T& m = p.m.data()[i];
      T& v = p.v.data()[i];
      m = static_cast<T>(beta1_) * m + static_cast<T>(1.0 - beta1_) * g;
      v = static_cast<T>(beta2_) * v + static_cast<T>(1.0 - beta2_) * g * g;
      p.value.data()[i] -= alpha * m / (std::sqrt(v) + static_cast<T>(eps_));
    }
  }

  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Col<T> ls_m_, ls_v_;
};

// Checkpoint: flat little-endian binary. Layout documented in the README.
void save_checkpoint(const PolicyNet<float>& net, const std::string& path);
PolicyNet<float> load_checkpoint(const std::string& path);

}  // namespace prunesim
