#pragma once

// Dense tanh network with hand-written reverse pass. Columns are samples in
// the batched calls.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace iccbf {

class Mlp {
 public:
  /// Per-layer activations kept by `forward_batch` for the reverse pass.
  struct Cache {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l+1] = output of layer l
  };

  Mlp() = default;

  /// Zero-initialized network; `sizes` = {input, hidden..., output}.
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
    for (int s : sizes_) {
      if (s < 1) throw std::invalid_argument("layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.push_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
      biases_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
  }

  /// Orthogonal weights (gain 5/3 on hidden layers, `out_gain` on the last),
  /// zero biases.
  static Mlp orthogonal(std::vector<int> sizes, std::mt19937_64& rng, double out_gain = 0.01) {
    Mlp net(std::move(sizes));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < net.weights_.size(); ++l) {
      const Eigen::Index rows = net.weights_[l].rows();
      const Eigen::Index cols = net.weights_[l].cols();
      const Eigen::Index big = std::max(rows, cols);
      Eigen::MatrixXd a(big, big);
      for (Eigen::Index i = 0; i < big; ++i) {
        for (Eigen::Index j = 0; j < big; ++j) a(i, j) = normal(rng);
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      Eigen::MatrixXd q = qr.householderQ();
      const Eigen::VectorXd diag = qr.matrixQR().diagonal();
      for (Eigen::Index j = 0; j < big; ++j) {
        if (diag[j] < 0.0) q.col(j) = -q.col(j);
      }
      const double gain = l + 1 == net.weights_.size() ? out_gain : 5.0 / 3.0;
      net.weights_[l] = gain * q.topLeftCorner(rows, cols);
    }
    return net;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  Eigen::MatrixXd& weight(int l) { return weights_.at(static_cast<std::size_t>(l)); }
  const Eigen::MatrixXd& weight(int l) const { return weights_.at(static_cast<std::size_t>(l)); }
  Eigen::VectorXd& bias(int l) { return biases_.at(static_cast<std::size_t>(l)); }
  const Eigen::VectorXd& bias(int l) const { return biases_.at(static_cast<std::size_t>(l)); }

  int num_parameters() const {
    int n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<int>(weights_[l].size() + biases_[l].size());
    return n;
  }

  /// Flat layout: for each layer, W (column-major) then b.
  Eigen::VectorXd parameters() const {
    Eigen::VectorXd out(num_parameters());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.segment(k, weights_[l].size()) = weights_[l].reshaped();
      k += weights_[l].size();
      out.segment(k, biases_[l].size()) = biases_[l];
      k += biases_[l].size();
    }
    return out;
  }

  void set_parameters(const Eigen::VectorXd& theta) {
    if (theta.size() != num_parameters()) throw std::invalid_argument("parameter vector has wrong length");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l].reshaped() = theta.segment(k, weights_[l].size());
      k += weights_[l].size();
      biases_[l] = theta.segment(k, biases_[l].size());
      k += biases_[l].size();
    }
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim()) throw std::invalid_argument("network input has wrong dimension");
    Eigen::MatrixXd a = x;
    if (cache) {
      cache->acts.clear();
      cache->acts.push_back(a);
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) z = z.array().tanh().matrix();
      a = std::move(z);
      if (cache) cache->acts.push_back(a);
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const { return forward_batch(x); }

  /// Reverse pass. `out_adjoint` is dLoss/dOutput per sample; parameter
  /// gradients are added to `grad` (flat layout); returns dLoss/dInput.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& out_adjoint, Eigen::VectorXd* grad) const {
    const int nl = num_layers();
    if (grad && grad->size() != num_parameters()) throw std::invalid_argument("gradient buffer has wrong length");
    std::vector<Eigen::Index> offsets(static_cast<std::size_t>(nl));
    Eigen::Index k = 0;
    for (int l = 0; l < nl; ++l) {
      offsets[static_cast<std::size_t>(l)] = k;
      k += weights_[static_cast<std::size_t>(l)].size() + biases_[static_cast<std::size_t>(l)].size();
    }
    Eigen::MatrixXd delta = out_adjoint;
    for (int l = nl - 1; l >= 0; --l) {
      const auto li = static_cast<std::size_t>(l);
      if (l + 1 < nl) delta = delta.cwiseProduct((1.0 - cache.acts[li + 1].array().square()).matrix());
      if (grad) {
        const Eigen::Index off = offsets[li];
        const Eigen::MatrixXd gw = delta * cache.acts[li].transpose();
        grad->segment(off, gw.size()) += gw.reshaped();
        grad->segment(off + gw.size(), biases_[li].size()) += delta.rowwise().sum();
      }
      delta = weights_[li].transpose() * delta;
    }
    return delta;
  }

  /// d output[head] / d input.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x, int head) const {
    if (head < 0 || head >= output_dim()) throw std::out_of_range("network head out of range");
    Cache cache;
    forward_batch(x, &cache);
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(output_dim(), 1);
    adj(head, 0) = 1.0;
    return backward(cache, adj, nullptr);
  }

  /// Gradient of sum_i out_adjoint_i . output(x_i) with respect to the
  /// parameters.
  Eigen::VectorXd param_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& out_adjoint) const {
    Cache cache;
    forward_batch(x, &cache);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(num_parameters());
    backward(cache, out_adjoint, &g);
    return g;
  }

  /// Upper bound on the Lipschitz constant (tanh is 1-Lipschitz).
  double lipschitz_bound() const {
    double l = 1.0;
    for (const auto& w : weights_) l *= w.operatorNorm();
    return l;
  }

  /// Plain-text dump with hexfloat parameters; round trips exactly.
  std::string to_text() const {
    std::ostringstream os;
    os << "mlp 1\n" << sizes_.size();
    for (int s : sizes_) os << ' ' << s;
    os << '\n';
    const Eigen::VectorXd theta = parameters();
    char buf[64];
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", theta[i]);
      os << buf << '\n';
    }
    return os.str();
  }

  static Mlp from_text(std::istream& is) {
    std::string tag;
    int version = 0;
    std::size_t n = 0;
    if (!(is >> tag >> version >> n) || tag != "mlp" || version != 1) throw std::runtime_error("not an mlp dump");
    std::vector<int> sizes(n);
    for (auto& s : sizes) {
      if (!(is >> s)) throw std::runtime_error("truncated mlp dump");
    }
    Mlp net(sizes);
    Eigen::VectorXd theta(net.num_parameters());
    std::string tok;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      if (!(is >> tok)) throw std::runtime_error("truncated mlp dump");
      char* end = nullptr;
      theta[i] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw std::runtime_error("bad number in mlp dump: " + tok);
    }
    net.set_parameters(theta);
    return net;
  }

  static Mlp from_text(const std::string& text) {
    std::istringstream is(text);
    return from_text(is);
  }

  bool operator==(const Mlp& o) const {
    return sizes_ == o.sizes_ && parameters() == o.parameters();
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// {in, 64, 64, 64, 64, out}.
inline std::vector<int> default_layer_sizes(int in, int out, int width = 64, int depth = 4) {
  std::vector<int> s{in};
  for (int i = 0; i < depth; ++i) s.push_back(width);
  s.push_back(out);
  return s;
}

/// lo + (tanh(raw) + 1)(hi - lo)/2.
inline double squash(double raw, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("squash bounds must satisfy lo < hi");
  return lo + 0.5 * (std::tanh(raw) + 1.0) * (hi - lo);
}

/// Inverse of `squash` on the open interval.
inline double unsquash(double value, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("squash bounds must satisfy lo < hi");
  return std::atanh(2.0 * (value - lo) / (hi - lo) - 1.0);
}

class BoundedActionMap {
 public:
  BoundedActionMap() = default;
  explicit BoundedActionMap(std::vector<std::pair<double, double>> bounds) : bounds_(std::move(bounds)) {
    for (const auto& [lo, hi] : bounds_) {
      if (!(lo < hi)) throw std::invalid_argument("action bounds must satisfy lo < hi");
    }
  }

  int size() const { return static_cast<int>(bounds_.size()); }
  const std::pair<double, double>& bounds(int i) const { return bounds_.at(static_cast<std::size_t>(i)); }

  Eigen::VectorXd decode(const Eigen::VectorXd& raw) const {
    if (raw.size() != size()) throw std::invalid_argument("raw action has wrong dimension");
    Eigen::VectorXd out(raw.size());
    for (int i = 0; i < size(); ++i) out[i] = squash(raw[i], bounds_[static_cast<std::size_t>(i)].first,
                                                     bounds_[static_cast<std::size_t>(i)].second);
    return out;
  }

 private:
  std::vector<std::pair<double, double>> bounds_;
};

}  // namespace iccbf
