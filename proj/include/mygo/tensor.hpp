#pragma once
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace mygo {

class Rng;

// Dense float64 tensor. Copies of a Tensor share storage (cheap handles);
// clone() makes an independent deep copy. Everything trains in float64 so
// finite-difference checks stay meaningful.
class Tensor {
 public:
  Tensor() = default;
  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor from(std::vector<size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor randn(std::vector<size_t> shape, Rng& rng, double stddev,
                      bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool empty() const { return !p_; }
  const std::vector<size_t>& shape() const;
  size_t size() const;
  size_t rank() const { return shape().size(); }
  double item() const;  // value of a one-element tensor

  std::span<double> data();
  std::span<const double> data() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  void ensure_grad();  // allocate a zeroed gradient buffer
  void clear_grad();   // drop the gradient buffer

  Tensor clone() const;     // deep copy, keeps requires_grad, no grad
  Tensor detached() const;  // deep copy with requires_grad off

  bool same_storage(const Tensor& other) const { return p_ == other.p_; }

  struct Impl;
  const std::shared_ptr<Impl>& impl() const { return p_; }

 private:
  std::shared_ptr<Impl> p_;
  explicit Tensor(std::shared_ptr<Impl> p) : p_(std::move(p)) {}
};

// Reverse-mode tape. Operations executed while a TapeScope is alive append
// their adjoint closures in execution order; backward() replays them in
// reverse. A tape admits a single backward pass unless reset().
class GradTape {
 public:
  using BackFn = std::function<void()>;
  void record(BackFn fn) { ops_.push_back(std::move(fn)); }
  size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }
  void reset();
  static GradTape* active();

 private:
  friend class TapeScope;
  friend void backward(const Tensor& loss);
  std::vector<BackFn> ops_;
  bool consumed_ = false;
};

// Activates a fresh tape for its lifetime; restores the previous one after.
// With no scope alive, operations run forward-only and record nothing.
class TapeScope {
 public:
  TapeScope();
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  GradTape& tape() { return tape_; }

 private:
  GradTape tape_;
  GradTape* prev_;
};

bool grad_recording();

// ---- differentiable operations ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_bias(const Tensor& x, const Tensor& b);          // [N,K] + [K]
Tensor add_channel_bias(const Tensor& x, const Tensor& b);  // [N,F,H,W] + [F]
Tensor concat_cols(const std::vector<Tensor>& parts);       // along dim 1
Tensor reshape(const Tensor& x, std::vector<size_t> shape);
Tensor conv2d(const Tensor& input, const Tensor& kernel, size_t stride,
              size_t pad);
Tensor max_pool2(const Tensor& input);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x);  // fixed slope 0.2
Tensor tanh_act(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor embedding_mean(const Tensor& table, const std::vector<int32_t>& tokens,
                      const std::vector<size_t>& offsets);
Tensor sum(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor cross_entropy_loss(const Tensor& logits,
                          const std::vector<int32_t>& labels);
Tensor bce_loss(const Tensor& pred, const Tensor& target);

// Constant one-hot rows, no gradient.
Tensor one_hot(const std::vector<int32_t>& labels, size_t k);

// Runs the active tape backwards from a scalar loss, accumulating into the
// grad buffer of every reachable requires_grad tensor.
void backward(const Tensor& loss);

}  // namespace mygo
