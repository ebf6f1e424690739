#include "mygo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mygo/kernels.hpp"
#include "mygo/rng.hpp"

namespace mygo {

struct Tensor::Impl {
  std::vector<size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means absent
  bool requires_grad = false;
};

namespace {

size_t shape_product(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t e : shape) n *= e;
  return n;
}

void check_positive_extents(const std::vector<size_t>& shape) {
  for (size_t e : shape)
    if (e == 0) throw std::invalid_argument("tensor extents must be positive");
}

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

using ImplPtr = std::shared_ptr<Tensor::Impl>;

void accumulate_ready(const ImplPtr& p) {
  if (p->grad.empty()) p->grad.assign(p->data.size(), 0.0);
}

thread_local GradTape* t_active_tape = nullptr;

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  check_positive_extents(shape);
  auto impl = std::make_shared<Impl>();
  impl->data.assign(shape_product(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(std::vector<size_t> shape, double value,
                    bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.p_->data.begin(), t.p_->data.end(), value);
  return t;
}

Tensor Tensor::from(std::vector<size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  check_positive_extents(shape);
  if (shape_product(shape) != values.size())
    fail("length mismatch: shape " + shape_str(shape) + " needs " +
         std::to_string(shape_product(shape)) + " values, got " +
         std::to_string(values.size()));
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::randn(std::vector<size_t> shape, Rng& rng, double stddev,
                     bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  rng.fill_normal(t.data());
  if (stddev != 1.0)
    for (auto& v : t.data()) v *= stddev;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

const std::vector<size_t>& Tensor::shape() const {
  if (!p_) fail("empty tensor");
  return p_->shape;
}

size_t Tensor::size() const { return p_ ? p_->data.size() : 0; }

double Tensor::item() const {
  if (size() != 1) fail("item() requires a one-element tensor");
  return p_->data[0];
}

std::span<double> Tensor::data() {
  if (!p_) fail("empty tensor");
  return {p_->data.data(), p_->data.size()};
}

std::span<const double> Tensor::data() const {
  if (!p_) fail("empty tensor");
  return {p_->data.data(), p_->data.size()};
}

bool Tensor::requires_grad() const { return p_ && p_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!p_) fail("empty tensor");
  p_->requires_grad = on;
}

bool Tensor::has_grad() const { return p_ && !p_->grad.empty(); }

std::span<double> Tensor::grad() {
  if (!has_grad()) fail("tensor has no gradient buffer");
  return {p_->grad.data(), p_->grad.size()};
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) fail("tensor has no gradient buffer");
  return {p_->grad.data(), p_->grad.size()};
}

void Tensor::ensure_grad() {
  if (!p_) fail("empty tensor");
  accumulate_ready(p_);
}

void Tensor::clear_grad() {
  if (p_) p_->grad.clear();
}

Tensor Tensor::clone() const {
  if (!p_) return Tensor();
  auto impl = std::make_shared<Impl>();
  impl->shape = p_->shape;
  impl->data = p_->data;
  impl->requires_grad = p_->requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detached() const {
  Tensor t = clone();
  if (t.p_) t.p_->requires_grad = false;
  return t;
}

// ---- tape -------------------------------------------------------------------

void GradTape::reset() {
  ops_.clear();
  consumed_ = false;
}

GradTape* GradTape::active() { return t_active_tape; }

TapeScope::TapeScope() : prev_(t_active_tape) { t_active_tape = &tape_; }

TapeScope::~TapeScope() { t_active_tape = prev_; }

bool grad_recording() { return t_active_tape != nullptr; }

void backward(const Tensor& loss) {
  GradTape* tape = t_active_tape;
  if (!tape) throw std::logic_error("backward() outside a TapeScope");
  if (tape->consumed_)
    throw std::logic_error("backward() on a consumed tape; reset() it first");
  if (loss.size() != 1) fail("backward() requires a scalar loss");
  if (!loss.requires_grad())
    throw std::logic_error("loss does not participate in the tape");
  Tensor seed = loss;
  seed.ensure_grad();
  seed.grad()[0] += 1.0;
  for (auto it = tape->ops_.rbegin(); it != tape->ops_.rend(); ++it) (*it)();
  tape->consumed_ = true;
}

// ---- op helpers -------------------------------------------------------------

namespace {

bool record_wanted(std::initializer_list<const Tensor*> inputs) {
  if (!t_active_tape) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Gradient of `out` if any was accumulated; ops whose output never received
// gradient contribute nothing.
const std::vector<double>* out_grad(const ImplPtr& out) {
  return out->grad.empty() ? nullptr : &out->grad;
}

}  // namespace

// ---- operations -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) fail("matmul expects rank-2 tensors");
  const size_t m = a.shape()[0], k = a.shape()[1];
  if (b.shape()[0] != k)
    fail("matmul extent mismatch: " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
  const size_t n = b.shape()[1];
  Tensor c = Tensor::zeros({m, n});
  kernels::matmul_nn(a.data().data(), b.data().data(), c.data().data(), m, k, n);
  if (record_wanted({&a, &b})) {
    c.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), ci = c.impl();
    GradTape::active()->record([ai, bi, ci, m, k, n] {
      const auto* g = out_grad(ci);
      if (!g) return;
      if (ai->requires_grad) {
        accumulate_ready(ai);
        kernels::matmul_nt_acc(g->data(), bi->data.data(), ai->grad.data(), m,
                               n, k);
      }
      if (bi->requires_grad) {
        accumulate_ready(bi);
        kernels::matmul_tn_acc(ai->data.data(), g->data(), bi->grad.data(), m,
                               k, n);
      }
    });
  }
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) fail("add shape mismatch");
  Tensor c = Tensor::zeros(a.shape());
  auto ad = a.data(), bd = b.data();
  auto cd = c.data();
  for (size_t i = 0; i < cd.size(); ++i) cd[i] = ad[i] + bd[i];
  if (record_wanted({&a, &b})) {
    c.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), ci = c.impl();
    GradTape::active()->record([ai, bi, ci] {
      const auto* g = out_grad(ci);
      if (!g) return;
      for (const ImplPtr& p : {ai, bi}) {
        if (!p->requires_grad) continue;
        accumulate_ready(p);
        for (size_t i = 0; i < g->size(); ++i) p->grad[i] += (*g)[i];
      }
    });
  }
  return c;
}

Tensor scale(const Tensor& x, double s) {
  Tensor y = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto yd = y.data();
  for (size_t i = 0; i < yd.size(); ++i) yd[i] = s * xd[i];
  if (record_wanted({&x})) {
    y.set_requires_grad(true);
    auto xi = x.impl(), yi = y.impl();
    GradTape::active()->record([xi, yi, s] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(xi);
      for (size_t i = 0; i < g->size(); ++i) xi->grad[i] += s * (*g)[i];
    });
  }
  return y;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || b.shape()[0] != x.shape()[1])
    fail("add_bias expects [N,K] + [K]");
  const size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor y = Tensor::zeros(x.shape());
  kernels::add_bias_fwd(x.data().data(), b.data().data(), y.data().data(),
                        rows, cols);
  if (record_wanted({&x, &b})) {
    y.set_requires_grad(true);
    auto xi = x.impl(), bi = b.impl(), yi = y.impl();
    GradTape::active()->record([xi, bi, yi, rows, cols] {
      const auto* g = out_grad(yi);
      if (!g) return;
      if (xi->requires_grad) {
        accumulate_ready(xi);
        for (size_t i = 0; i < g->size(); ++i) xi->grad[i] += (*g)[i];
      }
      if (bi->requires_grad) {
        accumulate_ready(bi);
        kernels::add_bias_bwd(g->data(), bi->grad.data(), rows, cols);
      }
    });
  }
  return y;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() != 4 || b.rank() != 1 || b.shape()[0] != x.shape()[1])
    fail("add_channel_bias expects [N,F,H,W] + [F]");
  const size_t n = x.shape()[0], f = x.shape()[1];
  const size_t plane = x.shape()[2] * x.shape()[3];
  Tensor y = Tensor::zeros(x.shape());
  kernels::add_channel_bias_fwd(x.data().data(), b.data().data(),
                                y.data().data(), n, f, plane);
  if (record_wanted({&x, &b})) {
    y.set_requires_grad(true);
    auto xi = x.impl(), bi = b.impl(), yi = y.impl();
    GradTape::active()->record([xi, bi, yi, n, f, plane] {
      const auto* g = out_grad(yi);
      if (!g) return;
      if (xi->requires_grad) {
        accumulate_ready(xi);
        for (size_t i = 0; i < g->size(); ++i) xi->grad[i] += (*g)[i];
      }
      if (bi->requires_grad) {
        accumulate_ready(bi);
        kernels::add_channel_bias_bwd(g->data(), bi->grad.data(), n, f, plane);
      }
    });
  }
  return y;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_cols of nothing");
  const size_t rows = parts[0].shape()[0];
  size_t cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[0] != rows)
      fail("concat_cols expects matching row counts");
    cols += p.shape()[1];
  }
  Tensor y = Tensor::zeros({rows, cols});
  auto yd = y.data();
  size_t col0 = 0;
  for (const Tensor& p : parts) {
    const size_t pc = p.shape()[1];
    auto pd = p.data();
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < pc; ++j) yd[i * cols + col0 + j] = pd[i * pc + j];
    col0 += pc;
  }
  bool wants = false;
  if (t_active_tape)
    for (const Tensor& p : parts) wants |= p.requires_grad();
  if (wants) {
    y.set_requires_grad(true);
    std::vector<ImplPtr> impls;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) impls.push_back(p.impl());
    auto yi = y.impl();
    GradTape::active()->record([impls, yi, rows, cols] {
      const auto* g = out_grad(yi);
      if (!g) return;
      size_t col0 = 0;
      for (const ImplPtr& p : impls) {
        const size_t pc = p->shape[1];
        if (p->requires_grad) {
          accumulate_ready(p);
          for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < pc; ++j)
              p->grad[i * pc + j] += (*g)[i * cols + col0 + j];
        }
        col0 += pc;
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, std::vector<size_t> shape) {
  check_positive_extents(shape);
  if (shape_product(shape) != x.size()) fail("reshape size mismatch");
  Tensor y = Tensor::zeros(shape);
  auto xd = x.data();
  std::copy(xd.begin(), xd.end(), y.data().begin());
  if (record_wanted({&x})) {
    y.set_requires_grad(true);
    auto xi = x.impl(), yi = y.impl();
    GradTape::active()->record([xi, yi] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(xi);
      for (size_t i = 0; i < g->size(); ++i) xi->grad[i] += (*g)[i];
    });
  }
  return y;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, size_t stride,
              size_t pad) {
  if (input.rank() != 4 || kernel.rank() != 4)
    fail("conv2d expects [N,C,H,W] input and [F,C,kh,kw] kernel");
  if (stride < 1) fail("conv2d stride must be >= 1");
  kernels::ConvDims d{};
  d.n = input.shape()[0];
  d.c = input.shape()[1];
  d.h = input.shape()[2];
  d.w = input.shape()[3];
  d.f = kernel.shape()[0];
  d.kh = kernel.shape()[2];
  d.kw = kernel.shape()[3];
  d.stride = stride;
  d.pad = pad;
  if (kernel.shape()[1] != d.c) fail("conv2d channel mismatch");
  if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
    fail("conv2d kernel larger than padded input");
  d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
  Tensor y = Tensor::zeros({d.n, d.f, d.oh, d.ow});
  kernels::conv2d_fwd(input.data().data(), kernel.data().data(),
                      y.data().data(), d);
  if (record_wanted({&input, &kernel})) {
    y.set_requires_grad(true);
    auto xi = input.impl(), ki = kernel.impl(), yi = y.impl();
    GradTape::active()->record([xi, ki, yi, d] {
      const auto* g = out_grad(yi);
      if (!g) return;
      if (xi->requires_grad) {
        accumulate_ready(xi);
        kernels::conv2d_bwd_input(g->data(), ki->data.data(), xi->grad.data(),
                                  d);
      }
      if (ki->requires_grad) {
        accumulate_ready(ki);
        kernels::conv2d_bwd_kernel(g->data(), xi->data.data(), ki->grad.data(),
                                   d);
      }
    });
  }
  return y;
}

Tensor max_pool2(const Tensor& input) {
  if (input.rank() != 4) fail("max_pool2 expects [N,C,H,W]");
  const size_t n = input.shape()[0], c = input.shape()[1];
  const size_t h = input.shape()[2], w = input.shape()[3];
  if (h % 2 != 0 || w % 2 != 0) fail("max_pool2 requires even extents");
  Tensor y = Tensor::zeros({n, c, h / 2, w / 2});
  auto argmax = std::make_shared<std::vector<uint32_t>>(y.size());
  kernels::maxpool2_fwd(input.data().data(), y.data().data(), argmax->data(),
                        n, c, h, w);
  if (record_wanted({&input})) {
    y.set_requires_grad(true);
    auto xi = input.impl(), yi = y.impl();
    GradTape::active()->record([xi, yi, argmax, n, c, h, w] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(xi);
      kernels::maxpool2_bwd(g->data(), argmax->data(), xi->grad.data(), n, c,
                            h, w);
    });
  }
  return y;
}

namespace {

Tensor activation(kernels::Act kind, const Tensor& x, double slope) {
  Tensor y = Tensor::zeros(x.shape());
  kernels::act_fwd(kind, x.data().data(), y.data().data(), x.size(), slope);
  if (record_wanted({&x})) {
    y.set_requires_grad(true);
    auto xi = x.impl(), yi = y.impl();
    GradTape::active()->record([kind, xi, yi, slope] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(xi);
      kernels::act_bwd(kind, xi->data.data(), yi->data.data(), g->data(),
                       xi->grad.data(), g->size(), slope);
    });
  }
  return y;
}

}  // namespace

Tensor relu(const Tensor& x) { return activation(kernels::Act::relu, x, 0.0); }
Tensor leaky_relu(const Tensor& x) {
  return activation(kernels::Act::leaky_relu, x, 0.2);
}
Tensor tanh_act(const Tensor& x) {
  return activation(kernels::Act::tanh, x, 0.0);
}
Tensor sigmoid(const Tensor& x) {
  return activation(kernels::Act::sigmoid, x, 0.0);
}

Tensor embedding_mean(const Tensor& table, const std::vector<int32_t>& tokens,
                      const std::vector<size_t>& offsets) {
  if (table.rank() != 2) fail("embedding_mean expects a [V,E] table");
  if (offsets.size() < 2 || offsets.front() != 0 ||
      offsets.back() != tokens.size())
    fail("embedding_mean offsets must start at 0 and end at token count");
  const size_t vocab = table.shape()[0], embed = table.shape()[1];
  for (int32_t t : tokens)
    if (t < 0 || static_cast<size_t>(t) >= vocab)
      fail("embedding_mean token id out of range");
  const size_t docs = offsets.size() - 1;
  Tensor y = Tensor::zeros({docs, embed});
  kernels::embedding_mean_fwd(table.data().data(), embed, tokens.data(),
                              offsets.data(), docs, y.data().data());
  if (record_wanted({&table})) {
    y.set_requires_grad(true);
    auto ti = table.impl(), yi = y.impl();
    auto toks = std::make_shared<std::vector<int32_t>>(tokens);
    auto offs = std::make_shared<std::vector<size_t>>(offsets);
    GradTape::active()->record([ti, yi, toks, offs, embed, docs] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(ti);
      kernels::embedding_mean_bwd(g->data(), embed, toks->data(), offs->data(),
                                  docs, ti->grad.data());
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor y = Tensor::scalar(acc);
  if (record_wanted({&x})) {
    y.set_requires_grad(true);
    auto xi = x.impl(), yi = y.impl();
    GradTape::active()->record([xi, yi] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(xi);
      const double gv = (*g)[0];
      for (auto& v : xi->grad) v += gv;
    });
  }
  return y;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) fail("mse_loss shape mismatch");
  const size_t n = pred.size();
  auto pd = pred.data();
  auto td = target.data();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = pd[i] - td[i];
    acc += d * d;
  }
  Tensor y = Tensor::scalar(acc / static_cast<double>(n));
  if (record_wanted({&pred, &target})) {
    y.set_requires_grad(true);
    auto pi = pred.impl(), ti = target.impl(), yi = y.impl();
    GradTape::active()->record([pi, ti, yi, n] {
      const auto* g = out_grad(yi);
      if (!g) return;
      const double c = 2.0 * (*g)[0] / static_cast<double>(n);
      if (pi->requires_grad) {
        accumulate_ready(pi);
        for (size_t i = 0; i < n; ++i)
          pi->grad[i] += c * (pi->data[i] - ti->data[i]);
      }
      if (ti->requires_grad) {
        accumulate_ready(ti);
        for (size_t i = 0; i < n; ++i)
          ti->grad[i] -= c * (pi->data[i] - ti->data[i]);
      }
    });
  }
  return y;
}

Tensor cross_entropy_loss(const Tensor& logits,
                          const std::vector<int32_t>& labels) {
  if (logits.rank() != 2) fail("cross_entropy expects [N,K] logits");
  const size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) fail("cross_entropy label count mismatch");
  for (int32_t l : labels)
    if (l < 0 || static_cast<size_t>(l) >= k)
      throw std::out_of_range("cross_entropy label out of range");
  auto ld = logits.data();
  // Stable log-sum-exp and softmax, kept for the adjoint.
  auto softmax = std::make_shared<std::vector<double>>(n * k);
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double* row = ld.data() + i * k;
    double mx = row[0];
    for (size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    acc += lse - row[labels[i]];
    for (size_t j = 0; j < k; ++j)
      (*softmax)[i * k + j] = std::exp(row[j] - lse);
  }
  Tensor y = Tensor::scalar(acc / static_cast<double>(n));
  if (record_wanted({&logits})) {
    y.set_requires_grad(true);
    auto li = logits.impl(), yi = y.impl();
    auto labs = std::make_shared<std::vector<int32_t>>(labels);
    GradTape::active()->record([li, yi, softmax, labs, n, k] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(li);
      const double c = (*g)[0] / static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < k; ++j) {
          double v = (*softmax)[i * k + j];
          if (static_cast<size_t>((*labs)[i]) == j) v -= 1.0;
          li->grad[i * k + j] += c * v;
        }
      }
    });
  }
  return y;
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) fail("bce_loss shape mismatch");
  constexpr double kEps = 1e-7;
  const size_t n = pred.size();
  auto pd = pred.data();
  auto td = target.data();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pd[i], kEps, 1.0 - kEps);
    acc -= td[i] * std::log(p) + (1.0 - td[i]) * std::log(1.0 - p);
  }
  Tensor y = Tensor::scalar(acc / static_cast<double>(n));
  if (record_wanted({&pred})) {
    y.set_requires_grad(true);
    auto pi = pred.impl(), ti = target.impl(), yi = y.impl();
    GradTape::active()->record([pi, ti, yi, n] {
      const auto* g = out_grad(yi);
      if (!g) return;
      accumulate_ready(pi);
      const double c = (*g)[0] / static_cast<double>(n);
      for (size_t i = 0; i < n; ++i) {
        const double p = pi->data[i];
        if (p <= kEps || p >= 1.0 - kEps) continue;  // clamped region is flat
        pi->grad[i] += c * (p - ti->data[i]) / (p * (1.0 - p));
      }
    });
  }
  return y;
}

Tensor one_hot(const std::vector<int32_t>& labels, size_t k) {
  if (k == 0) fail("one_hot needs k >= 1");
  Tensor y = Tensor::zeros({labels.size(), k});
  auto yd = y.data();
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<size_t>(labels[i]) >= k)
      throw std::out_of_range("one_hot label out of range");
    yd[i * k + labels[i]] = 1.0;
  }
  return y;
}

}  // namespace mygo
