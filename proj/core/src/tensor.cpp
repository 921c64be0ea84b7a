#include "physlaw/numkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "physlaw/common.hpp"
#include "physlaw/numkit/threading.hpp"

namespace physlaw::numkit {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d < 0) throw DataError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

namespace {

using std::int64_t;

template <class T>
std::shared_ptr<TensorNode<T>> new_node(Shape shape) {
  auto node = std::make_shared<TensorNode<T>>();
  int64_t n = shape_numel(shape);
  node->shape = std::move(shape);
  node->value.assign(size_t(n), T(0));
  return node;
}

template <class T>
bool any_requires(const std::vector<TensorT<T>>& parents) {
  for (const auto& p : parents)
    if (p.requires_grad()) return true;
  return false;
}

// Attaches tape bookkeeping to `node` when some parent needs gradients.
template <class T>
void record(std::shared_ptr<TensorNode<T>>& node, std::vector<TensorT<T>> parents,
            std::function<void(TensorNode<T>&)> backward) {
  if (!any_requires(parents)) return;
  node->requires_grad = true;
  node->parents = std::move(parents);
  node->backward_fn = std::move(backward);
}

template <class T>
void check_same_shape(const char* op, const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape())
    throw DataError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                    shape_str(b.shape()));
}

template <class T>
std::span<T> grad_acc(TensorT<T>& t) {
  t.node().ensure_grad();
  return t.node().grad;
}

// C (M,N) += A (M,K) . B (K,N), row-major. Each output row is written by a
// single worker, so results are identical at any thread count.
template <class T>
void gemm_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  if (m > 1 && m * k * n >= (1 << 18)) {
    parallel_for(m, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
          T av = arow[kk];
          const T* brow = b + kk * n;
          for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
    });
    return;
  }
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      T av = arow[kk];
      const T* brow = b + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void transpose_copy(const T* src, T* dst, int64_t rows, int64_t cols) {
  constexpr int64_t kBlock = 32;
  for (int64_t i0 = 0; i0 < rows; i0 += kBlock)
    for (int64_t j0 = 0; j0 < cols; j0 += kBlock) {
      int64_t i1 = std::min(rows, i0 + kBlock);
      int64_t j1 = std::min(cols, j0 + kBlock);
      for (int64_t i = i0; i < i1; ++i)
        for (int64_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
    }
}

}  // namespace

// ----- TensorT ---------------------------------------------------------

template <class T>
TensorT<T> TensorT<T>::zeros(Shape shape, bool requires_grad) {
  auto node = new_node<T>(std::move(shape));
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

template <class T>
TensorT<T> TensorT<T>::full(Shape shape, T fill, bool requires_grad) {
  auto node = new_node<T>(std::move(shape));
  std::fill(node->value.begin(), node->value.end(), fill);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

template <class T>
TensorT<T> TensorT<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  int64_t n = shape_numel(shape);
  if (int64_t(data.size()) != n)
    throw DataError("from_data: " + std::to_string(data.size()) + " values for shape " +
                    shape_str(shape));
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

template <class T>
void TensorT<T>::set_requires_grad(bool on) {
  if (on && node().backward_fn)
    throw DataError("set_requires_grad: only leaf tensors may be toggled");
  node().requires_grad = on;
}

template <class T>
std::span<const T> TensorT<T>::grad() const {
  return node().grad;
}

template <class T>
std::span<T> TensorT<T>::grad_mut() {
  node().ensure_grad();
  return node().grad;
}

template <class T>
void TensorT<T>::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), T(0));
}

template <class T>
void TensorT<T>::backward() {
  if (!defined()) throw NumericError("backward: undefined tensor");
  if (numel() != 1)
    throw NumericError("backward: output must be scalar, got shape " + shape_str(shape()));
  if (!node().requires_grad) return;

  // Post-order DFS over the requires-grad subgraph.
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<TensorNode<T>*, size_t>> stack;
  stack.emplace_back(raw(), 0);
  seen.insert(raw());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      TensorNode<T>* p = n->parents[idx].raw();
      ++idx;
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior grads are scratch for this sweep; leaf grads persist so that
  // repeated sweeps accumulate.
  for (auto* n : order)
    if (n->backward_fn) {
      n->ensure_grad();
      std::fill(n->grad.begin(), n->grad.end(), T(0));
    }
  node().ensure_grad();
  node().grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ----- elementwise ------------------------------------------------------

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("add", a, b);
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) out[i] = pa[i] + pb[i];
  record<T>(node, {a, b}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    int64_t n = self.numel();
    for (int pi = 0; pi < 2; ++pi) {
      auto& p = self.parents[size_t(pi)];
      if (!p.requires_grad()) continue;
      T* pg = grad_acc(p).data();
      for (int64_t i = 0; i < n; ++i) pg[i] += g[i];
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("sub", a, b);
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) out[i] = pa[i] - pb[i];
  record<T>(node, {a, b}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    int64_t n = self.numel();
    if (self.parents[0].requires_grad()) {
      T* pg = grad_acc(self.parents[0]).data();
      for (int64_t i = 0; i < n; ++i) pg[i] += g[i];
    }
    if (self.parents[1].requires_grad()) {
      T* pg = grad_acc(self.parents[1]).data();
      for (int64_t i = 0; i < n; ++i) pg[i] -= g[i];
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("mul", a, b);
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) out[i] = pa[i] * pb[i];
  record<T>(node, {a, b}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    int64_t n = self.numel();
    const T* va = self.parents[0].value().data();
    const T* vb = self.parents[1].value().data();
    if (self.parents[0].requires_grad()) {
      T* pg = grad_acc(self.parents[0]).data();
      for (int64_t i = 0; i < n; ++i) pg[i] += g[i] * vb[i];
    }
    if (self.parents[1].requires_grad()) {
      T* pg = grad_acc(self.parents[1]).data();
      for (int64_t i = 0; i < n; ++i) pg[i] += g[i] * va[i];
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) out[i] = pa[i] * s;
  record<T>(node, {a}, [s](TensorNode<T>& self) {
    const T* g = self.grad.data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t i = 0; i < self.numel(); ++i) pg[i] += g[i] * s;
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) out[i] = pa[i] + s;
  record<T>(node, {a}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t i = 0; i < self.numel(); ++i) pg[i] += g[i];
  });
  return TensorT<T>::wrap(std::move(node));
}

// ----- row-vector broadcasts ---------------------------------------------

namespace {
template <class T>
void check_rowvec(const char* op, const TensorT<T>& m, const TensorT<T>& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0))
    throw DataError(std::string(op) + ": want (R,C) and (C), got " + shape_str(m.shape()) +
                    " and " + shape_str(v.shape()));
}
}  // namespace

template <class T>
TensorT<T> add_rowvec(const TensorT<T>& m, const TensorT<T>& v) {
  check_rowvec("add_rowvec", m, v);
  int64_t rows = m.dim(0), cols = m.dim(1);
  auto node = new_node<T>(m.shape());
  const T* pm = m.value().data();
  const T* pv = v.value().data();
  T* out = node->value.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out[r * cols + c] = pm[r * cols + c] + pv[c];
  record<T>(node, {m, v}, [rows, cols](TensorNode<T>& self) {
    const T* g = self.grad.data();
    if (self.parents[0].requires_grad()) {
      T* pg = grad_acc(self.parents[0]).data();
      for (int64_t i = 0; i < rows * cols; ++i) pg[i] += g[i];
    }
    if (self.parents[1].requires_grad()) {
      T* pg = grad_acc(self.parents[1]).data();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) pg[c] += g[r * cols + c];
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> mul_rowvec(const TensorT<T>& m, const TensorT<T>& v) {
  check_rowvec("mul_rowvec", m, v);
  int64_t rows = m.dim(0), cols = m.dim(1);
  auto node = new_node<T>(m.shape());
  const T* pm = m.value().data();
  const T* pv = v.value().data();
  T* out = node->value.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out[r * cols + c] = pm[r * cols + c] * pv[c];
  record<T>(node, {m, v}, [rows, cols](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* pm = self.parents[0].value().data();
    const T* pv = self.parents[1].value().data();
    if (self.parents[0].requires_grad()) {
      T* pg = grad_acc(self.parents[0]).data();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) pg[r * cols + c] += g[r * cols + c] * pv[c];
    }
    if (self.parents[1].requires_grad()) {
      T* pg = grad_acc(self.parents[1]).data();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) pg[c] += g[r * cols + c] * pm[r * cols + c];
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

// ----- matrix products ----------------------------------------------------

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DataError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                    shape_str(b.shape()));
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto node = new_node<T>({m, n});
  gemm_acc(a.value().data(), b.value().data(), node->value.data(), m, k, n);
  record<T>(node, {a, b}, [m, k, n](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* va = self.parents[0].value().data();
    const T* vb = self.parents[1].value().data();
    if (self.parents[0].requires_grad()) {
      // dA += dC . B^T
      std::vector<T> bt(size_t(k * n));
      transpose_copy(vb, bt.data(), k, n);
      gemm_acc(g, bt.data(), grad_acc(self.parents[0]).data(), m, n, k);
    }
    if (self.parents[1].requires_grad()) {
      // dB += A^T . dC
      std::vector<T> at(size_t(m * k));
      transpose_copy(va, at.data(), m, k);
      gemm_acc(at.data(), g, grad_acc(self.parents[1]).data(), k, m, n);
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> bmm(const TensorT<T>& a, const TensorT<T>& b, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0))
    throw DataError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " +
                    shape_str(b.shape()));
  int64_t batches = a.dim(0), m = a.dim(1), k = a.dim(2);
  int64_t n = trans_b ? b.dim(1) : b.dim(2);
  int64_t bk = trans_b ? b.dim(2) : b.dim(1);
  if (bk != k)
    throw DataError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " +
                    shape_str(b.shape()) + (trans_b ? " (trans_b)" : ""));
  auto node = new_node<T>({batches, m, n});
  {
    std::vector<T> scratch(trans_b ? size_t(k * n) : 0);
    for (int64_t q = 0; q < batches; ++q) {
      const T* pa = a.value().data() + q * m * k;
      const T* pb = b.value().data() + q * n * k;  // (n,k) when trans_b, else (k,n)
      T* pc = node->value.data() + q * m * n;
      if (trans_b) {
        transpose_copy(pb, scratch.data(), n, k);
        gemm_acc(pa, scratch.data(), pc, m, k, n);
      } else {
        gemm_acc(pa, pb, pc, m, k, n);
      }
    }
  }
  record<T>(node, {a, b}, [batches, m, k, n, trans_b](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* va = self.parents[0].value().data();
    const T* vb = self.parents[1].value().data();
    bool need_a = self.parents[0].requires_grad();
    bool need_b = self.parents[1].requires_grad();
    T* ga = need_a ? grad_acc(self.parents[0]).data() : nullptr;
    T* gb = need_b ? grad_acc(self.parents[1]).data() : nullptr;
    std::vector<T> scratch(size_t(std::max(m * n, std::max(k * n, m * k))));
    for (int64_t q = 0; q < batches; ++q) {
      const T* gq = g + q * m * n;
      const T* aq = va + q * m * k;
      const T* bq = vb + q * n * k;
      if (trans_b) {
        // C = A . B^T with B (n,k): dA += dC . B, dB += dC^T . A
        if (need_a) gemm_acc(gq, bq, ga + q * m * k, m, n, k);
        if (need_b) {
          transpose_copy(gq, scratch.data(), m, n);
          gemm_acc(scratch.data(), aq, gb + q * n * k, n, m, k);
        }
      } else {
        // C = A . B with B (k,n): dA += dC . B^T, dB += A^T . dC
        if (need_a) {
          transpose_copy(bq, scratch.data(), k, n);
          gemm_acc(gq, scratch.data(), ga + q * m * k, m, n, k);
        }
        if (need_b) {
          transpose_copy(aq, scratch.data(), m, k);
          gemm_acc(scratch.data(), gq, gb + q * k * n, k, m, n);
        }
      }
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

// ----- data movement --------------------------------------------------------

template <class T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DataError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                    " changes element count");
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->value.assign(a.value().begin(), a.value().end());
  record<T>(node, {a}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t i = 0; i < self.numel(); ++i) pg[i] += g[i];
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> transpose2d(const TensorT<T>& a) {
  if (a.rank() != 2) throw DataError("transpose2d: want rank 2, got " + shape_str(a.shape()));
  int64_t r = a.dim(0), c = a.dim(1);
  auto node = new_node<T>({c, r});
  transpose_copy(a.value().data(), node->value.data(), r, c);
  record<T>(node, {a}, [r, c](TensorNode<T>& self) {
    // self is (c,r); transpose grad back to (r,c)
    std::vector<T> tmp(size_t(r * c));
    transpose_copy(self.grad.data(), tmp.data(), c, r);
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t i = 0; i < r * c; ++i) pg[i] += tmp[i];
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> gather(const TensorT<T>& a, std::shared_ptr<const std::vector<std::int64_t>> index,
                  Shape out_shape) {
  int64_t n = shape_numel(out_shape);
  if (!index || int64_t(index->size()) != n)
    throw DataError("gather: index size " + std::to_string(index ? index->size() : 0) +
                    " does not match output shape " + shape_str(out_shape));
  int64_t src_n = a.numel();
  for (int64_t i : *index)
    if (i < 0 || i >= src_n)
      throw DataError("gather: index " + std::to_string(i) + " out of range for " +
                      std::to_string(src_n) + " elements");
  auto node = new_node<T>(std::move(out_shape));
  const T* pa = a.value().data();
  T* out = node->value.data();
  const int64_t* idx = index->data();
  for (int64_t i = 0; i < n; ++i) out[i] = pa[idx[i]];
  record<T>(node, {a}, [index](TensorNode<T>& self) {
    const T* g = self.grad.data();
    T* pg = grad_acc(self.parents[0]).data();
    const int64_t* idx = index->data();
    for (int64_t i = 0; i < self.numel(); ++i) pg[idx[i]] += g[i];
  });
  return TensorT<T>::wrap(std::move(node));
}

// ----- row-wise nonlinearities ---------------------------------------------

template <class T>
TensorT<T> softmax_lastdim(const TensorT<T>& a) {
  if (a.rank() < 1) throw DataError("softmax_lastdim: want rank >= 1");
  int64_t cols = a.dim(a.rank() - 1);
  int64_t rows = a.numel() / cols;
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  T* out = node->value.data();
  parallel_for(rows, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const T* x = pa + r * cols;
      T* y = out + r * cols;
      T mx = x[0];
      for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
      T denom = T(0);
      for (int64_t c = 0; c < cols; ++c) {
        y[c] = std::exp(x[c] - mx);
        denom += y[c];
      }
      T inv = T(1) / denom;
      for (int64_t c = 0; c < cols; ++c) y[c] *= inv;
    }
  });
  record<T>(node, {a}, [rows, cols](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* y = self.value.data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* gr = g + r * cols;
      const T* yr = y + r * cols;
      T dot = T(0);
      for (int64_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
      T* pgr = pg + r * cols;
      for (int64_t c = 0; c < cols; ++c) pgr[c] += yr[c] * (gr[c] - dot);
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> layer_norm_lastdim(const TensorT<T>& a, T eps) {
  if (a.rank() < 1) throw DataError("layer_norm_lastdim: want rank >= 1");
  int64_t cols = a.dim(a.rank() - 1);
  int64_t rows = a.numel() / cols;
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  T* out = node->value.data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = pa + r * cols;
    T* y = out + r * cols;
    T mu = T(0);
    for (int64_t c = 0; c < cols; ++c) mu += x[c];
    mu /= T(cols);
    T var = T(0);
    for (int64_t c = 0; c < cols; ++c) {
      T d = x[c] - mu;
      var += d * d;
    }
    var /= T(cols);
    T inv = T(1) / std::sqrt(var + eps);
    for (int64_t c = 0; c < cols; ++c) y[c] = (x[c] - mu) * inv;
  }
  record<T>(node, {a}, [rows, cols, eps](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* xhat = self.value.data();
    const T* x = self.parents[0].value().data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* xr = x + r * cols;
      T mu = T(0);
      for (int64_t c = 0; c < cols; ++c) mu += xr[c];
      mu /= T(cols);
      T var = T(0);
      for (int64_t c = 0; c < cols; ++c) {
        T d = xr[c] - mu;
        var += d * d;
      }
      var /= T(cols);
      T inv = T(1) / std::sqrt(var + eps);
      const T* gr = g + r * cols;
      const T* hr = xhat + r * cols;
      T gmean = T(0), ghmean = T(0);
      for (int64_t c = 0; c < cols; ++c) {
        gmean += gr[c];
        ghmean += gr[c] * hr[c];
      }
      gmean /= T(cols);
      ghmean /= T(cols);
      T* pgr = pg + r * cols;
      for (int64_t c = 0; c < cols; ++c) pgr[c] += inv * (gr[c] - gmean - hr[c] * ghmean);
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> silu(const TensorT<T>& a) {
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) {
    T s = T(1) / (T(1) + std::exp(-pa[i]));
    out[i] = pa[i] * s;
  }
  record<T>(node, {a}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* x = self.parents[0].value().data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t i = 0; i < self.numel(); ++i) {
      T s = T(1) / (T(1) + std::exp(-x[i]));
      pg[i] += g[i] * s * (T(1) + x[i] * (T(1) - s));
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> gelu_tanh(const TensorT<T>& a) {
  constexpr T c0 = T(0.7978845608028653558798921198687637369517);  // sqrt(2/pi)
  constexpr T c1 = T(0.044715);
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  T* out = node->value.data();
  for (int64_t i = 0; i < node->numel(); ++i) {
    T x = pa[i];
    T t = std::tanh(c0 * (x + c1 * x * x * x));
    out[i] = T(0.5) * x * (T(1) + t);
  }
  record<T>(node, {a}, [](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* px = self.parents[0].value().data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t i = 0; i < self.numel(); ++i) {
      T x = px[i];
      T t = std::tanh(c0 * (x + c1 * x * x * x));
      T du = c0 * (T(1) + T(3) * c1 * x * x);
      pg[i] += g[i] * (T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du);
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> rope_rotate(const TensorT<T>& a, std::shared_ptr<const std::vector<T>> cos_tab,
                       std::shared_ptr<const std::vector<T>> sin_tab) {
  int64_t n = a.numel();
  if (n % 2 != 0) throw DataError("rope_rotate: element count must be even");
  int64_t pairs = n / 2;
  if (!cos_tab || !sin_tab || int64_t(cos_tab->size()) != pairs ||
      int64_t(sin_tab->size()) != pairs)
    throw DataError("rope_rotate: tables must hold one entry per element pair");
  auto node = new_node<T>(a.shape());
  const T* pa = a.value().data();
  const T* ct = cos_tab->data();
  const T* st = sin_tab->data();
  T* out = node->value.data();
  for (int64_t p = 0; p < pairs; ++p) {
    T x = pa[2 * p], y = pa[2 * p + 1];
    out[2 * p] = x * ct[p] - y * st[p];
    out[2 * p + 1] = x * st[p] + y * ct[p];
  }
  record<T>(node, {a}, [cos_tab, sin_tab, pairs](TensorNode<T>& self) {
    const T* g = self.grad.data();
    const T* ct = cos_tab->data();
    const T* st = sin_tab->data();
    T* pg = grad_acc(self.parents[0]).data();
    for (int64_t p = 0; p < pairs; ++p) {
      T gx = g[2 * p], gy = g[2 * p + 1];
      pg[2 * p] += gx * ct[p] + gy * st[p];
      pg[2 * p + 1] += -gx * st[p] + gy * ct[p];
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

// ----- reductions -----------------------------------------------------------

template <class T>
TensorT<T> sum(const TensorT<T>& a) {
  auto node = new_node<T>(Shape{});
  node->value.assign(1, T(0));
  const T* pa = a.value().data();
  T acc = T(0);
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  node->value[0] = acc;
  record<T>(node, {a}, [](TensorNode<T>& self) {
    T g = self.grad[0];
    T* pg = grad_acc(self.parents[0]).data();
    int64_t n = self.parents[0].numel();
    for (int64_t i = 0; i < n; ++i) pg[i] += g;
  });
  return TensorT<T>::wrap(std::move(node));
}

template <class T>
TensorT<T> mean(const TensorT<T>& a) {
  if (a.numel() == 0) throw DataError("mean: empty tensor");
  TensorT<T> s = sum(a);
  return scale(s, T(1) / T(a.numel()));
}

template <class T>
TensorT<T> mse(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("mse", a, b);
  if (a.numel() == 0) throw DataError("mse: empty tensor");
  auto node = new_node<T>(Shape{});
  node->value.assign(1, T(0));
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  int64_t n = a.numel();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    T d = pa[i] - pb[i];
    acc += d * d;
  }
  node->value[0] = acc / T(n);
  record<T>(node, {a, b}, [n](TensorNode<T>& self) {
    T g = self.grad[0] * T(2) / T(n);
    const T* pa = self.parents[0].value().data();
    const T* pb = self.parents[1].value().data();
    if (self.parents[0].requires_grad()) {
      T* pg = grad_acc(self.parents[0]).data();
      for (int64_t i = 0; i < n; ++i) pg[i] += g * (pa[i] - pb[i]);
    }
    if (self.parents[1].requires_grad()) {
      T* pg = grad_acc(self.parents[1]).data();
      for (int64_t i = 0; i < n; ++i) pg[i] -= g * (pa[i] - pb[i]);
    }
  });
  return TensorT<T>::wrap(std::move(node));
}

// ----- instantiations --------------------------------------------------------

template class TensorT<float>;
template class TensorT<double>;

#define PHYSLAW_INSTANTIATE_OPS(T)                                                       \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> scale<T>(const TensorT<T>&, T);                                    \
  template TensorT<T> add_scalar<T>(const TensorT<T>&, T);                               \
  template TensorT<T> add_rowvec<T>(const TensorT<T>&, const TensorT<T>&);               \
  template TensorT<T> mul_rowvec<T>(const TensorT<T>&, const TensorT<T>&);               \
  template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&);                   \
  template TensorT<T> bmm<T>(const TensorT<T>&, const TensorT<T>&, bool);                \
  template TensorT<T> reshape<T>(const TensorT<T>&, Shape);                              \
  template TensorT<T> transpose2d<T>(const TensorT<T>&);                                 \
  template TensorT<T> gather<T>(const TensorT<T>&,                                       \
                                std::shared_ptr<const std::vector<std::int64_t>>, Shape); \
  template TensorT<T> softmax_lastdim<T>(const TensorT<T>&);                             \
  template TensorT<T> layer_norm_lastdim<T>(const TensorT<T>&, T);                       \
  template TensorT<T> silu<T>(const TensorT<T>&);                                        \
  template TensorT<T> gelu_tanh<T>(const TensorT<T>&);                                   \
  template TensorT<T> rope_rotate<T>(const TensorT<T>&,                                  \
                                     std::shared_ptr<const std::vector<T>>,              \
                                     std::shared_ptr<const std::vector<T>>);             \
  template TensorT<T> sum<T>(const TensorT<T>&);                                         \
  template TensorT<T> mean<T>(const TensorT<T>&);                                        \
  template TensorT<T> mse<T>(const TensorT<T>&, const TensorT<T>&);

PHYSLAW_INSTANTIATE_OPS(float)
PHYSLAW_INSTANTIATE_OPS(double)

#undef PHYSLAW_INSTANTIATE_OPS

}  // namespace physlaw::numkit
