#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace physlaw::numkit {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

template <class T>
class TensorT;

// One autograd node. Value and gradient are dense row-major buffers. The
// backward closure reads this node's grad and accumulates into the parents'
// grads; parents are held by handle, which keeps the tape alive for as long
// as any downstream tensor exists.
template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first use, same numel as value
  bool requires_grad = false;
  std::vector<TensorT<T>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;

  std::int64_t numel() const { return std::int64_t(value.size()); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Value-semantics handle to a shared node. Copies alias the same storage.
// Leaf tensors (parameters, inputs) may be mutated in place through
// value_mut(); mutating an interior node of a live tape invalidates any
// backward() through it.
template <class T>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape shape, bool requires_grad = false);
  static TensorT full(Shape shape, T fill, bool requires_grad = false);
  static TensorT from_data(Shape shape, std::vector<T> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  int rank() const { return int(node().shape.size()); }
  std::int64_t dim(int i) const { return node().shape[size_t(i)]; }
  std::int64_t numel() const { return node().numel(); }

  std::span<const T> value() const { return node().value; }
  std::span<T> value_mut() { return node().value; }

  bool requires_grad() const { return node().requires_grad; }
  // Valid on leaves only (nodes without parents).
  void set_requires_grad(bool on);

  bool has_grad() const { return !node().grad.empty(); }
  std::span<const T> grad() const;
  std::span<T> grad_mut();
  void zero_grad();

  // Reverse-mode sweep from a scalar. Repeated calls accumulate into the
  // leaves' grads unless zero_grad() is called in between.
  void backward();

  TensorNode<T>& node() { return *node_; }
  const TensorNode<T>& node() const { return *node_; }
  TensorNode<T>* raw() const { return node_.get(); }

  static TensorT wrap(std::shared_ptr<TensorNode<T>> node) {
    TensorT t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

// ----- op set -------------------------------------------------------------
// Closed set sized to the denoiser: elementwise arithmetic, row-vector
// broadcasts, (batched) matmul, data movement, softmax/layer-norm over the
// last axis, SiLU / tanh-GELU, paired-rotation, and scalar reductions.
// Every op records a backward closure when any input requires grad.

template <class T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> scale(const TensorT<T>& a, T s);
template <class T> TensorT<T> add_scalar(const TensorT<T>& a, T s);

// m: (R, C), v: (C). Broadcast over rows.
template <class T> TensorT<T> add_rowvec(const TensorT<T>& m, const TensorT<T>& v);
template <class T> TensorT<T> mul_rowvec(const TensorT<T>& m, const TensorT<T>& v);

// 2-D matrix product (M, K) x (K, N) -> (M, N).
template <class T> TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);
// Batched product (B, M, K) x (B, K, N) -> (B, M, N); with trans_b,
// b is (B, N, K) and is used transposed.
template <class T>
TensorT<T> bmm(const TensorT<T>& a, const TensorT<T>& b, bool trans_b = false);

template <class T> TensorT<T> reshape(const TensorT<T>& a, Shape shape);
template <class T> TensorT<T> transpose2d(const TensorT<T>& a);
// out.flat[i] = a.flat[index[i]]; backward scatter-adds. Covers head
// split/merge, patchify/unpatchify and any static reindexing.
template <class T>
TensorT<T> gather(const TensorT<T>& a, std::shared_ptr<const std::vector<std::int64_t>> index,
                  Shape out_shape);

template <class T> TensorT<T> softmax_lastdim(const TensorT<T>& a);
template <class T> TensorT<T> layer_norm_lastdim(const TensorT<T>& a, T eps = T(1e-5));
template <class T> TensorT<T> silu(const TensorT<T>& a);
template <class T> TensorT<T> gelu_tanh(const TensorT<T>& a);

// Rotates consecutive element pairs: out[2i] = x c - y s, out[2i+1] = x s + y c
// with (x, y) = (a[2i], a[2i+1]). Tables hold cos/sin per pair (numel/2).
template <class T>
TensorT<T> rope_rotate(const TensorT<T>& a, std::shared_ptr<const std::vector<T>> cos_tab,
                       std::shared_ptr<const std::vector<T>> sin_tab);

template <class T> TensorT<T> sum(const TensorT<T>& a);
template <class T> TensorT<T> mean(const TensorT<T>& a);
template <class T> TensorT<T> mse(const TensorT<T>& a, const TensorT<T>& b);

extern template class TensorT<float>;
extern template class TensorT<double>;

}  // namespace physlaw::numkit
