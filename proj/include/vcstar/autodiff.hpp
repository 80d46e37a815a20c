#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "vcstar/common.hpp"
#include "vcstar/tensor.hpp"

namespace vcstar::ad {

class graph;

// Lightweight handle into a graph's node list.
struct var {
  graph* g = nullptr;
  int idx = -1;
  bool valid() const { return g != nullptr && idx >= 0; }
};

// Reverse-mode tape. Nodes are appended in execution order, so iterating the
// node list backwards visits a valid reverse-topological order.
class graph {
 public:
  struct node {
    tensor value;
    tensor grad;  // lazily allocated zeros-like
    std::function<void(graph&)> backward;
    bool needs_grad = false;
  };

  var leaf(tensor value, bool requires_grad = true) {
    return push(std::move(value), requires_grad, {});
  }

  var constant(tensor value) { return push(std::move(value), false, {}); }

  const tensor& value(var v) const { return nodes_[std::size_t(v.idx)].value; }
  const tensor& value(int idx) const { return nodes_[std::size_t(idx)].value; }

  // Gradient of a node after backward(); zeros if it never received one.
  tensor grad(var v) const {
    const node& n = nodes_[std::size_t(v.idx)];
    if (n.grad.numel() == 0) return tensor::zeros(n.value.shape());
    return n.grad;
  }

  const tensor& grad_of(int idx) const { return nodes_[std::size_t(idx)].grad; }

  bool wants_grad(int idx) const { return nodes_[std::size_t(idx)].needs_grad; }
  bool wants_grad(var v) const { return wants_grad(v.idx); }

  tensor& ensure_grad(int idx) {
    node& n = nodes_[std::size_t(idx)];
    if (n.grad.numel() == 0) n.grad = tensor::zeros(n.value.shape());
    return n.grad;
  }

  // Seeds d(root)/d(root) = 1 and sweeps the tape. root must be scalar.
  void backward(var root) {
    if (value(root).numel() != 1)
      throw data_error("backward: root must be a scalar");
    ensure_grad(root.idx)[0] += 1.0;
    for (int i = root.idx; i >= 0; --i) {
      node& n = nodes_[std::size_t(i)];
      if (!n.needs_grad || n.grad.numel() == 0 || !n.backward) continue;
      n.backward(*this);
    }
  }

  var push(tensor value, bool needs, std::function<void(graph&)> backward) {
    nodes_.push_back(node{std::move(value), tensor{}, std::move(backward), needs});
    return var{this, static_cast<int>(nodes_.size()) - 1};
  }

  // Index the next push() will get; lets ops capture their own index.
  int next_index() const { return static_cast<int>(nodes_.size()); }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<node> nodes_;
};

namespace detail {

inline void check_same_shape(const tensor& a, const tensor& b, const char* op) {
  if (!a.same_shape(b)) throw data_error(std::string(op) + ": shape mismatch");
}

inline bool any_needs(std::initializer_list<var> vs) {
  for (var v : vs)
    if (v.g->wants_grad(v)) return true;
  return false;
}

}  // namespace detail

// ---- elementwise ----

inline var add(var a, var b) {
  graph& g = *a.g;
  detail::check_same_shape(g.value(a), g.value(b), "add");
  tensor out = g.value(a);
  const tensor& tb = g.value(b);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
  const bool needs = detail::any_needs({a, b});
  const int si = g.next_index(), pa = a.idx, pb = b.idx;
  return g.push(std::move(out), needs, [si, pa, pb](graph& gr) {
    const tensor& go = gr.grad_of(si);
    for (int p : {pa, pb}) {
      if (!gr.wants_grad(p)) continue;
      tensor& gp = gr.ensure_grad(p);
      for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i];
    }
  });
}

inline var sub(var a, var b) {
  graph& g = *a.g;
  detail::check_same_shape(g.value(a), g.value(b), "sub");
  tensor out = g.value(a);
  const tensor& tb = g.value(b);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
  const bool needs = detail::any_needs({a, b});
  const int si = g.next_index(), pa = a.idx, pb = b.idx;
  return g.push(std::move(out), needs, [si, pa, pb](graph& gr) {
    const tensor& go = gr.grad_of(si);
    if (gr.wants_grad(pa)) {
      tensor& gp = gr.ensure_grad(pa);
      for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i];
    }
    if (gr.wants_grad(pb)) {
      tensor& gp = gr.ensure_grad(pb);
      for (std::size_t i = 0; i < go.numel(); ++i) gp[i] -= go[i];
    }
  });
}

inline var mul(var a, var b) {
  graph& g = *a.g;
  detail::check_same_shape(g.value(a), g.value(b), "mul");
  tensor out = g.value(a);
  const tensor& tb = g.value(b);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
  const bool needs = detail::any_needs({a, b});
  const int si = g.next_index(), pa = a.idx, pb = b.idx;
  return g.push(std::move(out), needs, [si, pa, pb](graph& gr) {
    const tensor& go = gr.grad_of(si);
    const tensor& va = gr.value(pa);
    const tensor& vb = gr.value(pb);
    if (gr.wants_grad(pa)) {
      tensor& gp = gr.ensure_grad(pa);
      for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i] * vb[i];
    }
    if (gr.wants_grad(pb)) {
      tensor& gp = gr.ensure_grad(pb);
      for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i] * va[i];
    }
  });
}

inline var mul_scalar(var a, double k) {
  graph& g = *a.g;
  tensor out = g.value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= k;
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa, k](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i] * k;
  });
}

inline var add_scalar(var a, double k) {
  graph& g = *a.g;
  tensor out = g.value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += k;
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i];
  });
}

inline var abs_val(var a) {
  graph& g = *a.g;
  tensor out = g.value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    const tensor& va = gr.value(pa);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      const double s = va[i] > 0.0 ? 1.0 : (va[i] < 0.0 ? -1.0 : 0.0);
      gp[i] += go[i] * s;
    }
  });
}

inline var sigmoid(var a) {
  graph& g = *a.g;
  tensor out = g.value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    const tensor& s = gr.value(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < go.numel(); ++i)
      gp[i] += go[i] * s[i] * (1.0 - s[i]);
  });
}

// log(sigmoid(x)) computed stably; only used by the literal log-form
// adversarial values kept around for unit evaluation.
inline var log_sigmoid(var a) {
  graph& g = *a.g;
  tensor out = g.value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double x = out[i];
    out[i] = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    const tensor& v = gr.value(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < go.numel(); ++i)
      gp[i] += go[i] * (1.0 - std::exp(v[i]));
  });
}

// ---- reductions ----

inline var mean_all(var a) {
  graph& g = *a.g;
  const tensor& va = g.value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < va.numel(); ++i) acc += va[i];
  const double inv = 1.0 / static_cast<double>(va.numel());
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(tensor::scalar(acc * inv), needs, [si, pa, inv](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const double go = gr.grad_of(si)[0];
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += go * inv;
  });
}

inline var sum_all(var a) {
  graph& g = *a.g;
  const tensor& va = g.value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < va.numel(); ++i) acc += va[i];
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(tensor::scalar(acc), needs, [si, pa](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const double go = gr.grad_of(si)[0];
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += go;
  });
}

// ---- shape ----

inline var reshape(var a, std::vector<std::size_t> new_shape) {
  graph& g = *a.g;
  tensor out = g.value(a).reshaped(std::move(new_shape));
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t i = 0; i < go.numel(); ++i) gp[i] += go[i];
  });
}

// Cuts the tape: value flows, gradient does not.
inline var detach(var a) { return a.g->constant(a.g->value(a)); }

// Channel-axis ops on [B, C, H, W].

inline var concat_channels(var a, var b) {
  graph& g = *a.g;
  const tensor& va = g.value(a);
  const tensor& vb = g.value(b);
  if (va.rank() != 4 || vb.rank() != 4) throw data_error("concat_channels: rank != 4");
  const std::size_t B = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1), H = va.dim(2), W = va.dim(3);
  if (vb.dim(0) != B || vb.dim(2) != H || vb.dim(3) != W)
    throw data_error("concat_channels: shape mismatch");
  tensor out({B, Ca + Cb, H, W});
  const std::size_t plane = H * W;
  for (std::size_t bi = 0; bi < B; ++bi) {
    double* dst = out.data() + bi * (Ca + Cb) * plane;
    const double* sa = va.data() + bi * Ca * plane;
    const double* sb = vb.data() + bi * Cb * plane;
    std::copy(sa, sa + Ca * plane, dst);
    std::copy(sb, sb + Cb * plane, dst + Ca * plane);
  }
  const bool needs = detail::any_needs({a, b});
  const int si = g.next_index(), pa = a.idx, pb = b.idx;
  return g.push(std::move(out), needs, [si, pa, pb, B, Ca, Cb, plane](graph& gr) {
    const tensor& go = gr.grad_of(si);
    if (gr.wants_grad(pa)) {
      tensor& gp = gr.ensure_grad(pa);
      for (std::size_t bi = 0; bi < B; ++bi) {
        const double* src = go.data() + bi * (Ca + Cb) * plane;
        double* dst = gp.data() + bi * Ca * plane;
        for (std::size_t i = 0; i < Ca * plane; ++i) dst[i] += src[i];
      }
    }
    if (gr.wants_grad(pb)) {
      tensor& gp = gr.ensure_grad(pb);
      for (std::size_t bi = 0; bi < B; ++bi) {
        const double* src = go.data() + bi * (Ca + Cb) * plane + Ca * plane;
        double* dst = gp.data() + bi * Cb * plane;
        for (std::size_t i = 0; i < Cb * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

inline var slice_channels(var a, std::size_t c0, std::size_t c1) {
  graph& g = *a.g;
  const tensor& va = g.value(a);
  if (va.rank() != 4) throw data_error("slice_channels: rank != 4");
  const std::size_t B = va.dim(0), C = va.dim(1), H = va.dim(2), W = va.dim(3);
  if (c1 > C || c0 >= c1) throw data_error("slice_channels: bad range");
  const std::size_t Cs = c1 - c0, plane = H * W;
  tensor out({B, Cs, H, W});
  for (std::size_t bi = 0; bi < B; ++bi) {
    const double* src = va.data() + (bi * C + c0) * plane;
    double* dst = out.data() + bi * Cs * plane;
    std::copy(src, src + Cs * plane, dst);
  }
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa, B, C, c0, Cs, plane](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t bi = 0; bi < B; ++bi) {
      const double* src = go.data() + bi * Cs * plane;
      double* dst = gp.data() + (bi * C + c0) * plane;
      for (std::size_t i = 0; i < Cs * plane; ++i) dst[i] += src[i];
    }
  });
}

// Gated linear unit: first half of the channels gated by the second half.
inline var glu(var a) {
  const std::size_t C = a.g->value(a).dim(1);
  if (C % 2 != 0) throw data_error("glu: channel count must be even");
  var lin = slice_channels(a, 0, C / 2);
  var gate = slice_channels(a, C / 2, C);
  return mul(lin, sigmoid(gate));
}

// ---- padding / cropping on [B, C, H, W] ----

namespace detail {
// Mirror index for end-padding: k-th padded row reflects about the last row,
// excluding the edge itself (falls back to folding for tiny extents).
inline std::size_t reflect_index(std::size_t extent, std::size_t k) {
  if (extent == 1) return 0;
  long long r = static_cast<long long>(extent) - 2 - static_cast<long long>(k);
  while (r < 0 || r >= static_cast<long long>(extent)) {
    if (r < 0) r = -r;
    if (r >= static_cast<long long>(extent))
      r = 2 * (static_cast<long long>(extent) - 1) - r;
  }
  return static_cast<std::size_t>(r);
}
}  // namespace detail

// Reflect-pads rows (H axis) at the bottom.
inline var pad_rows_reflect(var a, std::size_t pad) {
  graph& g = *a.g;
  if (pad == 0) return a;
  const tensor& va = g.value(a);
  if (va.rank() != 4) throw data_error("pad_rows_reflect: rank != 4");
  const std::size_t B = va.dim(0), C = va.dim(1), H = va.dim(2), W = va.dim(3);
  std::vector<std::size_t> src_row(pad);
  for (std::size_t k = 0; k < pad; ++k) src_row[k] = detail::reflect_index(H, k);
  tensor out({B, C, H + pad, W});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* src = va.data() + bc * H * W;
    double* dst = out.data() + bc * (H + pad) * W;
    std::copy(src, src + H * W, dst);
    for (std::size_t k = 0; k < pad; ++k)
      std::copy(src + src_row[k] * W, src + (src_row[k] + 1) * W, dst + (H + k) * W);
  }
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa, B, C, H, W, pad, src_row](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const double* src = go.data() + bc * (H + pad) * W;
      double* dst = gp.data() + bc * H * W;
      for (std::size_t i = 0; i < H * W; ++i) dst[i] += src[i];
      for (std::size_t k = 0; k < pad; ++k)
        for (std::size_t w = 0; w < W; ++w)
          dst[src_row[k] * W + w] += src[(H + k) * W + w];
    }
  });
}

// Keeps the first H0 rows.
inline var crop_rows(var a, std::size_t H0) {
  graph& g = *a.g;
  const tensor& va = g.value(a);
  if (va.rank() != 4) throw data_error("crop_rows: rank != 4");
  const std::size_t B = va.dim(0), C = va.dim(1), H = va.dim(2), W = va.dim(3);
  if (H0 > H) throw data_error("crop_rows: H0 > H");
  if (H0 == H) return a;
  tensor out({B, C, H0, W});
  for (std::size_t bc = 0; bc < B * C; ++bc)
    std::copy(va.data() + bc * H * W, va.data() + bc * H * W + H0 * W,
              out.data() + bc * H0 * W);
  const bool needs = g.wants_grad(a);
  const int si = g.next_index(), pa = a.idx;
  return g.push(std::move(out), needs, [si, pa, B, C, H, W, H0](graph& gr) {
    if (!gr.wants_grad(pa)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(pa);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const double* src = go.data() + bc * H0 * W;
      double* dst = gp.data() + bc * H * W;
      for (std::size_t i = 0; i < H0 * W; ++i) dst[i] += src[i];
    }
  });
}

}  // namespace vcstar::ad
