#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "vcstar/autodiff.hpp"

namespace vcstar::ad {

namespace detail {

using row_major_map =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using const_row_major_map =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using col_major_map = Eigen::Map<Eigen::MatrixXd>;
using const_col_major_map = Eigen::Map<const Eigen::MatrixXd>;

struct conv_geom {
  std::size_t Cin, Cout, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo, R, P;
};

inline conv_geom make_conv_geom(const tensor& x, const tensor& w,
                                std::size_t sh, std::size_t sw,
                                std::size_t ph, std::size_t pw) {
  if (x.rank() != 4 || w.rank() != 4) throw data_error("conv2d: rank != 4");
  conv_geom g;
  g.Cin = x.dim(1);
  g.H = x.dim(2);
  g.W = x.dim(3);
  g.Cout = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  if (w.dim(1) != g.Cin) throw data_error("conv2d: input channel mismatch");
  g.sh = sh;
  g.sw = sw;
  g.ph = ph;
  g.pw = pw;
  if (g.H + 2 * ph < g.kh || g.W + 2 * pw < g.kw)
    throw data_error("conv2d: kernel larger than padded input");
  g.Ho = (g.H + 2 * ph - g.kh) / sh + 1;
  g.Wo = (g.W + 2 * pw - g.kw) / sw + 1;
  g.R = g.Cin * g.kh * g.kw;
  g.P = g.Ho * g.Wo;
  return g;
}

// Column-major patch matrix [R x P]; one column per output pixel.
inline void im2col(const double* x, const conv_geom& g, double* K) {
  for (std::size_t oh = 0; oh < g.Ho; ++oh) {
    for (std::size_t ow = 0; ow < g.Wo; ++ow) {
      double* col = K + (oh * g.Wo + ow) * g.R;
      const long ih0 = static_cast<long>(oh * g.sh) - static_cast<long>(g.ph);
      const long iw0 = static_cast<long>(ow * g.sw) - static_cast<long>(g.pw);
      std::size_t r = 0;
      for (std::size_t c = 0; c < g.Cin; ++c) {
        const double* plane = x + c * g.H * g.W;
        for (std::size_t dy = 0; dy < g.kh; ++dy) {
          const long ih = ih0 + static_cast<long>(dy);
          if (ih < 0 || ih >= static_cast<long>(g.H)) {
            for (std::size_t dx = 0; dx < g.kw; ++dx) col[r++] = 0.0;
            continue;
          }
          const double* row = plane + static_cast<std::size_t>(ih) * g.W;
          for (std::size_t dx = 0; dx < g.kw; ++dx) {
            const long iw = iw0 + static_cast<long>(dx);
            col[r++] = (iw < 0 || iw >= static_cast<long>(g.W))
                           ? 0.0
                           : row[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

// Scatter-add of a patch-gradient matrix back onto the input gradient.
inline void col2im_add(const double* K, const conv_geom& g, double* dx) {
  for (std::size_t oh = 0; oh < g.Ho; ++oh) {
    for (std::size_t ow = 0; ow < g.Wo; ++ow) {
      const double* col = K + (oh * g.Wo + ow) * g.R;
      const long ih0 = static_cast<long>(oh * g.sh) - static_cast<long>(g.ph);
      const long iw0 = static_cast<long>(ow * g.sw) - static_cast<long>(g.pw);
      std::size_t r = 0;
      for (std::size_t c = 0; c < g.Cin; ++c) {
        double* plane = dx + c * g.H * g.W;
        for (std::size_t dy = 0; dy < g.kh; ++dy) {
          const long ih = ih0 + static_cast<long>(dy);
          if (ih < 0 || ih >= static_cast<long>(g.H)) {
            r += g.kw;
            continue;
          }
          double* row = plane + static_cast<std::size_t>(ih) * g.W;
          for (std::size_t dx_ = 0; dx_ < g.kw; ++dx_) {
            const long iw = iw0 + static_cast<long>(dx_);
            if (iw >= 0 && iw < static_cast<long>(g.W))
              row[static_cast<std::size_t>(iw)] += col[r];
            ++r;
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2D convolution with zero padding. x: [B, Cin, H, W], w: [Cout, Cin, kh, kw],
// b: [Cout]. 1D convolutions are expressed as H == 1, kh == 1.
inline var conv2d(var x, var w, var b, std::size_t sh, std::size_t sw,
                  std::size_t ph, std::size_t pw) {
  graph& g = *x.g;
  const tensor& vx = g.value(x);
  const tensor& vw = g.value(w);
  const tensor& vb = g.value(b);
  const auto geom = detail::make_conv_geom(vx, vw, sh, sw, ph, pw);
  if (vb.numel() != geom.Cout) throw data_error("conv2d: bias size mismatch");
  const std::size_t B = vx.dim(0);

  tensor out({B, geom.Cout, geom.Ho, geom.Wo});
  std::vector<double> K(geom.R * geom.P);
  detail::const_row_major_map Wm(vw.data(), static_cast<long>(geom.Cout),
                                 static_cast<long>(geom.R));
  for (std::size_t bi = 0; bi < B; ++bi) {
    detail::im2col(vx.data() + bi * geom.Cin * geom.H * geom.W, geom, K.data());
    detail::const_col_major_map Km(K.data(), static_cast<long>(geom.R),
                                   static_cast<long>(geom.P));
    detail::row_major_map Ym(out.data() + bi * geom.Cout * geom.P,
                             static_cast<long>(geom.Cout), static_cast<long>(geom.P));
    Ym.noalias() = Wm * Km;
    for (std::size_t c = 0; c < geom.Cout; ++c) {
      double* row = out.data() + (bi * geom.Cout + c) * geom.P;
      const double bias = vb[c];
      for (std::size_t p = 0; p < geom.P; ++p) row[p] += bias;
    }
  }

  const bool needs = detail::any_needs({x, w, b});
  const int si = g.next_index(), px = x.idx, pw_ = w.idx, pb = b.idx;
  return g.push(std::move(out), needs, [si, px, pw_, pb, geom, B](graph& gr) {
    const tensor& go = gr.grad_of(si);
    const tensor& vx = gr.value(px);
    const tensor& vw = gr.value(pw_);
    const bool want_x = gr.wants_grad(px);
    const bool want_w = gr.wants_grad(pw_);
    const bool want_b = gr.wants_grad(pb);
    std::vector<double> K(geom.R * geom.P);
    std::vector<double> dK(want_x ? geom.R * geom.P : 0);
    detail::const_row_major_map Wm(vw.data(), static_cast<long>(geom.Cout),
                                   static_cast<long>(geom.R));
    for (std::size_t bi = 0; bi < B; ++bi) {
      detail::const_row_major_map dYm(go.data() + bi * geom.Cout * geom.P,
                                      static_cast<long>(geom.Cout),
                                      static_cast<long>(geom.P));
      if (want_w) {
        detail::im2col(vx.data() + bi * geom.Cin * geom.H * geom.W, geom, K.data());
        detail::const_col_major_map Km(K.data(), static_cast<long>(geom.R),
                                       static_cast<long>(geom.P));
        detail::row_major_map dWm(gr.ensure_grad(pw_).data(),
                                  static_cast<long>(geom.Cout),
                                  static_cast<long>(geom.R));
        dWm.noalias() += dYm * Km.transpose();
      }
      if (want_b) {
        tensor& gb = gr.ensure_grad(pb);
        for (std::size_t c = 0; c < geom.Cout; ++c)
          gb[c] += dYm.row(static_cast<long>(c)).sum();
      }
      if (want_x) {
        detail::col_major_map dKm(dK.data(), static_cast<long>(geom.R),
                                  static_cast<long>(geom.P));
        dKm.noalias() = Wm.transpose() * dYm;
        detail::col2im_add(dK.data(), geom,
                           gr.ensure_grad(px).data() + bi * geom.Cin * geom.H * geom.W);
      }
    }
  });
}

// Instance normalization with table-driven affine: per (instance, channel)
// slice, whiten over the spatial extent, then scale/shift with gamma/beta
// taken from row rows[b] of the [R x C] tables. Plain IN is the R == 1 case;
// conditional IN indexes rows by the (source, target) pair. The denominator
// is floored at eps.
inline var instance_norm_affine(var x, var gamma, var beta,
                                std::vector<std::size_t> rows, double eps) {
  graph& g = *x.g;
  const tensor& vx = g.value(x);
  const tensor& vg = g.value(gamma);
  const tensor& vbt = g.value(beta);
  if (vx.rank() != 4) throw data_error("instance_norm: rank != 4");
  const std::size_t B = vx.dim(0), C = vx.dim(1), M = vx.dim(2) * vx.dim(3);
  if (M < 2) throw data_error("instance_norm: needs >= 2 elements per slice");
  if (vg.rank() != 2 || vg.dim(1) != C || !vg.same_shape(vbt))
    throw data_error("instance_norm: bad table shape");
  if (rows.size() != B) throw data_error("instance_norm: rows size mismatch");
  for (std::size_t r : rows)
    if (r >= vg.dim(0)) throw data_error("instance_norm: row index out of range");

  tensor out(vx.shape());
  std::vector<double> mu(B * C), den(B * C);
  const double invM = 1.0 / static_cast<double>(M);
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = vx.data() + (bi * C + c) * M;
      double m = 0.0;
      for (std::size_t i = 0; i < M; ++i) m += src[i];
      m *= invM;
      double v = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        const double d = src[i] - m;
        v += d * d;
      }
      const double s = std::sqrt(v * invM);
      const double d = s > eps ? s : eps;
      mu[bi * C + c] = m;
      den[bi * C + c] = d;
      const double ga = vg.at(rows[bi], c);
      const double be = vbt.at(rows[bi], c);
      double* dst = out.data() + (bi * C + c) * M;
      for (std::size_t i = 0; i < M; ++i) dst[i] = ga * (src[i] - m) / d + be;
    }
  }

  const bool needs = detail::any_needs({x, gamma, beta});
  const int si = g.next_index(), px = x.idx, pg = gamma.idx, pb = beta.idx;
  return g.push(std::move(out), needs,
                [si, px, pg, pb, rows = std::move(rows), mu = std::move(mu),
                 den = std::move(den), B, C, M, eps](graph& gr) {
    const tensor& go = gr.grad_of(si);
    const tensor& vx = gr.value(px);
    const tensor& vg = gr.value(pg);
    const bool want_x = gr.wants_grad(px);
    const bool want_g = gr.wants_grad(pg);
    const bool want_b = gr.wants_grad(pb);
    const double invM = 1.0 / static_cast<double>(M);
    for (std::size_t bi = 0; bi < B; ++bi) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* src = vx.data() + (bi * C + c) * M;
        const double* dy = go.data() + (bi * C + c) * M;
        const double m = mu[bi * C + c];
        const double d = den[bi * C + c];
        const double ga = vg.at(rows[bi], c);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
          const double xhat = (src[i] - m) / d;
          sum_dy += dy[i];
          sum_dy_xhat += dy[i] * xhat;
        }
        if (want_g) gr.ensure_grad(pg).at(rows[bi], c) += sum_dy_xhat;
        if (want_b) gr.ensure_grad(pb).at(rows[bi], c) += sum_dy;
        if (want_x) {
          double* dx = gr.ensure_grad(px).data() + (bi * C + c) * M;
          const double mg = ga * sum_dy * invM;
          const double mgx = ga * sum_dy_xhat * invM;
          const bool floored = d <= eps;
          for (std::size_t i = 0; i < M; ++i) {
            const double xhat = (src[i] - m) / d;
            const double gi = ga * dy[i];
            dx[i] += floored ? (gi - mg) / d : (gi - mg - xhat * mgx) / d;
          }
        }
      }
    }
  });
}

// [B, C*r*r, H, W] -> [B, C, H*r, W*r]; channel index c*r*r + dh*r + dw feeds
// output pixel (h*r + dh, w*r + dw).
inline var pixel_shuffle(var x, std::size_t r) {
  graph& g = *x.g;
  const tensor& vx = g.value(x);
  if (vx.rank() != 4) throw data_error("pixel_shuffle: rank != 4");
  const std::size_t B = vx.dim(0), Cin = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  if (Cin % (r * r) != 0) throw data_error("pixel_shuffle: channels not divisible by r^2");
  const std::size_t C = Cin / (r * r);
  tensor out({B, C, H * r, W * r});
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t dh = 0; dh < r; ++dh)
        for (std::size_t dw = 0; dw < r; ++dw) {
          const double* src =
              vx.data() + ((bi * Cin + c * r * r + dh * r + dw) * H) * W;
          for (std::size_t h = 0; h < H; ++h) {
            double* dst = out.data() +
                          ((bi * C + c) * H * r + h * r + dh) * W * r + dw;
            for (std::size_t w = 0; w < W; ++w) dst[w * r] = src[h * W + w];
          }
        }
  const bool needs = g.wants_grad(x);
  const int si = g.next_index(), px = x.idx;
  return g.push(std::move(out), needs, [si, px, B, Cin, C, H, W, r](graph& gr) {
    if (!gr.wants_grad(px)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(px);
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t dh = 0; dh < r; ++dh)
          for (std::size_t dw = 0; dw < r; ++dw) {
            double* dst = gp.data() + ((bi * Cin + c * r * r + dh * r + dw) * H) * W;
            for (std::size_t h = 0; h < H; ++h) {
              const double* src = go.data() +
                                  ((bi * C + c) * H * r + h * r + dh) * W * r + dw;
              for (std::size_t w = 0; w < W; ++w) dst[h * W + w] += src[w * r];
            }
          }
  });
}

// ---- pooling ----

inline var global_sum_pool(var x) {
  graph& g = *x.g;
  const tensor& vx = g.value(x);
  if (vx.rank() != 4) throw data_error("global_sum_pool: rank != 4");
  const std::size_t B = vx.dim(0), C = vx.dim(1), M = vx.dim(2) * vx.dim(3);
  tensor out({B, C});
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* src = vx.data() + bc * M;
    double acc = 0.0;
    for (std::size_t i = 0; i < M; ++i) acc += src[i];
    out[bc] = acc;
  }
  const bool needs = g.wants_grad(x);
  const int si = g.next_index(), px = x.idx;
  return g.push(std::move(out), needs, [si, px, B, C, M](graph& gr) {
    if (!gr.wants_grad(px)) return;
    const tensor& go = gr.grad_of(si);
    tensor& gp = gr.ensure_grad(px);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      double* dst = gp.data() + bc * M;
      const double v = go[bc];
      for (std::size_t i = 0; i < M; ++i) dst[i] += v;
    }
  });
}

inline var global_avg_pool(var x) {
  const tensor& vx = x.g->value(x);
  const double invM = 1.0 / static_cast<double>(vx.dim(2) * vx.dim(3));
  return mul_scalar(global_sum_pool(x), invM);
}

// ---- dense / conditioning heads ----

// y = x * w^T + b. x: [B, K], w: [M, K], b: [M].
inline var linear(var x, var w, var b) {
  graph& g = *x.g;
  const tensor& vx = g.value(x);
  const tensor& vw = g.value(w);
  const tensor& vb = g.value(b);
  if (vx.rank() != 2 || vw.rank() != 2) throw data_error("linear: rank != 2");
  const std::size_t B = vx.dim(0), K = vx.dim(1), Mo = vw.dim(0);
  if (vw.dim(1) != K || vb.numel() != Mo) throw data_error("linear: shape mismatch");
  tensor out({B, Mo});
  detail::const_row_major_map Xm(vx.data(), static_cast<long>(B), static_cast<long>(K));
  detail::const_row_major_map Wm(vw.data(), static_cast<long>(Mo), static_cast<long>(K));
  detail::row_major_map Ym(out.data(), static_cast<long>(B), static_cast<long>(Mo));
  Ym.noalias() = Xm * Wm.transpose();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t m = 0; m < Mo; ++m) out.at(bi, m) += vb[m];
  const bool needs = detail::any_needs({x, w, b});
  const int si = g.next_index(), px = x.idx, pw = w.idx, pb = b.idx;
  return g.push(std::move(out), needs, [si, px, pw, pb, B, K, Mo](graph& gr) {
    const tensor& go = gr.grad_of(si);
    detail::const_row_major_map dYm(go.data(), static_cast<long>(B), static_cast<long>(Mo));
    if (gr.wants_grad(px)) {
      detail::const_row_major_map Wm(gr.value(pw).data(), static_cast<long>(Mo),
                                     static_cast<long>(K));
      detail::row_major_map dXm(gr.ensure_grad(px).data(), static_cast<long>(B),
                                static_cast<long>(K));
      dXm.noalias() += dYm * Wm;
    }
    if (gr.wants_grad(pw)) {
      detail::const_row_major_map Xm(gr.value(px).data(), static_cast<long>(B),
                                     static_cast<long>(K));
      detail::row_major_map dWm(gr.ensure_grad(pw).data(), static_cast<long>(Mo),
                                static_cast<long>(K));
      dWm.noalias() += dYm.transpose() * Xm;
    }
    if (gr.wants_grad(pb)) {
      tensor& gb = gr.ensure_grad(pb);
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t m = 0; m < Mo; ++m) gb[m] += go.at(bi, m);
    }
  });
}

// Projection term: y[b] = <table[rows[b], :], feat[b, :]>.
inline var embed_dot(var feat, var table, std::vector<std::size_t> rows) {
  graph& g = *feat.g;
  const tensor& vf = g.value(feat);
  const tensor& vt = g.value(table);
  if (vf.rank() != 2 || vt.rank() != 2) throw data_error("embed_dot: rank != 2");
  const std::size_t B = vf.dim(0), C = vf.dim(1);
  if (vt.dim(1) != C) throw data_error("embed_dot: feature dim mismatch");
  if (rows.size() != B) throw data_error("embed_dot: rows size mismatch");
  for (std::size_t r : rows)
    if (r >= vt.dim(0)) throw data_error("embed_dot: row index out of range");
  tensor out({B});
  for (std::size_t bi = 0; bi < B; ++bi) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) acc += vt.at(rows[bi], c) * vf.at(bi, c);
    out[bi] = acc;
  }
  const bool needs = detail::any_needs({feat, table});
  const int si = g.next_index(), pf = feat.idx, pt = table.idx;
  return g.push(std::move(out), needs,
                [si, pf, pt, rows = std::move(rows), B, C](graph& gr) {
    const tensor& go = gr.grad_of(si);
    if (gr.wants_grad(pf)) {
      const tensor& vt = gr.value(pt);
      tensor& gp = gr.ensure_grad(pf);
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c)
          gp.at(bi, c) += go[bi] * vt.at(rows[bi], c);
    }
    if (gr.wants_grad(pt)) {
      const tensor& vf = gr.value(pf);
      tensor& gp = gr.ensure_grad(pt);
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c)
          gp.at(rows[bi], c) += go[bi] * vf.at(bi, c);
    }
  });
}

// ---- classification head ----

inline var log_softmax(var x) {
  graph& g = *x.g;
  const tensor& vx = g.value(x);
  if (vx.rank() != 2) throw data_error("log_softmax: rank != 2");
  const std::size_t B = vx.dim(0), N = vx.dim(1);
  tensor out(vx.shape());
  for (std::size_t bi = 0; bi < B; ++bi) {
    const double* src = vx.data() + bi * N;
    double mx = src[0];
    for (std::size_t i = 1; i < N; ++i) mx = std::max(mx, src[i]);
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) acc += std::exp(src[i] - mx);
    const double lse = mx + std::log(acc);
    double* dst = out.data() + bi * N;
    for (std::size_t i = 0; i < N; ++i) dst[i] = src[i] - lse;
  }
  const bool needs = g.wants_grad(x);
  const int si = g.next_index(), px = x.idx;
  return g.push(std::move(out), needs, [si, px, B, N](graph& gr) {
    if (!gr.wants_grad(px)) return;
    const tensor& go = gr.grad_of(si);
    const tensor& vo = gr.value(si);
    tensor& gp = gr.ensure_grad(px);
    for (std::size_t bi = 0; bi < B; ++bi) {
      double gsum = 0.0;
      for (std::size_t i = 0; i < N; ++i) gsum += go[bi * N + i];
      for (std::size_t i = 0; i < N; ++i)
        gp[bi * N + i] += go[bi * N + i] - std::exp(vo[bi * N + i]) * gsum;
    }
  });
}

// Mean negative log-likelihood of 0-based targets under log-probabilities.
inline var nll_mean(var log_probs, std::vector<std::size_t> targets) {
  graph& g = *log_probs.g;
  const tensor& vp = g.value(log_probs);
  if (vp.rank() != 2) throw data_error("nll_mean: rank != 2");
  const std::size_t B = vp.dim(0), N = vp.dim(1);
  if (targets.size() != B) throw data_error("nll_mean: target count mismatch");
  double acc = 0.0;
  for (std::size_t bi = 0; bi < B; ++bi) {
    if (targets[bi] >= N) throw data_error("nll_mean: target out of range");
    acc -= vp.at(bi, targets[bi]);
  }
  const double invB = 1.0 / static_cast<double>(B);
  const bool needs = g.wants_grad(log_probs);
  const int si = g.next_index(), pp = log_probs.idx;
  return g.push(tensor::scalar(acc * invB), needs,
                [si, pp, targets = std::move(targets), N, invB](graph& gr) {
    if (!gr.wants_grad(pp)) return;
    const double go = gr.grad_of(si)[0];
    tensor& gp = gr.ensure_grad(pp);
    for (std::size_t bi = 0; bi < targets.size(); ++bi)
      gp[bi * N + targets[bi]] -= go * invB;
  });
}

}  // namespace vcstar::ad
