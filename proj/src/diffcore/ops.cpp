#include "repa/diffcore/ops.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "repa/errors.hpp"
#include "repa/simd.hpp"

namespace repa::diffcore {
namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const char* op, Var a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

struct Spatial {
  std::size_t batch, height, width;
};

Spatial spatial_dims(const char* op, const Shape& s) {
  if (s.size() < 2) throw ShapeError(std::string(op) + ": needs at least 2 dims");
  const std::size_t h = s[s.size() - 2];
  const std::size_t w = s[s.size() - 1];
  return {shape_size(s) / (h * w), h, w};
}

// Elementwise unary op with derivative computed from (x, y).
template <class F, class D>
Var unary(const char* kind, Var a, F f, D df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.graph().record(kind, std::move(y), {a}, [a, df](Graph& g, const Tensor& go) {
    Tensor* ga = g.grad_slot(a);
    if (!ga) return;
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += go[i] * df(x[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  simd::axpy(1.0, b.value().ptr(), y.ptr(), y.size());
  return a.graph().record("add", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a)) simd::axpy(1.0, go.ptr(), ga->ptr(), go.size());
    if (Tensor* gb = g.grad_slot(b)) simd::axpy(1.0, go.ptr(), gb->ptr(), go.size());
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  simd::axpy(-1.0, b.value().ptr(), y.ptr(), y.size());
  return a.graph().record("sub", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a)) simd::axpy(1.0, go.ptr(), ga->ptr(), go.size());
    if (Tensor* gb = g.grad_slot(b)) simd::axpy(-1.0, go.ptr(), gb->ptr(), go.size());
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  return a.graph().record("mul", std::move(y), {a, b}, [a, b](Graph& g, const Tensor& go) {
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    if (Tensor* ga = g.grad_slot(a))
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * z[i];
    if (Tensor* gb = g.grad_slot(b))
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * x[i];
  });
}

Var scale(Var a, double s) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= s;
  return a.graph().record("scale", std::move(y), {a}, [a, s](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a)) simd::axpy(s, go.ptr(), ga->ptr(), go.size());
  });
}

Var add_scalar(Var a, double s) {
  Tensor y = a.value();
  for (double& v : y.data()) v += s;
  return a.graph().record("add_scalar", std::move(y), {a}, [a](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a)) simd::axpy(1.0, go.ptr(), ga->ptr(), go.size());
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var mask(Var a, const Tensor& m) {
  if (a.shape() != m.shape()) {
    throw ShapeError("mask: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(m.shape()));
  }
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];
  return a.graph().record("mask", std::move(y), {a}, [a, m](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a))
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * m[i];
  });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  const Tensor& x = a.value();
  Tensor y(x.shape());
  auto th = std::make_shared<std::vector<double>>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    (*th)[i] = std::tanh(k * (v + c * v * v * v));
    y[i] = 0.5 * v * (1.0 + (*th)[i]);
  }
  return a.graph().record("gelu", std::move(y), {a}, [a, th](Graph& g, const Tensor& go) {
    Tensor* ga = g.grad_slot(a);
    if (!ga) return;
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x[i], t = (*th)[i];
      (*ga)[i] += go[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * c * v * v));
    }
  });
}

Var sin(Var a) {
  return unary("sin", a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Var cos(Var a) {
  return unary("cos", a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

Var matmul(Var a, Var b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dims " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor y({m, n});
  simd::gemm(m, n, k, a.value().ptr(), b.value().ptr(), y.ptr(), false);
  return a.graph().record("matmul", std::move(y), {a, b}, [a, b, m, k, n](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a)) {
      std::vector<double> bt(k * n);
      simd::transpose(b.value().ptr(), bt.data(), k, n);
      simd::gemm(m, k, n, go.ptr(), bt.data(), ga->ptr(), true);
    }
    if (Tensor* gb = g.grad_slot(b)) {
      std::vector<double> at(m * k);
      simd::transpose(a.value().ptr(), at.data(), m, k);
      simd::gemm(k, n, m, at.data(), go.ptr(), gb->ptr(), true);
    }
  });
}

Var add_tiled(Var x, Var t) {
  require_rank("add_tiled", x, 2);
  require_rank("add_tiled", t, 2);
  const std::size_t rows = x.shape()[0], d = x.shape()[1], tr = t.shape()[0];
  if (t.shape()[1] != d || tr == 0 || rows % tr != 0) {
    throw ShapeError("add_tiled: " + shape_string(x.shape()) + " + " + shape_string(t.shape()));
  }
  Tensor y = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    simd::axpy(1.0, t.value().ptr() + (r % tr) * d, y.ptr() + r * d, d);
  return x.graph().record("add_tiled", std::move(y), {x, t}, [x, t, rows, d, tr](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_slot(x)) simd::axpy(1.0, go.ptr(), gx->ptr(), go.size());
    if (Tensor* gt = g.grad_slot(t))
      for (std::size_t r = 0; r < rows; ++r)
        simd::axpy(1.0, go.ptr() + r * d, gt->ptr() + (r % tr) * d, d);
  });
}

Var add_grouped(Var x, Var grp) {
  require_rank("add_grouped", x, 2);
  require_rank("add_grouped", grp, 2);
  const std::size_t rows = x.shape()[0], d = x.shape()[1], groups = grp.shape()[0];
  if (grp.shape()[1] != d || groups == 0 || rows % groups != 0) {
    throw ShapeError("add_grouped: " + shape_string(x.shape()) + " + " +
                     shape_string(grp.shape()));
  }
  const std::size_t per = rows / groups;
  Tensor y = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    simd::axpy(1.0, grp.value().ptr() + (r / per) * d, y.ptr() + r * d, d);
  return x.graph().record("add_grouped", std::move(y), {x, grp}, [x, grp, rows, d, per](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_slot(x)) simd::axpy(1.0, go.ptr(), gx->ptr(), go.size());
    if (Tensor* gg = g.grad_slot(grp))
      for (std::size_t r = 0; r < rows; ++r)
        simd::axpy(1.0, go.ptr() + r * d, gg->ptr() + (r / per) * d, d);
  });
}

Var token_mix(Var w, Var x) {
  require_rank("token_mix", w, 2);
  require_rank("token_mix", x, 2);
  const std::size_t n = w.shape()[0], rows = x.shape()[0], d = x.shape()[1];
  if (w.shape()[1] != n || rows % n != 0) {
    throw ShapeError("token_mix: " + shape_string(w.shape()) + " with " + shape_string(x.shape()));
  }
  const std::size_t batch = rows / n;
  Tensor y({rows, d});
  for (std::size_t b = 0; b < batch; ++b)
    simd::gemm(n, d, n, w.value().ptr(), x.value().ptr() + b * n * d, y.ptr() + b * n * d, false);
  return w.graph().record("token_mix", std::move(y), {w, x}, [w, x, n, d, batch](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_slot(x)) {
      std::vector<double> wt(n * n);
      simd::transpose(w.value().ptr(), wt.data(), n, n);
      for (std::size_t b = 0; b < batch; ++b)
        simd::gemm(n, d, n, wt.data(), go.ptr() + b * n * d, gx->ptr() + b * n * d, true);
    }
    if (Tensor* gw = g.grad_slot(w)) {
      std::vector<double> xt(d * n);
      for (std::size_t b = 0; b < batch; ++b) {
        simd::transpose(x.value().ptr() + b * n * d, xt.data(), n, d);
        simd::gemm(n, n, d, go.ptr() + b * n * d, xt.data(), gw->ptr(), true);
      }
    }
  });
}

Var grouped_matmul(Var x, Var w) {
  require_rank("grouped_matmul", x, 2);
  require_rank("grouped_matmul", w, 3);
  const std::size_t groups = x.shape()[0], k = x.shape()[1], m = w.shape()[2];
  if (w.shape()[0] != groups || w.shape()[1] != k) {
    throw ShapeError("grouped_matmul: " + shape_string(x.shape()) + " with " +
                     shape_string(w.shape()));
  }
  Tensor y({groups, m});
  for (std::size_t gi = 0; gi < groups; ++gi)
    simd::gemm(1, m, k, x.value().ptr() + gi * k, w.value().ptr() + gi * k * m, y.ptr() + gi * m, false);
  return x.graph().record("grouped_matmul", std::move(y), {x, w}, [x, w, groups, k, m](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_slot(x)) {
      for (std::size_t gi = 0; gi < groups; ++gi)
        for (std::size_t p = 0; p < k; ++p)
          (*gx)[gi * k + p] += simd::dot(w.value().ptr() + (gi * k + p) * m, go.ptr() + gi * m, m);
    }
    if (Tensor* gw = g.grad_slot(w)) {
      for (std::size_t gi = 0; gi < groups; ++gi)
        for (std::size_t p = 0; p < k; ++p)
          simd::axpy(x.value()[gi * k + p], go.ptr() + gi * m, gw->ptr() + (gi * k + p) * m, m);
    }
  });
}

Var conv2d(Var x, const Tensor& kernel) {
  if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) {
    throw ShapeError("conv2d: kernel must be 2-D with odd extents, got " +
                     shape_string(kernel.shape()));
  }
  const auto [batch, h, w] = spatial_dims("conv2d", x.shape());
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  const auto ch = static_cast<std::ptrdiff_t>(kh / 2), cw = static_cast<std::ptrdiff_t>(kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  // y[i,j] = sum_{u,v} k[u,v] x[i-u+ch, j-v+cw]
  auto forward = [=](const double* src, double* dst) {
    for (std::ptrdiff_t i = 0; i < H; ++i)
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        double s = 0.0;
        for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(kh); ++u) {
          const std::ptrdiff_t si = i - u + ch;
          if (si < 0 || si >= H) continue;
          for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(kw); ++v) {
            const std::ptrdiff_t sj = j - v + cw;
            if (sj < 0 || sj >= W) continue;
            s += kernel[u * kw + v] * src[si * W + sj];
          }
        }
        dst[i * W + j] = s;
      }
  };
  Tensor y(x.shape());
  for (std::size_t b = 0; b < batch; ++b) forward(x.value().ptr() + b * h * w, y.ptr() + b * h * w);
  return x.graph().record("conv2d", std::move(y), {x}, [=](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gy = go.ptr() + b * h * w;
      double* gd = gx->ptr() + b * h * w;
      for (std::ptrdiff_t i = 0; i < H; ++i)
        for (std::ptrdiff_t j = 0; j < W; ++j) {
          const double up = gy[i * W + j];
          for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(kh); ++u) {
            const std::ptrdiff_t si = i - u + ch;
            if (si < 0 || si >= H) continue;
            for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(kw); ++v) {
              const std::ptrdiff_t sj = j - v + cw;
              if (sj < 0 || sj >= W) continue;
              gd[si * W + sj] += kernel[u * kw + v] * up;
            }
          }
        }
    }
  });
}

Var avg_pool(Var x, std::size_t f) {
  const auto [batch, h, w] = spatial_dims("avg_pool", x.shape());
  if (f == 0 || h % f != 0 || w % f != 0) {
    throw ShapeError("avg_pool: factor " + std::to_string(f) + " does not divide " +
                     shape_string(x.shape()));
  }
  const std::size_t oh = h / f, ow = w / f;
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  const double inv = 1.0 / static_cast<double>(f * f);
  Tensor y(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        y[b * oh * ow + (i / f) * ow + j / f] += inv * xv[b * h * w + i * w + j];
  return x.graph().record("avg_pool", std::move(y), {x}, [=](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          (*gx)[b * h * w + i * w + j] += inv * go[b * oh * ow + (i / f) * ow + j / f];
  });
}

Var upsample_nearest(Var x, std::size_t f) {
  const auto [batch, h, w] = spatial_dims("upsample_nearest", x.shape());
  if (f == 0) throw ShapeError("upsample_nearest: factor must be positive");
  const std::size_t oh = h * f, ow = w * f;
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  Tensor y(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        y[b * oh * ow + i * ow + j] = xv[b * h * w + (i / f) * w + j / f];
  return x.graph().record("upsample_nearest", std::move(y), {x}, [=](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
          (*gx)[b * h * w + (i / f) * w + j / f] += go[b * oh * ow + i * ow + j];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return x.graph().record("reshape", std::move(y), {x}, [x](Graph& g, const Tensor& go) {
    if (Tensor* gx = g.grad_slot(x)) simd::axpy(1.0, go.ptr(), gx->ptr(), go.size());
  });
}

namespace {

struct PatchLayout {
  std::size_t batch, h, w, s, gw, n;
  // flat pixel index for (b, token, within-patch offset)
  std::size_t pixel(std::size_t b, std::size_t tok, std::size_t off) const {
    const std::size_t gy = tok / gw, gx = tok % gw;
    const std::size_t py = off / s, px = off % s;
    return b * h * w + (gy * s + py) * w + gx * s + px;
  }
};

PatchLayout patch_layout(const char* op, std::size_t total, std::size_t h, std::size_t w,
                         std::size_t s) {
  if (s == 0 || h % s != 0 || w % s != 0) {
    throw ShapeError(std::string(op) + ": patch side " + std::to_string(s) +
                     " does not tile " + std::to_string(h) + "x" + std::to_string(w));
  }
  if (total % (h * w) != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(total) +
                     " elements is not a whole number of " + std::to_string(h) + "x" +
                     std::to_string(w) + " images");
  }
  return {total / (h * w), h, w, s, w / s, (h / s) * (w / s)};
}

}  // namespace

Var patchify(Var x, std::size_t height, std::size_t width, std::size_t side) {
  const PatchLayout L = patch_layout("patchify", x.value().size(), height, width, side);
  const std::size_t pd = side * side;
  Tensor y({L.batch * L.n, pd});
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < L.batch; ++b)
    for (std::size_t t = 0; t < L.n; ++t)
      for (std::size_t o = 0; o < pd; ++o) y[(b * L.n + t) * pd + o] = xv[L.pixel(b, t, o)];
  return x.graph().record("patchify", std::move(y), {x}, [x, L, pd](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t b = 0; b < L.batch; ++b)
      for (std::size_t t = 0; t < L.n; ++t)
        for (std::size_t o = 0; o < pd; ++o) (*gx)[L.pixel(b, t, o)] += go[(b * L.n + t) * pd + o];
  });
}

Var unpatchify(Var x, std::size_t height, std::size_t width, std::size_t side) {
  require_rank("unpatchify", x, 2);
  const std::size_t pd = side * side;
  if (x.shape()[1] != pd) {
    throw ShapeError("unpatchify: rows of " + shape_string(x.shape()) + " are not " +
                     std::to_string(side) + "x" + std::to_string(side) + " patches");
  }
  const PatchLayout L = patch_layout("unpatchify", x.value().size(), height, width, side);
  Tensor y({L.batch, height * width});
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < L.batch; ++b)
    for (std::size_t t = 0; t < L.n; ++t)
      for (std::size_t o = 0; o < pd; ++o) y[L.pixel(b, t, o)] = xv[(b * L.n + t) * pd + o];
  return x.graph().record("unpatchify", std::move(y), {x}, [x, L, pd](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t b = 0; b < L.batch; ++b)
      for (std::size_t t = 0; t < L.n; ++t)
        for (std::size_t o = 0; o < pd; ++o) (*gx)[(b * L.n + t) * pd + o] += go[L.pixel(b, t, o)];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph().record("sum", Tensor::scalar(s), {x}, [x](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (double& v : gx->data()) v += go[0];
  });
}

Var mean(Var x) {
  if (x.value().empty()) throw ShapeError("mean of empty tensor");
  const double inv = 1.0 / static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph().record("mean", Tensor::scalar(s * inv), {x}, [x, inv](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (double& v : gx->data()) v += go[0] * inv;
  });
}

Var l2norm(Var x) {
  const double nrm = std::sqrt(squared_norm(x.value()));
  return x.graph().record("l2norm", Tensor::scalar(nrm), {x}, [x, nrm](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx || nrm == 0.0) return;
    simd::axpy(go[0] / nrm, x.value().ptr(), gx->ptr(), gx->size());
  });
}

Var cosine_rows(Var a, Var b) {
  require_same_shape("cosine_rows", a, b);
  require_rank("cosine_rows", a, 2);
  const std::size_t rows = a.shape()[0], d = a.shape()[1];
  constexpr double kTiny = 1e-12;
  Tensor y({rows});
  std::vector<double> na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* pa = a.value().ptr() + r * d;
    const double* pb = b.value().ptr() + r * d;
    na[r] = std::max(std::sqrt(simd::dot(pa, pa, d)), kTiny);
    nb[r] = std::max(std::sqrt(simd::dot(pb, pb, d)), kTiny);
    y[r] = simd::dot(pa, pb, d) / (na[r] * nb[r]);
  }
  Tensor cosines = y;
  return a.graph().record("cosine_rows", std::move(y), {a, b},
                          [a, b, rows, d, na, nb, cosines](Graph& g, const Tensor& go) {
    Tensor* ga = g.grad_slot(a);
    Tensor* gb = g.grad_slot(b);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* pa = a.value().ptr() + r * d;
      const double* pb = b.value().ptr() + r * d;
      const double c = cosines[r];
      // d cos / d a = b/(|a||b|) - c a/|a|^2
      if (ga) {
        double* out = ga->ptr() + r * d;
        simd::axpy(go[r] / (na[r] * nb[r]), pb, out, d);
        simd::axpy(-go[r] * c / (na[r] * na[r]), pa, out, d);
      }
      if (gb) {
        double* out = gb->ptr() + r * d;
        simd::axpy(go[r] / (na[r] * nb[r]), pa, out, d);
        simd::axpy(-go[r] * c / (nb[r] * nb[r]), pb, out, d);
      }
    }
  });
}

Var normalize_rows(Var x) {
  require_rank("normalize_rows", x, 2);
  const std::size_t rows = x.shape()[0], d = x.shape()[1];
  constexpr double kDegenerate = 1e-12;
  Tensor y({rows, d});
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* px = x.value().ptr() + r * d;
    norms[r] = std::sqrt(simd::dot(px, px, d));
    double* py = y.ptr() + r * d;
    if (norms[r] < kDegenerate) {
      const double u = 1.0 / std::sqrt(static_cast<double>(d));
      for (std::size_t c = 0; c < d; ++c) py[c] = u;
    } else {
      for (std::size_t c = 0; c < d; ++c) py[c] = px[c] / norms[r];
    }
  }
  Tensor unit = y;
  return x.graph().record("normalize_rows", std::move(y), {x},
                          [x, rows, d, norms, unit](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      if (norms[r] < kDegenerate) continue;
      const double* py = unit.ptr() + r * d;
      const double* pg = go.ptr() + r * d;
      const double proj = simd::dot(py, pg, d);
      double* out = gx->ptr() + r * d;
      for (std::size_t c = 0; c < d; ++c) out[c] += (pg[c] - py[c] * proj) / norms[r];
    }
  });
}

}  // namespace repa::diffcore
