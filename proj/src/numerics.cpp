#include "astr/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "astr/error.hpp"

namespace astr::numerics {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_string(t.shape()));
  }
}

}  // namespace

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": produced a non-finite value");
}

Tensor matmul(const Tensor& a, const Tensor& b, MacCounter* counter) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  // i-l-j order: each c[i][j] still sums over l in ascending order.
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      const double* brow = pb + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  if (counter) counter->macs += static_cast<std::uint64_t>(m) * k * n;
  require_finite(c, "matmul");
  return c;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b, MacCounter* counter) {
  require_rank(a, 2, "matmul_transposed");
  require_rank(b, 2, "matmul_transposed");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(0);
  if (b.extent(1) != k) {
    throw DimensionError("matmul_transposed: inner extents differ, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()) + "^T");
  }
  Tensor c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      pc[i * n + j] = acc;
    }
  }
  if (counter) counter->macs += static_cast<std::uint64_t>(m) * k * n;
  require_finite(c, "matmul_transposed");
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.extent(0), n = x.extent(1);
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = x.data().data() + i * n;
    double* out = y.data().data() + i * n;
    const double mx = *std::max_element(in, in + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
  }
  require_finite(y, "softmax_rows");
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t padding,
              std::span<const double> bias) {
  require_rank(x, 3, "conv2d");
  require_rank(kernel, 4, "conv2d");
  const std::size_t c_in = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t c_out = kernel.extent(0), k = kernel.extent(2);
  if (kernel.extent(1) != c_in) {
    throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) +
                         " does not accept input " + shape_string(x.shape()));
  }
  if (kernel.extent(3) != k || (k != 1 && k != 3)) {
    throw ParameterError("conv2d: kernel must be 1x1 or 3x3, got " + shape_string(kernel.shape()));
  }
  if (2 * padding + 1 != k) {
    throw ParameterError("conv2d: padding " + std::to_string(padding) +
                         " does not preserve spatial size for k=" + std::to_string(k));
  }
  if (!bias.empty() && bias.size() != c_out) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) + " != c_out " +
                         std::to_string(c_out));
  }

  Tensor y({c_out, h, w});
  const double* px = x.data().data();
  const double* pk = kernel.data().data();
  double* py = y.data().data();
  const long hl = static_cast<long>(h), wl = static_cast<long>(w);
  const long pad = static_cast<long>(padding);
  for (std::size_t co = 0; co < c_out; ++co) {
    double* out = py + co * h * w;
    if (!bias.empty()) std::fill(out, out + h * w, bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in = px + ci * h * w;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double kv = pk[((co * c_in + ci) * k + ky) * k + kx];
          const long dy = static_cast<long>(ky) - pad;
          const long dx = static_cast<long>(kx) - pad;
          const long y0 = std::max(0L, -dy), y1 = std::min(hl, hl - dy);
          const long x0 = std::max(0L, -dx), x1 = std::min(wl, wl - dx);
          for (long yy = y0; yy < y1; ++yy) {
            double* orow = out + yy * wl;
            const double* irow = in + (yy + dy) * wl + dx;
            for (long xx = x0; xx < x1; ++xx) orow[xx] += kv * irow[xx];
          }
        }
      }
    }
  }
  require_finite(y, "conv2d");
  return y;
}

Tensor avg_pool2d(const Tensor& x, long window) {
  if (window <= 0) throw ParameterError("avg_pool2d: window must be >= 1, got " + std::to_string(window));
  require_rank(x, 3, "avg_pool2d");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t k = static_cast<std::size_t>(window);
  const std::size_t oh = (h + k - 1) / k, ow = (w + k - 1) / k;
  Tensor y({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::size_t ys = oy * k, ye = std::min(h, ys + k);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t xs = ox * k, xe = std::min(w, xs + k);
        double sum = 0.0;
        for (std::size_t yy = ys; yy < ye; ++yy)
          for (std::size_t xx = xs; xx < xe; ++xx) sum += x.at(ch, yy, xx);
        y.at(ch, oy, ox) = sum / static_cast<double>((ye - ys) * (xe - xs));
      }
    }
  }
  return y;
}

double bilinear_sample(const Tensor& img, double y, double x, double fill) {
  const double h = static_cast<double>(img.extent(0));
  const double w = static_cast<double>(img.extent(1));
  if (!(y >= 0.0 && y <= h - 1.0 && x >= 0.0 && x <= w - 1.0)) return fill;
  const std::size_t y0 = static_cast<std::size_t>(y);
  const std::size_t x0 = static_cast<std::size_t>(x);
  const std::size_t y1 = std::min(y0 + 1, img.extent(0) - 1);
  const std::size_t x1 = std::min(x0 + 1, img.extent(1) - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
  const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

Tensor upsample_bilinear(const Tensor& x, long factor) {
  if (factor <= 0) {
    throw ParameterError("upsample_bilinear: factor must be >= 1, got " + std::to_string(factor));
  }
  require_rank(x, 3, "upsample_bilinear");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t f = static_cast<std::size_t>(factor);
  Tensor y({c, h * f, w * f});
  const double fd = static_cast<double>(factor);
  auto source = [fd](std::size_t dst, std::size_t extent) {
    const double s = (static_cast<double>(dst) + 0.5) / fd - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(extent - 1));
  };
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Tensor plane({h, w}, std::vector<double>(x.data().begin() + ch * h * w,
                                                  x.data().begin() + (ch + 1) * h * w));
    for (std::size_t oy = 0; oy < h * f; ++oy) {
      const double sy = source(oy, h);
      for (std::size_t ox = 0; ox < w * f; ++ox) {
        y.at(ch, oy, ox) = bilinear_sample(plane, sy, source(ox, w), 0.0);
      }
    }
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor relu(Tensor x) {
  for (auto& v : x.data()) v = std::max(v, 0.0);
  return x;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Tensor sigmoid(Tensor x) {
  for (auto& v : x.data()) v = sigmoid(v);
  return x;
}

void add_row_bias(Tensor& x, std::span<const double> bias) {
  require_rank(x, 2, "add_row_bias");
  if (bias.size() != x.extent(1)) {
    throw DimensionError("add_row_bias: bias length " + std::to_string(bias.size()) +
                         " != columns " + std::to_string(x.extent(1)));
  }
  for (std::size_t i = 0; i < x.extent(0); ++i)
    for (std::size_t j = 0; j < x.extent(1); ++j) x.at(i, j) += bias[j];
}

Tensor layer_norm_rows(const Tensor& x, double eps) {
  require_rank(x, 2, "layer_norm_rows");
  const std::size_t m = x.extent(0), n = x.extent(1);
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) = (x.at(i, j) - mean) * inv;
  }
  return y;
}

}  // namespace astr::numerics
