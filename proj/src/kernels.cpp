#include "zerosweep/kernels.h"

#include <algorithm>
#include <cmath>

namespace zs::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelThreshold = 1 << 15;

constexpr int kColumnTile = 256;
constexpr int kRowBlock = 4;

inline double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

void gemm(int m, int n, int k, const double* a, const double* b, double* c,
          bool accumulate) {
  const int blocks = (m + kRowBlock - 1) / kRowBlock;
  const bool parallel = static_cast<long>(m) * n * k > kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (int blk = 0; blk < blocks; ++blk) {
    const int i0 = blk * kRowBlock;
    const int rows = std::min(kRowBlock, m - i0);
    if (!accumulate) std::fill(c + static_cast<long>(i0) * n, c + static_cast<long>(i0 + rows) * n, 0.0);
    for (int j0 = 0; j0 < n; j0 += kColumnTile) {
      const int j1 = std::min(n, j0 + kColumnTile);
      if (rows == kRowBlock) {
        double* c0 = c + static_cast<long>(i0) * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        const double* a0 = a + static_cast<long>(i0) * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        for (int p = 0; p < k; ++p) {
          const double* brow = b + static_cast<long>(p) * n;
          const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
          for (int j = j0; j < j1; ++j) {
            const double bv = brow[j];
            c0[j] += v0 * bv;
            c1[j] += v1 * bv;
            c2[j] += v2 * bv;
            c3[j] += v3 * bv;
          }
        }
      } else {
        for (int r = 0; r < rows; ++r) {
          double* crow = c + static_cast<long>(i0 + r) * n;
          const double* arow = a + static_cast<long>(i0 + r) * k;
          for (int p = 0; p < k; ++p) {
            const double* brow = b + static_cast<long>(p) * n;
            const double v = arow[p];
            for (int j = j0; j < j1; ++j) crow[j] += v * brow[j];
          }
        }
      }
    }
  }
}

void transpose(int rows, int cols, const double* in, double* out) {
  constexpr int kTile = 32;
  for (int r0 = 0; r0 < rows; r0 += kTile) {
    for (int c0 = 0; c0 < cols; c0 += kTile) {
      const int r1 = std::min(rows, r0 + kTile);
      const int c1 = std::min(cols, c0 + kTile);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) out[static_cast<long>(c) * rows + r] = in[static_cast<long>(r) * cols + c];
      }
    }
  }
}

void im2col3x3(int channels, int batch, int size, std::span<const double> in,
               std::span<double> col) {
  const int plane = size * size;
  const int positions = batch * plane;
#pragma omp parallel for schedule(static) if (static_cast<long>(channels) * positions * 9 > kParallelThreshold)
  for (int ic = 0; ic < channels; ++ic) {
    const double* src = in.data() + static_cast<long>(ic) * positions;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = col.data() + static_cast<long>(ic * 9 + ky * 3 + kx) * positions;
        for (int nb = 0; nb < batch; ++nb) {
          const double* s = src + nb * plane;
          double* d = dst + nb * plane;
          for (int y = 0; y < size; ++y) {
            const int sy = y + ky - 1;
            for (int x = 0; x < size; ++x) {
              const int sx = x + kx - 1;
              d[y * size + x] = (sy >= 0 && sy < size && sx >= 0 && sx < size)
                                    ? s[sy * size + sx]
                                    : 0.0;
            }
          }
        }
      }
    }
  }
}

void col2im3x3(int channels, int batch, int size, std::span<const double> col,
               std::span<double> out) {
  const int plane = size * size;
  const int positions = batch * plane;
#pragma omp parallel for schedule(static) if (static_cast<long>(channels) * positions * 9 > kParallelThreshold)
  for (int ic = 0; ic < channels; ++ic) {
    double* dst = out.data() + static_cast<long>(ic) * positions;
    std::fill(dst, dst + positions, 0.0);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = col.data() + static_cast<long>(ic * 9 + ky * 3 + kx) * positions;
        for (int nb = 0; nb < batch; ++nb) {
          const double* s = src + nb * plane;
          double* d = dst + nb * plane;
          for (int y = 0; y < size; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= size) continue;
            for (int x = 0; x < size; ++x) {
              const int sx = x + kx - 1;
              if (sx < 0 || sx >= size) continue;
              d[sy * size + sx] += s[y * size + x];
            }
          }
        }
      }
    }
  }
}

void conv3x3_forward(const ConvDims& dims, std::span<const double> in,
                     std::span<const double> weight, std::span<double> out,
                     std::span<double> col) {
  im2col3x3(dims.in_channels, dims.batch, dims.size, in, col);
  gemm(dims.out_channels, dims.positions(), dims.patch(), weight.data(), col.data(),
       out.data(), false);
}

void conv3x3_backward(const ConvDims& dims, std::span<const double> col,
                      std::span<const double> weight, std::span<const double> grad_out,
                      std::span<double> grad_weight, std::span<double> grad_in,
                      std::span<double> scratch) {
  const int positions = dims.positions();
  const int patch = dims.patch();
  double* big = scratch.data();
  double* weight_t = big + static_cast<long>(std::max(patch, dims.out_channels)) * positions;

  // grad_weight[oc][k] = sum_j grad_out[oc][j] * col[k][j]
  transpose(patch, positions, col.data(), big);
  gemm(dims.out_channels, patch, positions, grad_out.data(), big, grad_weight.data(), false);

  if (grad_in.empty()) return;
  // grad_col[k][j] = sum_oc weight[oc][k] * grad_out[oc][j]
  transpose(dims.out_channels, patch, weight.data(), weight_t);
  gemm(patch, positions, dims.out_channels, weight_t, grad_out.data(), big, false);
  col2im3x3(dims.in_channels, dims.batch, dims.size, {big, static_cast<std::size_t>(patch) * positions},
            grad_in);
}

void dense_forward(int batch, int in, int out, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
#pragma omp parallel for schedule(static) if (static_cast<long>(batch) * in * out > kParallelThreshold)
  for (int o = 0; o < out; ++o) {
    const double* wrow = w.data() + static_cast<long>(o) * in;
    for (int n = 0; n < batch; ++n) {
      y[static_cast<long>(n) * out + o] = dot(x.data() + static_cast<long>(n) * in, wrow, in) + b[o];
    }
  }
}

void dense_backward(int batch, int in, int out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> grad_y,
                    std::span<double> grad_w, std::span<double> grad_b,
                    std::span<double> grad_x, std::span<double> scratch) {
  double* gy_t = scratch.data();
  transpose(batch, out, grad_y.data(), gy_t);
  gemm(out, in, batch, gy_t, x.data(), grad_w.data(), false);
  for (int o = 0; o < out; ++o) {
    double s = 0.0;
    for (int n = 0; n < batch; ++n) s += gy_t[static_cast<long>(o) * batch + n];
    grad_b[o] = s;
  }
  if (!grad_x.empty()) gemm(batch, in, out, grad_y.data(), w.data(), grad_x.data(), false);
}

void batchnorm_forward_train(int channels, int m, std::span<const double> x,
                             std::span<const double> gamma, std::span<const double> beta,
                             double eps, std::span<double> y, std::span<double> xhat,
                             std::span<double> mean, std::span<double> var,
                             std::span<double> invstd) {
#pragma omp parallel for schedule(static) if (static_cast<long>(channels) * m > kParallelThreshold)
  for (int c = 0; c < channels; ++c) {
    const double* xc = x.data() + static_cast<long>(c) * m;
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += xc[i];
    const double mu = s / m;
    double ss = 0.0;
    for (int i = 0; i < m; ++i) {
      const double d = xc[i] - mu;
      ss += d * d;
    }
    const double v = ss / m;
    const double is = 1.0 / std::sqrt(v + eps);
    double* xh = xhat.data() + static_cast<long>(c) * m;
    double* yc = y.data() + static_cast<long>(c) * m;
    const double g = gamma[c];
    const double bt = beta[c];
    for (int i = 0; i < m; ++i) {
      xh[i] = (xc[i] - mu) * is;
      yc[i] = g * xh[i] + bt;
    }
    mean[c] = mu;
    var[c] = v;
    invstd[c] = is;
  }
}

void batchnorm_forward_eval(int channels, int m, std::span<const double> x,
                            std::span<const double> gamma, std::span<const double> beta,
                            std::span<const double> running_mean,
                            std::span<const double> running_var, double eps,
                            std::span<double> y, std::span<double> xhat,
                            std::span<double> invstd) {
#pragma omp parallel for schedule(static) if (static_cast<long>(channels) * m > kParallelThreshold)
  for (int c = 0; c < channels; ++c) {
    const double* xc = x.data() + static_cast<long>(c) * m;
    double* xh = xhat.data() + static_cast<long>(c) * m;
    double* yc = y.data() + static_cast<long>(c) * m;
    const double mu = running_mean[c];
    const double is = 1.0 / std::sqrt(running_var[c] + eps);
    for (int i = 0; i < m; ++i) {
      xh[i] = (xc[i] - mu) * is;
      yc[i] = gamma[c] * xh[i] + beta[c];
    }
    invstd[c] = is;
  }
}

void batchnorm_backward_train(int channels, int m, std::span<const double> xhat,
                              std::span<const double> gamma, std::span<const double> invstd,
                              std::span<const double> grad_y, std::span<double> grad_x,
                              std::span<double> grad_gamma, std::span<double> grad_beta) {
#pragma omp parallel for schedule(static) if (static_cast<long>(channels) * m > kParallelThreshold)
  for (int c = 0; c < channels; ++c) {
    const double* xh = xhat.data() + static_cast<long>(c) * m;
    const double* gy = grad_y.data() + static_cast<long>(c) * m;
    double dg = 0.0, db = 0.0;
    for (int i = 0; i < m; ++i) {
      dg += gy[i] * xh[i];
      db += gy[i];
    }
    grad_gamma[c] = dg;
    grad_beta[c] = db;
    double* gx = grad_x.data() + static_cast<long>(c) * m;
    const double scale = gamma[c] * invstd[c] / m;
    for (int i = 0; i < m; ++i) gx[i] = scale * (m * gy[i] - db - xh[i] * dg);
  }
}

void batchnorm_backward_eval(int channels, int m, std::span<const double> xhat,
                             std::span<const double> gamma, std::span<const double> invstd,
                             std::span<const double> grad_y, std::span<double> grad_x,
                             std::span<double> grad_gamma, std::span<double> grad_beta) {
#pragma omp parallel for schedule(static) if (static_cast<long>(channels) * m > kParallelThreshold)
  for (int c = 0; c < channels; ++c) {
    const double* xh = xhat.data() + static_cast<long>(c) * m;
    const double* gy = grad_y.data() + static_cast<long>(c) * m;
    double* gx = grad_x.data() + static_cast<long>(c) * m;
    double dg = 0.0, db = 0.0;
    const double scale = gamma[c] * invstd[c];
    for (int i = 0; i < m; ++i) {
      dg += gy[i] * xh[i];
      db += gy[i];
      gx[i] = scale * gy[i];
    }
    grad_gamma[c] = dg;
    grad_beta[c] = db;
  }
}

}  // namespace zs::kernels
