// Naive serial kernels. Slow on purpose: they follow the defining sums
// directly and share no code with the parallel path.

#include <cmath>
#include <vector>

#include "zerosweep/kernels.h"

namespace zs::kernels::reference {

void conv3x3_forward(const ConvDims& d, std::span<const double> in,
                     std::span<const double> weight, std::span<double> out) {
  const int s = d.size;
  const int plane = s * s;
  const int positions = d.positions();
  for (int oc = 0; oc < d.out_channels; ++oc) {
    for (int n = 0; n < d.batch; ++n) {
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          double acc = 0.0;
          for (int ic = 0; ic < d.in_channels; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = y + ky - 1;
                const int sx = x + kx - 1;
                if (sy < 0 || sy >= s || sx < 0 || sx >= s) continue;
                acc += weight[(oc * d.in_channels + ic) * 9 + ky * 3 + kx] *
                       in[ic * positions + n * plane + sy * s + sx];
              }
            }
          }
          out[oc * positions + n * plane + y * s + x] = acc;
        }
      }
    }
  }
}

void conv3x3_backward(const ConvDims& d, std::span<const double> in,
                      std::span<const double> weight, std::span<const double> grad_out,
                      std::span<double> grad_weight, std::span<double> grad_in) {
  const int s = d.size;
  const int plane = s * s;
  const int positions = d.positions();
  for (auto& g : grad_weight) g = 0.0;
  for (auto& g : grad_in) g = 0.0;
  for (int oc = 0; oc < d.out_channels; ++oc) {
    for (int n = 0; n < d.batch; ++n) {
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const double g = grad_out[oc * positions + n * plane + y * s + x];
          for (int ic = 0; ic < d.in_channels; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = y + ky - 1;
                const int sx = x + kx - 1;
                if (sy < 0 || sy >= s || sx < 0 || sx >= s) continue;
                const int wi = (oc * d.in_channels + ic) * 9 + ky * 3 + kx;
                const int ii = ic * positions + n * plane + sy * s + sx;
                grad_weight[wi] += g * in[ii];
                if (!grad_in.empty()) grad_in[ii] += g * weight[wi];
              }
            }
          }
        }
      }
    }
  }
}

void dense_forward(int batch, int in, int out, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
  for (int n = 0; n < batch; ++n) {
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += x[n * in + i] * w[o * in + i];
      y[n * out + o] = acc;
    }
  }
}

void dense_backward(int batch, int in, int out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> grad_y,
                    std::span<double> grad_w, std::span<double> grad_b,
                    std::span<double> grad_x) {
  for (auto& g : grad_w) g = 0.0;
  for (auto& g : grad_b) g = 0.0;
  for (auto& g : grad_x) g = 0.0;
  for (int n = 0; n < batch; ++n) {
    for (int o = 0; o < out; ++o) {
      const double g = grad_y[n * out + o];
      grad_b[o] += g;
      for (int i = 0; i < in; ++i) {
        grad_w[o * in + i] += g * x[n * in + i];
        if (!grad_x.empty()) grad_x[n * in + i] += g * w[o * in + i];
      }
    }
  }
}

void batchnorm_forward_train(int channels, int m, std::span<const double> x,
                             std::span<const double> gamma, std::span<const double> beta,
                             double eps, std::span<double> y) {
  for (int c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += x[c * m + i];
    mean /= m;
    double var = 0.0;
    for (int i = 0; i < m; ++i) var += (x[c * m + i] - mean) * (x[c * m + i] - mean);
    var /= m;
    for (int i = 0; i < m; ++i) {
      y[c * m + i] = gamma[c] * (x[c * m + i] - mean) / std::sqrt(var + eps) + beta[c];
    }
  }
}

// Differentiates y_i = gamma * (x_i - mean) / sqrt(var + eps) + beta term by
// term: dL/dx_i = dL/dxhat_i / sd + dL/dvar * 2 (x_i - mean) / m + dL/dmean / m.
void batchnorm_backward_train(int channels, int m, std::span<const double> x,
                              std::span<const double> gamma, double eps,
                              std::span<const double> grad_y, std::span<double> grad_x,
                              std::span<double> grad_gamma, std::span<double> grad_beta) {
  for (int c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += x[c * m + i];
    mean /= m;
    double var = 0.0;
    for (int i = 0; i < m; ++i) var += (x[c * m + i] - mean) * (x[c * m + i] - mean);
    var /= m;
    const double sd = std::sqrt(var + eps);
    grad_gamma[c] = 0.0;
    grad_beta[c] = 0.0;
    double dvar = 0.0;
    double dmean = 0.0;
    for (int i = 0; i < m; ++i) {
      const double g = grad_y[c * m + i];
      grad_gamma[c] += g * (x[c * m + i] - mean) / sd;
      grad_beta[c] += g;
      const double dxhat = g * gamma[c];
      dvar += dxhat * (x[c * m + i] - mean) * -0.5 / (sd * sd * sd);
      dmean += -dxhat / sd;
    }
    for (int i = 0; i < m; ++i) {
      const double dxhat = grad_y[c * m + i] * gamma[c];
      grad_x[c * m + i] = dxhat / sd + dvar * 2.0 * (x[c * m + i] - mean) / m + dmean / m;
    }
  }
}

}  // namespace zs::kernels::reference
