#pragma once

// Dense numeric kernels for the policy-value network.
//
// Activations use a channel-major layout: [channels][batch * size * size],
// so each channel's values across the whole minibatch are contiguous. Conv
// layers are 3x3, stride 1, zero padding 1. Weight layouts:
//   conv   [out_channels][in_channels * 9]   (ic, ky, kx) order
//   dense  [out_features][in_features]
//
// The parallel kernels split work so that every output element is summed by
// one thread in a fixed order, so results do not depend on the thread count.
// zs::kernels::reference holds naive serial versions used by the tests and
// the benchmark.

#include <span>

namespace zs::kernels {

struct ConvDims {
  int in_channels;
  int out_channels;
  int batch;
  int size;  // board side length

  int positions() const { return batch * size * size; }
  int patch() const { return in_channels * 9; }
};

// c[m x n] = a[m x k] * b[k x n] (or += when accumulate), row-major.
void gemm(int m, int n, int k, const double* a, const double* b, double* c,
          bool accumulate);

void transpose(int rows, int cols, const double* in, double* out);

// col[(ic * 9 + ky * 3 + kx)][position]
void im2col3x3(int channels, int batch, int size, std::span<const double> in,
               std::span<double> col);
// Inverse scatter-add of im2col; overwrites `out`.
void col2im3x3(int channels, int batch, int size, std::span<const double> col,
               std::span<double> out);

// `col` receives the im2col expansion of `in` (patch() x positions()); keep it
// for the backward pass.
void conv3x3_forward(const ConvDims& dims, std::span<const double> in,
                     std::span<const double> weight, std::span<double> out,
                     std::span<double> col);

// grad_weight is overwritten. grad_in may be empty (first layer). `scratch`
// must hold max(patch, out_channels) * positions() + patch() * out_channels.
void conv3x3_backward(const ConvDims& dims, std::span<const double> col,
                      std::span<const double> weight, std::span<const double> grad_out,
                      std::span<double> grad_weight, std::span<double> grad_in,
                      std::span<double> scratch);

// y[batch][out] = x[batch][in] * w^T + b
void dense_forward(int batch, int in, int out, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y);

// grad_w and grad_b are overwritten; grad_x may be empty. `scratch` must hold
// batch * out values.
void dense_backward(int batch, int in, int out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> grad_y,
                    std::span<double> grad_w, std::span<double> grad_b,
                    std::span<double> grad_x, std::span<double> scratch);

// Normalizes each channel with its own batch statistics (biased variance).
void batchnorm_forward_train(int channels, int m, std::span<const double> x,
                             std::span<const double> gamma, std::span<const double> beta,
                             double eps, std::span<double> y, std::span<double> xhat,
                             std::span<double> mean, std::span<double> var,
                             std::span<double> invstd);

void batchnorm_forward_eval(int channels, int m, std::span<const double> x,
                            std::span<const double> gamma, std::span<const double> beta,
                            std::span<const double> running_mean,
                            std::span<const double> running_var, double eps,
                            std::span<double> y, std::span<double> xhat,
                            std::span<double> invstd);

// Backward through batch statistics.
void batchnorm_backward_train(int channels, int m, std::span<const double> xhat,
                              std::span<const double> gamma, std::span<const double> invstd,
                              std::span<const double> grad_y, std::span<double> grad_x,
                              std::span<double> grad_gamma, std::span<double> grad_beta);

// Backward through fixed (running) statistics.
void batchnorm_backward_eval(int channels, int m, std::span<const double> xhat,
                             std::span<const double> gamma, std::span<const double> invstd,
                             std::span<const double> grad_y, std::span<double> grad_x,
                             std::span<double> grad_gamma, std::span<double> grad_beta);

namespace reference {

// Direct convolution; no im2col.
void conv3x3_forward(const ConvDims& dims, std::span<const double> in,
                     std::span<const double> weight, std::span<double> out);

void conv3x3_backward(const ConvDims& dims, std::span<const double> in,
                      std::span<const double> weight, std::span<const double> grad_out,
                      std::span<double> grad_weight, std::span<double> grad_in);

void dense_forward(int batch, int in, int out, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y);

void dense_backward(int batch, int in, int out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> grad_y,
                    std::span<double> grad_w, std::span<double> grad_b,
                    std::span<double> grad_x);

void batchnorm_forward_train(int channels, int m, std::span<const double> x,
                             std::span<const double> gamma, std::span<const double> beta,
                             double eps, std::span<double> y);

void batchnorm_backward_train(int channels, int m, std::span<const double> x,
                              std::span<const double> gamma, double eps,
                              std::span<const double> grad_y, std::span<double> grad_x,
                              std::span<double> grad_gamma, std::span<double> grad_beta);

}  // namespace reference
}  // namespace zs::kernels
