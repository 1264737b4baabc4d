#pragma once

#include <cstddef>

namespace postfilter::ad::kernel {

// Stride-1 correlation over a zero-padded input that already includes the
// padding: y[co][t] = bias[co] + sum_{ci,k} w[co][ci][k] * xp[ci][t + k*dil].
// xp rows have length padded_length; y rows have length out_length. With
// `accumulate` the sum is added to y and bias is ignored.
void direct_conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                 std::size_t dilation, std::size_t padded_length, std::size_t out_length,
                 const double* xp, const double* w, const double* bias, double* y,
                 bool accumulate = false);

// Weight gradient of the same correlation, added into dw:
// dw[co][ci][k] += sum_t dy[co][t] * xp[ci][t + k*dil].
void direct_conv_weight_grad(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                             std::size_t dilation, std::size_t padded_length, std::size_t out_length,
                             const double* xp, const double* dy, double* dw);

}  // namespace postfilter::ad::kernel
