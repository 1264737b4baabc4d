#pragma once

#include <cstddef>
#include <span>

namespace postfilter::ad::kernel {

struct ConvGeometry {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t length;
  std::size_t out_length;
  std::size_t stride;
  std::size_t dilation;
  std::size_t padding;
};

// Single batch item. x: [C_in x T], w: [C_out x C_in x K], y: [C_out x T_out].
void conv_forward(const ConvGeometry& g, const double* x, const double* w, const double* bias,
                  double* y);

// Accumulates into dx, dw, dbias (each may be null to skip).
void conv_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy,
                   double* dx, double* dw, double* dbias);

void matmul_forward(std::size_t m, std::size_t n, std::size_t p, const double* a, const double* b,
                    double* c);
// dA += dC * B^T ; dB += A^T * dC
void matmul_backward(std::size_t m, std::size_t n, std::size_t p, const double* a, const double* b,
                     const double* dc, double* da, double* db);

}  // namespace postfilter::ad::kernel
