#include "conv_kernel.hpp"

#include "direct_conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

namespace postfilter::ad::kernel {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using MutMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

std::size_t w_size(const ConvGeometry& g) { return g.out_channels * g.in_channels * g.kernel; }

// Columns per im2col chunk; keeps the unfolded block near L2 size.
std::size_t chunk_columns(std::size_t rows) {
  return std::max<std::size_t>(64, (std::size_t{1} << 17) / std::max<std::size_t>(rows, 1));
}

// cols[(ci*K + k) * n + j] = x[ci][(t0 + j)*stride + k*dilation - padding], zero outside.
void unfold(const ConvGeometry& g, const double* x, std::size_t t0, std::size_t n, double* cols) {
  const auto length = static_cast<std::ptrdiff_t>(g.length);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    const double* row = x + ci * g.length;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      double* dst = cols + (ci * g.kernel + k) * n;
      const auto shift = static_cast<std::ptrdiff_t>(k * g.dilation) -
                         static_cast<std::ptrdiff_t>(g.padding);
      if (g.stride == 1) {
        const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(t0) + shift;
        for (std::size_t j = 0; j < n; ++j) {
          const std::ptrdiff_t src = first + static_cast<std::ptrdiff_t>(j);
          dst[j] = (src >= 0 && src < length) ? row[src] : 0.0;
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          const std::ptrdiff_t src =
              static_cast<std::ptrdiff_t>((t0 + j) * g.stride) + shift;
          dst[j] = (src >= 0 && src < length) ? row[src] : 0.0;
        }
      }
    }
  }
}

void fold_add(const ConvGeometry& g, const double* cols, std::size_t t0, std::size_t n, double* dx) {
  const auto length = static_cast<std::ptrdiff_t>(g.length);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    double* row = dx + ci * g.length;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      const double* src = cols + (ci * g.kernel + k) * n;
      const auto shift = static_cast<std::ptrdiff_t>(k * g.dilation) -
                         static_cast<std::ptrdiff_t>(g.padding);
      for (std::size_t j = 0; j < n; ++j) {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>((t0 + j) * g.stride) + shift;
        if (t >= 0 && t < length) row[t] += src[j];
      }
    }
  }
}

void im2col_forward(const ConvGeometry& g, const double* x, const double* w, const double* bias,
                  double* y) {
  const std::size_t rows = g.in_channels * g.kernel;
  const std::size_t chunk = chunk_columns(rows);
  std::vector<double> cols(rows * std::min(chunk, g.out_length));
  Eigen::Map<const RowMat> weight(w, static_cast<Eigen::Index>(g.out_channels),
                                  static_cast<Eigen::Index>(rows));
  for (std::size_t t0 = 0; t0 < g.out_length; t0 += chunk) {
    const std::size_t n = std::min(chunk, g.out_length - t0);
    unfold(g, x, t0, n, cols.data());
    Eigen::Map<const RowMat> unfolded(cols.data(), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(n));
    MutMap out(y + t0, static_cast<Eigen::Index>(g.out_channels), static_cast<Eigen::Index>(n),
               Eigen::OuterStride<>(static_cast<Eigen::Index>(g.out_length)));
    out.noalias() = weight * unfolded;
  }
  if (bias != nullptr) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      double* row = y + co * g.out_length;
      for (std::size_t t = 0; t < g.out_length; ++t) row[t] += bias[co];
    }
  }
}

void im2col_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy,
                   double* dx, double* dw, double* dbias) {
  const std::size_t rows = g.in_channels * g.kernel;
  const std::size_t chunk = chunk_columns(rows);
  std::vector<double> cols(rows * std::min(chunk, g.out_length));
  std::vector<double> dcols(dx != nullptr ? cols.size() : 0);
  Eigen::Map<const RowMat> weight(w, static_cast<Eigen::Index>(g.out_channels),
                                  static_cast<Eigen::Index>(rows));
  for (std::size_t t0 = 0; t0 < g.out_length; t0 += chunk) {
    const std::size_t n = std::min(chunk, g.out_length - t0);
    ConstMap grad_out(dy + t0, static_cast<Eigen::Index>(g.out_channels),
                      static_cast<Eigen::Index>(n),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(g.out_length)));
    if (dw != nullptr) {
      unfold(g, x, t0, n, cols.data());
      Eigen::Map<const RowMat> unfolded(cols.data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(n));
      Eigen::Map<RowMat> grad_w(dw, static_cast<Eigen::Index>(g.out_channels),
                                static_cast<Eigen::Index>(rows));
      grad_w.noalias() += grad_out * unfolded.transpose();
    }
    if (dx != nullptr) {
      Eigen::Map<RowMat> grad_cols(dcols.data(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(n));
      grad_cols.noalias() = weight.transpose() * grad_out;
      fold_add(g, dcols.data(), t0, n, dx);
    }
  }
  if (dbias != nullptr) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const double* row = dy + co * g.out_length;
      double acc = 0.0;
      for (std::size_t t = 0; t < g.out_length; ++t) acc += row[t];
      dbias[co] += acc;
    }
  }
}

// Stride-1 path: pads the input once and runs the register-tiled kernel.
bool direct_applicable(const ConvGeometry& g) {
  return g.stride == 1 && g.padding <= (g.kernel - 1) * g.dilation;
}

std::vector<double> pad_rows(const double* x, std::size_t rows, std::size_t length,
                             std::size_t pad) {
  const std::size_t padded = length + 2 * pad;
  std::vector<double> out(rows * padded, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(x + r * length, x + (r + 1) * length, out.begin() + r * padded + pad);
  }
  return out;
}

}  // namespace

void conv_forward(const ConvGeometry& g, const double* x, const double* w, const double* bias,
                  double* y) {
  if (!direct_applicable(g)) {
    im2col_forward(g, x, w, bias, y);
    return;
  }
  const std::vector<double> xp = pad_rows(x, g.in_channels, g.length, g.padding);
  direct_conv(g.in_channels, g.out_channels, g.kernel, g.dilation, g.length + 2 * g.padding,
              g.out_length, xp.data(), w, bias, y);
}

void conv_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy,
                   double* dx, double* dw, double* dbias) {
  if (!direct_applicable(g)) {
    im2col_backward(g, x, w, dy, dx, dw, dbias);
    return;
  }
  if (dx != nullptr) {
    // dx is the full correlation of dy with the channel-transposed, tap-flipped kernel.
    const std::size_t back_pad = (g.kernel - 1) * g.dilation - g.padding;
    const std::vector<double> dyp = pad_rows(dy, g.out_channels, g.out_length, back_pad);
    std::vector<double> flipped(w_size(g));
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t ci = 0; ci < g.in_channels; ++ci)
        for (std::size_t k = 0; k < g.kernel; ++k)
          flipped[(ci * g.out_channels + co) * g.kernel + (g.kernel - 1 - k)] =
              w[(co * g.in_channels + ci) * g.kernel + k];
    direct_conv(g.out_channels, g.in_channels, g.kernel, g.dilation, g.out_length + 2 * back_pad,
                g.length, dyp.data(), flipped.data(), nullptr, dx, true);
  }
  if (dw != nullptr) {
    const std::vector<double> xp = pad_rows(x, g.in_channels, g.length, g.padding);
    direct_conv_weight_grad(g.in_channels, g.out_channels, g.kernel, g.dilation, g.length + 2 * g.padding,
                            g.out_length, xp.data(), dy, dw);
  }
  if (dbias != nullptr) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const double* row = dy + co * g.out_length;
      double acc = 0.0;
      for (std::size_t t = 0; t < g.out_length; ++t) acc += row[t];
      dbias[co] += acc;
    }
  }
}

void matmul_forward(std::size_t m, std::size_t n, std::size_t p, const double* a, const double* b,
                    double* c) {
  // A product is a kernel-1 convolution over the columns of b. The direct
  // kernel sums every output in the same order whatever p is, so a column's
  // value does not depend on how many other columns share the call.
  direct_conv(n, m, 1, 1, p, p, b, a, nullptr, c);
}

void matmul_backward(std::size_t m, std::size_t n, std::size_t p, const double* a, const double* b,
                     const double* dc, double* da, double* db) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto P = static_cast<Eigen::Index>(p);
  Eigen::Map<const RowMat> grad_c(dc, M, P);
  if (da != nullptr) {
    Eigen::Map<RowMat>(da, M, N).noalias() += grad_c * Eigen::Map<const RowMat>(b, N, P).transpose();
  }
  if (db != nullptr) {
    Eigen::Map<RowMat>(db, N, P).noalias() += Eigen::Map<const RowMat>(a, M, N).transpose() * grad_c;
  }
}

}  // namespace postfilter::ad::kernel
