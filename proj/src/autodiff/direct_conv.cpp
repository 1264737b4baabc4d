#include "direct_conv.hpp"

#include <algorithm>
#include <cstring>

namespace postfilter::ad::kernel {
namespace {

constexpr std::size_t kLanes = 8;
constexpr std::size_t kVectors = 3;
constexpr std::size_t kTile = kLanes * kVectors;

using Vec = double __attribute__((vector_size(kLanes * sizeof(double))));

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof(Vec));
  return v;
}

inline Vec splat(double s) { return Vec{s, s, s, s, s, s, s, s}; }

inline void store_add(double* p, Vec v) {
  Vec cur = load(p);
  cur += v;
  std::memcpy(p, &cur, sizeof(Vec));
}

template <std::size_t Rows>
void tile(std::size_t in_channels, std::size_t kernel, std::size_t dilation,
          std::size_t padded_length, std::size_t out_length, const double* xp, const double* w,
          std::size_t t0, std::size_t co0, double* y) {
  const std::size_t row_weights = in_channels * kernel;
  Vec acc[Rows][kVectors];
#pragma GCC unroll 8
  for (std::size_t r = 0; r < Rows; ++r)
#pragma GCC unroll 4
    for (std::size_t v = 0; v < kVectors; ++v) acc[r][v] = Vec{};
  for (std::size_t ci = 0; ci < in_channels; ++ci) {
    const double* src_row = xp + ci * padded_length + t0;
    const double* w_row = w + co0 * row_weights + ci * kernel;
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* src = src_row + k * dilation;
      Vec s[kVectors];
#pragma GCC unroll 4
      for (std::size_t v = 0; v < kVectors; ++v) s[v] = load(src + v * kLanes);
#pragma GCC unroll 8
      for (std::size_t r = 0; r < Rows; ++r) {
        const Vec wv = splat(w_row[r * row_weights + k]);
#pragma GCC unroll 4
        for (std::size_t v = 0; v < kVectors; ++v) acc[r][v] += wv * s[v];
      }
    }
  }
#pragma GCC unroll 8
  for (std::size_t r = 0; r < Rows; ++r) {
    double* dst = y + (co0 + r) * out_length + t0;
#pragma GCC unroll 4
    for (std::size_t v = 0; v < kVectors; ++v) store_add(dst + v * kLanes, acc[r][v]);
  }
}

// Remainder columns (fewer than kTile) handled one output at a time.
void tail(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
          std::size_t dilation, std::size_t padded_length, std::size_t out_length, const double* xp,
          const double* w, std::size_t t0, double* y) {
  const std::size_t row_weights = in_channels * kernel;
  for (std::size_t co = 0; co < out_channels; ++co) {
    for (std::size_t t = t0; t < out_length; ++t) {
      double acc = 0.0;
      for (std::size_t ci = 0; ci < in_channels; ++ci)
        for (std::size_t k = 0; k < kernel; ++k)
          acc += w[co * row_weights + ci * kernel + k] * xp[ci * padded_length + t + k * dilation];
      y[co * out_length + t] += acc;
    }
  }
}

inline double reduce(Vec v) {
  double s = 0.0;
#pragma GCC unroll 8
  for (std::size_t i = 0; i < kLanes; ++i) s += v[i];
  return s;
}

constexpr std::size_t kTapBlock = 3;

constexpr std::size_t kTimeBlock = 1024;

// Rows output channels against Taps consecutive taps of one input channel,
// over outputs [t_begin, t_end).
template <std::size_t Rows, std::size_t Taps>
void weight_tile(std::size_t in_channels, std::size_t kernel, std::size_t dilation, std::size_t out_length,
                 std::size_t t_begin, std::size_t t_end, const double* xp_row, const double* dy,
                 std::size_t co0, std::size_t ci, std::size_t k0, double* dw) {
  Vec acc[Rows][Taps];
#pragma GCC unroll 8
  for (std::size_t r = 0; r < Rows; ++r)
#pragma GCC unroll 4
    for (std::size_t j = 0; j < Taps; ++j) acc[r][j] = Vec{};
  const std::size_t full = t_begin + (t_end - t_begin) / kLanes * kLanes;
  for (std::size_t t = t_begin; t < full; t += kLanes) {
    Vec s[Taps];
#pragma GCC unroll 4
    for (std::size_t j = 0; j < Taps; ++j) s[j] = load(xp_row + t + (k0 + j) * dilation);
#pragma GCC unroll 8
    for (std::size_t r = 0; r < Rows; ++r) {
      const Vec g = load(dy + (co0 + r) * out_length + t);
#pragma GCC unroll 4
      for (std::size_t j = 0; j < Taps; ++j) acc[r][j] += g * s[j];
    }
  }
#pragma GCC unroll 8
  for (std::size_t r = 0; r < Rows; ++r) {
#pragma GCC unroll 4
    for (std::size_t j = 0; j < Taps; ++j) {
      double sum = reduce(acc[r][j]);
      for (std::size_t t = full; t < t_end; ++t)
        sum += dy[(co0 + r) * out_length + t] * xp_row[t + (k0 + j) * dilation];
      dw[((co0 + r) * in_channels + ci) * kernel + k0 + j] += sum;
    }
  }
}

template <std::size_t Rows>
void weight_rows(std::size_t in_channels, std::size_t kernel, std::size_t dilation,
                 std::size_t padded_length, std::size_t out_length, const double* xp, const double* dy,
                 std::size_t co0, double* dw) {
  for (std::size_t t0 = 0; t0 < out_length; t0 += kTimeBlock) {
    const std::size_t t1 = std::min(out_length, t0 + kTimeBlock);
    for (std::size_t ci = 0; ci < in_channels; ++ci) {
      const double* row = xp + ci * padded_length;
      std::size_t k = 0;
      for (; k + kTapBlock <= kernel; k += kTapBlock)
        weight_tile<Rows, kTapBlock>(in_channels, kernel, dilation, out_length, t0, t1, row, dy, co0, ci, k,
                                     dw);
      for (; k < kernel; ++k)
        weight_tile<Rows, 1>(in_channels, kernel, dilation, out_length, t0, t1, row, dy, co0, ci, k, dw);
    }
  }
}

}  // namespace

void direct_conv_weight_grad(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                             std::size_t dilation, std::size_t padded_length, std::size_t out_length,
                             const double* xp, const double* dy, double* dw) {
  std::size_t co = 0;
  for (; co + 8 <= out_channels; co += 8)
    weight_rows<8>(in_channels, kernel, dilation, padded_length, out_length, xp, dy, co, dw);
  for (; co + 4 <= out_channels; co += 4)
    weight_rows<4>(in_channels, kernel, dilation, padded_length, out_length, xp, dy, co, dw);
  for (; co < out_channels; ++co)
    weight_rows<1>(in_channels, kernel, dilation, padded_length, out_length, xp, dy, co, dw);
}

void direct_conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                 std::size_t dilation, std::size_t padded_length, std::size_t out_length,
                 const double* xp, const double* w, const double* bias, double* y,
                 bool accumulate) {
  if (!accumulate) {
    for (std::size_t co = 0; co < out_channels; ++co) {
      std::fill(y + co * out_length, y + (co + 1) * out_length, bias ? bias[co] : 0.0);
    }
  }
  const std::size_t full = out_length - out_length % kTile;
  for (std::size_t t0 = 0; t0 < full; t0 += kTile) {
    std::size_t co = 0;
    for (; co + 8 <= out_channels; co += 8)
      tile<8>(in_channels, kernel, dilation, padded_length, out_length, xp, w, t0, co, y);
    for (; co + 4 <= out_channels; co += 4)
      tile<4>(in_channels, kernel, dilation, padded_length, out_length, xp, w, t0, co, y);
    for (; co < out_channels; ++co)
      tile<1>(in_channels, kernel, dilation, padded_length, out_length, xp, w, t0, co, y);
  }
  if (full < out_length) {
    tail(in_channels, out_channels, kernel, dilation, padded_length, out_length, xp, w, full, y);
  }
}

}  // namespace postfilter::ad::kernel
