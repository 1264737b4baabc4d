#pragma once

#include <cstddef>
#include <optional>

#include "postfilter/autodiff/graph.hpp"

namespace postfilter::ad {

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
};

/// Output length of a zero-padded 1-D convolution.
std::size_t conv_output_length(std::size_t length, std::size_t kernel, const ConvOptions& opt);

/// x: [C_in x T] or [B x C_in x T]; weight: [C_out x C_in x K]; bias: [C_out].
Var conv1d(Var x, Var weight, std::optional<Var> bias, const ConvOptions& opt);

// Elementwise. Binary ops accept equal shapes, or a single-element operand
// broadcast against the other.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var offset(Var x, double delta);
Var leaky_relu(Var x, double alpha = 0.2);
Var tanh(Var x);
Var sigmoid(Var x);
Var abs(Var x);
/// log(max(x, floor)). With floor <= 0 a non-positive input is an error.
Var log(Var x, double floor = 0.0);
/// sqrt(re^2 + im^2 + eps), elementwise.
Var magnitude(Var re, Var im, double eps = 1e-12);
/// atan2(im, re), elementwise; gradient uses re^2 + im^2 + eps.
Var atan2(Var im, Var re, double eps = 1e-12);

/// a: [M x N], b: [N x P] -> [M x P].
Var matmul(Var a, Var b);

Var sum(Var x);
Var mean(Var x);
/// Mean over the trailing axis: [.. x T] -> [..].
Var mean_last_axis(Var x);

/// Slices [B x 1 x T] (or [1 x T]) into frames laid out as columns of a
/// [frame_len x B*F] matrix, column b*F + f holding frame f of item b.
Var frame(Var wave, std::size_t frame_len, std::size_t hop);
/// Inverse layout of frame(): [C x B*F] -> [B x C x F].
Var batch_major(Var x, std::size_t batch);
/// Inserts factor-1 zeros after every sample along the trailing axis.
Var upsample_zero(Var x, std::size_t factor);
Var reshape(Var x, Shape shape);

/// Copy of the value with no path back into the graph.
Var detach(Var x);

}  // namespace postfilter::ad
