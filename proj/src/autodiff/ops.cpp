#include "postfilter/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conv_kernel.hpp"

namespace postfilter::ad {
namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

enum class Broadcast { equal, scalar_a, scalar_b };

Broadcast broadcast_mode(const char* op, const SignalTensor& a, const SignalTensor& b) {
  if (a.shape() == b.shape()) return Broadcast::equal;
  if (a.size() == 1) return Broadcast::scalar_a;
  if (b.size() == 1) return Broadcast::scalar_b;
  throw ContractViolation(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                          to_string(b.shape()) + " are neither equal nor scalar-with-tensor");
}

// Shared driver for binary ops: f(a, b) forward, (df/da, df/db) backward.
template <typename Fwd, typename Da, typename Db>
Var binary(OpKind kind, const char* name, Var a, Var b, Fwd fwd, Da da, Db db) {
  const SignalTensor& av = a.value();
  const SignalTensor& bv = b.value();
  const Broadcast mode = broadcast_mode(name, av, bv);
  const Shape& shape = mode == Broadcast::scalar_a ? bv.shape() : av.shape();
  SignalTensor out(shape);
  const std::size_t n = out.size();
  auto ai = [mode](std::size_t i) { return mode == Broadcast::scalar_a ? std::size_t{0} : i; };
  auto bi = [mode](std::size_t i) { return mode == Broadcast::scalar_b ? std::size_t{0} : i; };
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[ai(i)], bv[bi(i)]);
  return a.graph().record(kind, {a, b}, std::move(out),
                          [=](std::span<const double> g, BackwardContext& ctx) {
                            const SignalTensor& x = ctx.input(0);
                            const SignalTensor& y = ctx.input(1);
                            if (ctx.wants(0)) {
                              auto gx = ctx.input_grad(0);
                              for (std::size_t i = 0; i < n; ++i)
                                gx[ai(i)] += g[i] * da(x[ai(i)], y[bi(i)]);
                            }
                            if (ctx.wants(1)) {
                              auto gy = ctx.input_grad(1);
                              for (std::size_t i = 0; i < n; ++i)
                                gy[bi(i)] += g[i] * db(x[ai(i)], y[bi(i)]);
                            }
                          });
}

// Shared driver for unary ops where the derivative is a function of (x, y).
template <typename Fwd, typename Deriv>
Var unary(OpKind kind, Var x, Fwd fwd, Deriv deriv) {
  const SignalTensor& xv = x.value();
  SignalTensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return x.graph().record(kind, {x}, std::move(out),
                          [deriv](std::span<const double> g, BackwardContext& ctx) {
                            const SignalTensor& in = ctx.input(0);
                            const SignalTensor& y = ctx.output();
                            auto gx = ctx.input_grad(0);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(in[i], y[i]);
                          });
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t kernel, const ConvOptions& opt) {
  require(kernel >= 1, "conv1d: kernel must be >= 1");
  require(opt.stride >= 1, "conv1d: stride must be >= 1");
  require(opt.dilation >= 1, "conv1d: dilation must be >= 1");
  const std::size_t span = opt.dilation * (kernel - 1) + 1;
  require(length + 2 * opt.padding >= span,
          "conv1d: time dimension " + std::to_string(length) + " with padding " +
              std::to_string(opt.padding) + " is shorter than the dilated kernel span " +
              std::to_string(span));
  return (length + 2 * opt.padding - span) / opt.stride + 1;
}

Var conv1d(Var x, Var weight, std::optional<Var> bias, const ConvOptions& opt) {
  const SignalTensor& xv = x.value();
  const SignalTensor& wv = weight.value();
  require(xv.rank() == 2 || xv.rank() == 3,
          "conv1d: input must be [C_in x T] or [B x C_in x T], got " + to_string(xv.shape()));
  require(wv.rank() == 3, "conv1d: weight must be [C_out x C_in x K], got " + to_string(wv.shape()));
  const bool batched = xv.rank() == 3;
  const std::size_t batch = batched ? xv.dim(0) : 1;
  const std::size_t c_in = xv.dim(batched ? 1 : 0);
  const std::size_t length = xv.dim(batched ? 2 : 1);
  require(wv.dim(1) == c_in, "conv1d: C_in mismatch, input has " + std::to_string(c_in) +
                                 " channels but weight expects " + std::to_string(wv.dim(1)));
  if (bias) {
    require(bias->value().rank() == 1 && bias->value().dim(0) == wv.dim(0),
            "conv1d: bias must be [C_out=" + std::to_string(wv.dim(0)) + "], got " +
                to_string(bias->value().shape()));
  }
  kernel::ConvGeometry geo{c_in,       wv.dim(0),  wv.dim(2),    length,
                           0,          opt.stride, opt.dilation, opt.padding};
  geo.out_length = conv_output_length(length, geo.kernel, opt);

  Shape out_shape = batched ? Shape{batch, geo.out_channels, geo.out_length}
                            : Shape{geo.out_channels, geo.out_length};
  SignalTensor out(out_shape);
  const std::size_t in_stride = c_in * length;
  const std::size_t out_stride = geo.out_channels * geo.out_length;
  const double* b = bias ? bias->value().data() : nullptr;
  for (std::size_t i = 0; i < batch; ++i) {
    kernel::conv_forward(geo, xv.data() + i * in_stride, wv.data(), b, out.data() + i * out_stride);
  }

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return x.graph().record(
      OpKind::conv1d, std::move(inputs), std::move(out),
      [=](std::span<const double> g, BackwardContext& ctx) {
        const SignalTensor& in = ctx.input(0);
        const SignalTensor& w = ctx.input(1);
        double* dx = ctx.wants(0) ? ctx.input_grad(0).data() : nullptr;
        double* dw = ctx.wants(1) ? ctx.input_grad(1).data() : nullptr;
        double* db = (has_bias && ctx.wants(2)) ? ctx.input_grad(2).data() : nullptr;
        for (std::size_t i = 0; i < batch; ++i) {
          kernel::conv_backward(geo, in.data() + i * in_stride, w.data(), g.data() + i * out_stride,
                                dx ? dx + i * in_stride : nullptr, dw, db);
        }
      });
}

Var add(Var a, Var b) {
  return binary(
      OpKind::add, "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      OpKind::sub, "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      OpKind::mul, "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(Var x, double factor) {
  return unary(
      OpKind::scale, x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Var offset(Var x, double delta) {
  return unary(
      OpKind::offset, x, [delta](double v) { return v + delta; }, [](double, double) { return 1.0; });
}

Var leaky_relu(Var x, double alpha) {
  return unary(
      OpKind::leaky_relu, x, [alpha](double v) { return v > 0.0 ? v : alpha * v; },
      [alpha](double v, double) { return v > 0.0 ? 1.0 : alpha; });
}

Var tanh(Var x) {
  return unary(
      OpKind::tanh, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      OpKind::sigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var x) {
  return unary(
      OpKind::abs, x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var log(Var x, double floor) {
  if (floor <= 0.0) {
    for (double v : x.value().values()) {
      require(v > 0.0, "log: non-positive input " + std::to_string(v) + " without a floor");
    }
  }
  return unary(
      OpKind::log, x, [floor](double v) { return std::log(floor > 0.0 ? std::max(v, floor) : v); },
      [floor](double v, double) { return (floor > 0.0 && v < floor) ? 0.0 : 1.0 / v; });
}

Var magnitude(Var re, Var im, double eps) {
  const SignalTensor& r = re.value();
  const SignalTensor& i = im.value();
  require(r.shape() == i.shape(), "magnitude: real " + to_string(r.shape()) +
                                      " and imaginary " + to_string(i.shape()) + " differ");
  SignalTensor out(r.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::sqrt(r[k] * r[k] + i[k] * i[k] + eps);
  return re.graph().record(OpKind::magnitude, {re, im}, std::move(out),
                           [](std::span<const double> g, BackwardContext& ctx) {
                             const SignalTensor& rv = ctx.input(0);
                             const SignalTensor& iv = ctx.input(1);
                             const SignalTensor& y = ctx.output();
                             if (ctx.wants(0)) {
                               auto gr = ctx.input_grad(0);
                               for (std::size_t k = 0; k < g.size(); ++k) gr[k] += g[k] * rv[k] / y[k];
                             }
                             if (ctx.wants(1)) {
                               auto gi = ctx.input_grad(1);
                               for (std::size_t k = 0; k < g.size(); ++k) gi[k] += g[k] * iv[k] / y[k];
                             }
                           });
}

Var atan2(Var im, Var re, double eps) {
  const SignalTensor& i = im.value();
  const SignalTensor& r = re.value();
  require(r.shape() == i.shape(), "atan2: real " + to_string(r.shape()) + " and imaginary " +
                                      to_string(i.shape()) + " differ");
  SignalTensor out(r.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::atan2(i[k], r[k]);
  return im.graph().record(OpKind::atan2, {im, re}, std::move(out),
                           [eps](std::span<const double> g, BackwardContext& ctx) {
                             const SignalTensor& iv = ctx.input(0);
                             const SignalTensor& rv = ctx.input(1);
                             std::span<double> gi = ctx.wants(0) ? ctx.input_grad(0) : std::span<double>{};
                             std::span<double> gr = ctx.wants(1) ? ctx.input_grad(1) : std::span<double>{};
                             for (std::size_t k = 0; k < g.size(); ++k) {
                               const double denom = rv[k] * rv[k] + iv[k] * iv[k] + eps;
                               if (!gi.empty()) gi[k] += g[k] * rv[k] / denom;
                               if (!gr.empty()) gr[k] -= g[k] * iv[k] / denom;
                             }
                           });
}

Var matmul(Var a, Var b) {
  const SignalTensor& av = a.value();
  const SignalTensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2, "matmul: operands must be 2-D, got " +
                                                to_string(av.shape()) + " and " + to_string(bv.shape()));
  require(av.dim(1) == bv.dim(0), "matmul: inner dimensions differ (" + std::to_string(av.dim(1)) +
                                      " vs " + std::to_string(bv.dim(0)) + ")");
  const std::size_t m = av.dim(0), n = av.dim(1), p = bv.dim(1);
  SignalTensor out(Shape{m, p});
  kernel::matmul_forward(m, n, p, av.data(), bv.data(), out.data());
  return a.graph().record(OpKind::matmul, {a, b}, std::move(out),
                          [m, n, p](std::span<const double> g, BackwardContext& ctx) {
                            double* da = ctx.wants(0) ? ctx.input_grad(0).data() : nullptr;
                            double* db = ctx.wants(1) ? ctx.input_grad(1).data() : nullptr;
                            kernel::matmul_backward(m, n, p, ctx.input(0).data(), ctx.input(1).data(),
                                                    g.data(), da, db);
                          });
}

Var sum(Var x) {
  const SignalTensor& xv = x.value();
  require(!xv.empty(), "sum: empty tensor");
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  return x.graph().record(OpKind::sum, {x}, SignalTensor::scalar(acc),
                          [](std::span<const double> g, BackwardContext& ctx) {
                            for (double& v : ctx.input_grad(0)) v += g[0];
                          });
}

Var mean(Var x) {
  const SignalTensor& xv = x.value();
  require(!xv.empty(), "mean: empty tensor");
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return x.graph().record(OpKind::mean, {x}, SignalTensor::scalar(acc * inv),
                          [inv](std::span<const double> g, BackwardContext& ctx) {
                            for (double& v : ctx.input_grad(0)) v += g[0] * inv;
                          });
}

Var mean_last_axis(Var x) {
  const SignalTensor& xv = x.value();
  require(xv.rank() >= 2 && !xv.empty(), "mean_last_axis: need a nonempty tensor of rank >= 2, got " +
                                             to_string(xv.shape()));
  const std::size_t inner = xv.shape().back();
  const std::size_t outer = xv.size() / inner;
  Shape shape(xv.shape().begin(), xv.shape().end() - 1);
  SignalTensor out(shape);
  const double inv = 1.0 / static_cast<double>(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    double acc = 0.0;
    for (std::size_t t = 0; t < inner; ++t) acc += xv[o * inner + t];
    out[o] = acc * inv;
  }
  return x.graph().record(OpKind::mean_last_axis, {x}, std::move(out),
                          [inner, outer, inv](std::span<const double> g, BackwardContext& ctx) {
                            auto gx = ctx.input_grad(0);
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t t = 0; t < inner; ++t) gx[o * inner + t] += g[o] * inv;
                          });
}

Var frame(Var wave, std::size_t frame_len, std::size_t hop) {
  const SignalTensor& w = wave.value();
  require((w.rank() == 2 && w.dim(0) == 1) || (w.rank() == 3 && w.dim(1) == 1),
          "frame: expected [1 x T] or [B x 1 x T], got " + to_string(w.shape()));
  require(frame_len >= 1 && hop >= 1, "frame: frame_len and hop must be positive");
  const std::size_t batch = w.rank() == 3 ? w.dim(0) : 1;
  const std::size_t length = w.shape().back();
  require(length >= frame_len, "frame: signal length " + std::to_string(length) +
                                   " is shorter than frame_len " + std::to_string(frame_len));
  const std::size_t frames = (length - frame_len) / hop + 1;
  const std::size_t cols = batch * frames;
  SignalTensor out(Shape{frame_len, cols});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t n = 0; n < frame_len; ++n)
        out[n * cols + b * frames + f] = w[b * length + f * hop + n];
  return wave.graph().record(
      OpKind::frame, {wave}, std::move(out),
      [=](std::span<const double> g, BackwardContext& ctx) {
        auto gw = ctx.input_grad(0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t f = 0; f < frames; ++f)
            for (std::size_t n = 0; n < frame_len; ++n)
              gw[b * length + f * hop + n] += g[n * cols + b * frames + f];
      });
}

Var batch_major(Var x, std::size_t batch) {
  const SignalTensor& xv = x.value();
  require(xv.rank() == 2 && batch >= 1 && xv.dim(1) % batch == 0,
          "batch_major: expected [C x B*F] with B=" + std::to_string(batch) + ", got " +
              to_string(xv.shape()));
  const std::size_t channels = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  const std::size_t frames = cols / batch;
  SignalTensor out(Shape{batch, channels, frames});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t f = 0; f < frames; ++f)
        out[(b * channels + c) * frames + f] = xv[c * cols + b * frames + f];
  return x.graph().record(OpKind::batch_major, {x}, std::move(out),
                          [=](std::span<const double> g, BackwardContext& ctx) {
                            auto gx = ctx.input_grad(0);
                            for (std::size_t c = 0; c < channels; ++c)
                              for (std::size_t b = 0; b < batch; ++b)
                                for (std::size_t f = 0; f < frames; ++f)
                                  gx[c * cols + b * frames + f] += g[(b * channels + c) * frames + f];
                          });
}

Var upsample_zero(Var x, std::size_t factor) {
  const SignalTensor& xv = x.value();
  require(xv.rank() >= 1 && factor >= 1, "upsample_zero: invalid arguments");
  const std::size_t inner = xv.shape().back();
  const std::size_t outer = xv.size() / inner;
  Shape shape = xv.shape();
  shape.back() = inner * factor;
  SignalTensor out(shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t t = 0; t < inner; ++t) out[o * inner * factor + t * factor] = xv[o * inner + t];
  return x.graph().record(OpKind::upsample_zero, {x}, std::move(out),
                          [=](std::span<const double> g, BackwardContext& ctx) {
                            auto gx = ctx.input_grad(0);
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t t = 0; t < inner; ++t)
                                gx[o * inner + t] += g[o * inner * factor + t * factor];
                          });
}

Var reshape(Var x, Shape shape) {
  require(element_count(shape) == x.value().size(),
          "reshape: cannot view " + to_string(x.value().shape()) + " as " + to_string(shape));
  return x.graph().record(OpKind::reshape, {x}, x.value().reshaped(std::move(shape)),
                          [](std::span<const double> g, BackwardContext& ctx) {
                            auto gx = ctx.input_grad(0);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          });
}

Var detach(Var x) { return x.graph().constant(x.value()); }

}  // namespace postfilter::ad
