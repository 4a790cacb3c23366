#include "avaca/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "avaca/error.hpp"

namespace avaca::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Array& a) { return ConstMap(a.data().data(), a.rows(), a.cols()); }
MutMap as_matrix(Array& a) { return MutMap(a.mutable_data().data(), a.rows(), a.cols()); }

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(x.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

// Parent gradient buffer, or nullptr if that parent does not need one.
Array* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

Var finish(Array value, std::vector<Var> parents, std::function<void(Node&)> fn, const char* op) {
  value.require_finite(op);
  return make_node(std::move(value), std::move(parents), std::move(fn));
}

template <typename F>
Var unary_elementwise(const Var& x, F f, const char* op,
                      std::function<void(Node&)> bw) {
  Array out(x.shape());
  const auto in = x.value().data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return finish(std::move(out), {x}, std::move(bw), op);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.value().cols() != b.value().rows()) {
    throw DimensionError("matmul: inner dimensions of " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " do not agree");
  }
  Array out({a.value().rows(), b.value().cols()});
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  return finish(std::move(out), {a, b}, [](Node& self) {
    const ConstMap g = as_matrix(std::as_const(self.grad));
    if (Array* ga = grad_of(self, 0)) as_matrix(*ga).noalias() += g * as_matrix(self.parents[1]->value).transpose();
    if (Array* gb = grad_of(self, 1)) as_matrix(*gb).noalias() += as_matrix(self.parents[0]->value).transpose() * g;
  }, "matmul");
}

Var transpose(const Var& x) {
  require_rank(x, 2, "transpose");
  Array out({x.value().cols(), x.value().rows()});
  as_matrix(out) = as_matrix(x.value()).transpose();
  return finish(std::move(out), {x}, [](Node& self) {
    if (Array* g = grad_of(self, 0)) as_matrix(*g) += as_matrix(std::as_const(self.grad)).transpose();
  }, "transpose");
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Array out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.value()[i] + b.value()[i];
  return finish(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Array* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  }, "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Array out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.value()[i] - b.value()[i];
  return finish(std::move(out), {a, b}, [](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Array* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  }, "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Array out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.value()[i] * b.value()[i];
  return finish(std::move(out), {a, b}, [](Node& self) {
    const Array& av = self.parents[0]->value;
    const Array& bv = self.parents[1]->value;
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Array* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  }, "mul");
}

Var add_bias(const Var& x, const Var& bias) {
  require_rank(x, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " +
                         shape_string(x.shape()));
  }
  Array out(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out(r, c) = x.value()(r, c) + bias.value()[c];
  }
  return finish(std::move(out), {x, bias}, [m, n](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Array* g = grad_of(self, 1)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*g)[c] += self.grad[r * n + c];
      }
    }
  }, "add_bias");
}

Var affine(const Var& x, double a, double b) {
  return unary_elementwise(x, [a, b](double v) { return a * v + b; }, "affine", [a](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += a * self.grad[i];
    }
  });
}

Var broadcast_scalar(const Var& s, const Shape& shape) {
  if (s.value().size() != 1) throw DimensionError("broadcast_scalar: input shape " + shape_string(s.shape()));
  Array out = Array::filled(shape, s.value()[0]);
  return finish(std::move(out), {s}, [](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      double total = 0.0;
      for (double v : self.grad.data()) total += v;
      (*g)[0] += total;
    }
  }, "broadcast_scalar");
}

Var reshape(const Var& x, Shape shape) {
  Array out = x.value().reshaped(std::move(shape));
  return finish(std::move(out), {x}, [](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  }, "reshape");
}

Var relu(const Var& x) {
  return unary_elementwise(x, [](double v) { return v > 0.0 ? v : 0.0; }, "relu", [](Node& self) {
    const Array& in = self.parents[0]->value;
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (in[i] > 0.0) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sigmoid(const Var& x) {
  auto f = [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary_elementwise(x, f, "sigmoid", [](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double y = self.value[i];
        (*g)[i] += self.grad[i] * y * (1.0 - y);
      }
    }
  });
}

Var log_clamped(const Var& x, double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("log_clamped: need 0 < lo <= hi");
  return unary_elementwise(x, [lo, hi](double v) { return std::log(std::clamp(v, lo, hi)); }, "log_clamped",
                           [lo, hi](Node& self) {
                             const Array& in = self.parents[0]->value;
                             if (Array* g = grad_of(self, 0)) {
                               for (std::size_t i = 0; i < g->size(); ++i) {
                                 if (in[i] > lo && in[i] < hi) (*g)[i] += self.grad[i] / in[i];
                               }
                             }
                           });
}

Var square(const Var& x) {
  return unary_elementwise(x, [](double v) { return v * v; }, "square", [](Node& self) {
    const Array& in = self.parents[0]->value;
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += 2.0 * in[i] * self.grad[i];
    }
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return finish(Array::scalar(total), {x}, [](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0];
    }
  }, "sum");
}

Var mean(const Var& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ContractError("mean: empty array");
  return affine(sum(x), 1.0 / static_cast<double>(n), 0.0);
}

Var softmax_rows(const Var& x, double scale) {
  if (!(scale > 0.0)) throw ParameterError("softmax_rows: scale must be positive, got " + std::to_string(scale));
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  Array out(x.shape());
  for (std::size_t r = 0; r < m; ++r) {
    double peak = x.value()(r, 0) / scale;
    for (std::size_t c = 1; c < n; ++c) peak = std::max(peak, x.value()(r, c) / scale);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      out(r, c) = std::exp(x.value()(r, c) / scale - peak);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < n; ++c) out(r, c) /= z;
  }
  return finish(std::move(out), {x}, [m, n, scale](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += self.grad(r, c) * self.value(r, c);
        for (std::size_t c = 0; c < n; ++c) (*g)(r, c) += self.value(r, c) * (self.grad(r, c) - dot) / scale;
      }
    }
  }, "softmax_rows");
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Array out({m, w});
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < w; ++c) out(r, c) = x.value()(r, begin + c);
  }
  return finish(std::move(out), {x}, [m, w, begin](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < w; ++c) (*g)(r, begin + c) += self.grad(r, c);
      }
    }
  }, "slice_cols");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts.front().value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.value().rows() != m) {
      throw DimensionError("concat_cols: row counts differ (" + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()) + ")");
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Array out({m, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < widths[i]; ++c) out(r, offset + c) = parts[i].value()(r, c);
    }
    offset += widths[i];
  }
  return finish(std::move(out), parts, [m, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (Array* g = grad_of(self, i)) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < widths[i]; ++c) (*g)(r, c) += self.grad(r, off + c);
        }
      }
      off += widths[i];
    }
  }, "concat_cols");
}

Var row_diff(const Var& x) {
  require_rank(x, 2, "row_diff");
  const std::size_t t = x.value().rows(), d = x.value().cols();
  if (t < 2) throw SequenceTooShortError("row_diff: need at least 2 rows, got " + std::to_string(t));
  Array out({t - 1, d});
  for (std::size_t r = 0; r + 1 < t; ++r) {
    for (std::size_t c = 0; c < d; ++c) out(r, c) = x.value()(r + 1, c) - x.value()(r, c);
  }
  return finish(std::move(out), {x}, [t, d](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r + 1 < t; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          (*g)(r + 1, c) += self.grad(r, c);
          (*g)(r, c) -= self.grad(r, c);
        }
      }
    }
  }, "row_diff");
}

Var gather(const Var& x, std::span<const std::size_t> indices) {
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> vals;
  vals.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= x.value().size()) {
      throw DimensionError("gather: index " + std::to_string(i) + " out of range for " + shape_string(x.shape()));
    }
    vals.push_back(x.value()[i]);
  }
  return finish(Array::vector(std::move(vals)), {x}, [idx](Node& self) {
    if (Array* g = grad_of(self, 0)) {
      for (std::size_t k = 0; k < idx.size(); ++k) (*g)[idx[k]] += self.grad[k];
    }
  }, "gather");
}

Var conv1d(const Var& seq, const Var& kernel, const Var& bias) {
  require_rank(seq, 2, "conv1d");
  require_rank(kernel, 3, "conv1d");
  require_rank(bias, 1, "conv1d");
  const std::size_t t = seq.value().rows(), d_in = seq.value().cols();
  const std::size_t w = kernel.shape()[0], d_out = kernel.shape()[2];
  if (w % 2 == 0) throw ParameterError("conv1d: kernel width must be odd, got " + std::to_string(w));
  if (t == 0) throw DimensionError("conv1d: empty sequence");
  if (kernel.shape()[1] != d_in || bias.value().size() != d_out) {
    throw DimensionError("conv1d: sequence " + shape_string(seq.shape()) + ", kernel " +
                         shape_string(kernel.shape()) + " and bias " + shape_string(bias.shape()) +
                         " are incompatible");
  }
  const long half = static_cast<long>(w / 2);
  const long tl = static_cast<long>(t);
  // Rows [lo, hi) of the output read input rows shifted by tap - half.
  auto tap_range = [half, tl](long tap) {
    const long shift = tap - half;
    const long lo = std::max(0L, -shift);
    const long hi = std::min(tl, tl - shift);
    return std::tuple{shift, lo, hi};
  };

  Array out({t, d_out});
  {
    MutMap o = as_matrix(out);
    const ConstMap in = as_matrix(seq.value());
    for (std::size_t c = 0; c < d_out; ++c) o.col(c).setConstant(bias.value()[c]);
    for (long tap = 0; tap < static_cast<long>(w); ++tap) {
      auto [shift, lo, hi] = tap_range(tap);
      if (hi <= lo) continue;
      const ConstMap k(kernel.value().data().data() + tap * d_in * d_out, d_in, d_out);
      o.middleRows(lo, hi - lo).noalias() += in.middleRows(lo + shift, hi - lo) * k;
    }
  }
  return finish(std::move(out), {seq, kernel, bias}, [tap_range, w, d_in, d_out](Node& self) {
    const ConstMap g = as_matrix(std::as_const(self.grad));
    const Array& kv = self.parents[1]->value;
    Array* gs = grad_of(self, 0);
    Array* gk = grad_of(self, 1);
    for (long tap = 0; tap < static_cast<long>(w); ++tap) {
      auto [shift, lo, hi] = tap_range(tap);
      if (hi <= lo) continue;
      if (gs) {
        const ConstMap k(kv.data().data() + tap * d_in * d_out, d_in, d_out);
        as_matrix(*gs).middleRows(lo + shift, hi - lo).noalias() += g.middleRows(lo, hi - lo) * k.transpose();
      }
      if (gk) {
        MutMap dk(gk->mutable_data().data() + tap * d_in * d_out, d_in, d_out);
        dk.noalias() += as_matrix(self.parents[0]->value).middleRows(lo + shift, hi - lo).transpose() *
                        g.middleRows(lo, hi - lo);
      }
    }
    if (Array* gb = grad_of(self, 2)) {
      for (std::size_t c = 0; c < d_out; ++c) (*gb)[c] += g.col(c).sum();
    }
  }, "conv1d");
}

Var conv2d(const Var& map, const Var& kernel, const Var& bias) {
  require_rank(map, 2, "conv2d");
  require_rank(kernel, 3, "conv2d");
  require_rank(bias, 1, "conv2d");
  const std::size_t rows = map.value().rows(), cols = map.value().cols();
  const std::size_t kh = kernel.shape()[0], kw = kernel.shape()[1], ch = kernel.shape()[2];
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ParameterError("conv2d: kernel dims must be odd, got " + shape_string(kernel.shape()));
  }
  if (bias.value().size() != ch) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match kernel " +
                         shape_string(kernel.shape()));
  }
  const long hh = static_cast<long>(kh / 2), hw = static_cast<long>(kw / 2);
  const long R = static_cast<long>(rows), C = static_cast<long>(cols);

  Array out({rows, cols, ch});
  {
    const double* in = map.value().data().data();
    const double* k = kernel.value().data().data();
    double* o = out.mutable_data().data();
    for (long i = 0; i < R; ++i) {
      for (long j = 0; j < C; ++j) {
        double* cell = o + (i * C + j) * ch;
        for (std::size_t c = 0; c < ch; ++c) cell[c] = bias.value()[c];
      }
    }
    for (long u = 0; u < static_cast<long>(kh); ++u) {
      for (long v = 0; v < static_cast<long>(kw); ++v) {
        const double* tap = k + (u * kw + v) * ch;
        const long di = u - hh, dj = v - hw;
        for (long i = std::max(0L, -di); i < std::min(R, R - di); ++i) {
          const double* src = in + (i + di) * C;
          double* dst = o + i * C * ch;
          for (long j = std::max(0L, -dj); j < std::min(C, C - dj); ++j) {
            const double x = src[j + dj];
            double* cell = dst + j * ch;
            for (std::size_t c = 0; c < ch; ++c) cell[c] += x * tap[c];
          }
        }
      }
    }
  }
  return finish(std::move(out), {map, kernel, bias}, [R, C, kh, kw, ch, hh, hw](Node& self) {
    const double* g = self.grad.data().data();
    const double* in = self.parents[0]->value.data().data();
    const double* k = self.parents[1]->value.data().data();
    Array* gm = grad_of(self, 0);
    Array* gk = grad_of(self, 1);
    for (long u = 0; u < static_cast<long>(kh); ++u) {
      for (long v = 0; v < static_cast<long>(kw); ++v) {
        const std::size_t tap_off = (u * kw + v) * ch;
        const long di = u - hh, dj = v - hw;
        for (long i = std::max(0L, -di); i < std::min(R, R - di); ++i) {
          for (long j = std::max(0L, -dj); j < std::min(C, C - dj); ++j) {
            const double* cell = g + (i * C + j) * ch;
            const std::size_t src = (i + di) * C + (j + dj);
            if (gm) {
              double acc = 0.0;
              for (std::size_t c = 0; c < ch; ++c) acc += cell[c] * k[tap_off + c];
              (*gm)[src] += acc;
            }
            if (gk) {
              const double x = in[src];
              for (std::size_t c = 0; c < ch; ++c) (*gk)[tap_off + c] += cell[c] * x;
            }
          }
        }
      }
    }
    if (Array* gb = grad_of(self, 2)) {
      const std::size_t n = static_cast<std::size_t>(R * C);
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < ch; ++c) (*gb)[c] += g[p * ch + c];
      }
    }
  }, "conv2d");
}

Var channel_mix(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 3, "channel_mix");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1], ch = x.shape()[2];
  if (weight.value().size() != ch || bias.value().size() != 1) {
    throw DimensionError("channel_mix: input " + shape_string(x.shape()) + ", weight " +
                         shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  const std::size_t n = rows * cols;
  Array out({rows, cols});
  const double* in = x.value().data().data();
  const double* w = weight.value().data().data();
  const double b = bias.value()[0];
  for (std::size_t p = 0; p < n; ++p) {
    double acc = b;
    for (std::size_t c = 0; c < ch; ++c) acc += in[p * ch + c] * w[c];
    out[p] = acc;
  }
  return finish(std::move(out), {x, weight, bias}, [n, ch](Node& self) {
    const double* in = self.parents[0]->value.data().data();
    const double* w = self.parents[1]->value.data().data();
    if (Array* gx = grad_of(self, 0)) {
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < ch; ++c) (*gx)[p * ch + c] += self.grad[p] * w[c];
      }
    }
    if (Array* gw = grad_of(self, 1)) {
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < ch; ++c) (*gw)[c] += self.grad[p] * in[p * ch + c];
      }
    }
    if (Array* gb = grad_of(self, 2)) {
      double total = 0.0;
      for (std::size_t p = 0; p < n; ++p) total += self.grad[p];
      (*gb)[0] += total;
    }
  }, "channel_mix");
}

}  // namespace avaca::ops
