#include "tslab/ops.hpp"

#include <algorithm>
#include <utility>
#include <cmath>
#include <limits>
#include <numeric>

#include "kernels.hpp"
#include "tslab/errors.hpp"

namespace tslab {

namespace {

using detail::TensorNode;

// Number of times `b` repeats across `a` under suffix broadcasting.
std::size_t broadcast_outer(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  // A one-element b broadcasts everywhere.
  if (!ok && b.numel() == 1) ok = true;
  if (!ok) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(sb) + " does not broadcast onto " +
                         shape_str(sa));
  }
  return a.numel() / b.numel();
}

void accumulate(std::vector<float>& dst, std::span<const float> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const std::size_t outer = broadcast_outer(a, b, name);
  const std::size_t inner = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<float> out(a.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    const float* ap = ad.data() + o * inner;
    float* op = out.data() + o * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      switch (kind) {
        case BinaryKind::add: op[i] = ap[i] + bd[i]; break;
        case BinaryKind::sub: op[i] = ap[i] - bd[i]; break;
        case BinaryKind::mul: op[i] = ap[i] * bd[i]; break;
      }
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [outer, inner, kind](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    const float* g = self.grad.data();
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      if (kind == BinaryKind::mul) {
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < inner; ++i) ga[o * inner + i] += g[o * inner + i] * nb.data[i];
      } else {
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      const float sign = kind == BinaryKind::sub ? -1.0f : 1.0f;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          const float gi = g[o * inner + i];
          gb[i] += kind == BinaryKind::mul ? gi * na.data[o * inner + i] : sign * gi;
        }
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul, "mul"); }

Tensor scale(const Tensor& x, float factor) {
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v *= factor;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [factor](TensorNode& self) {
    auto& gx = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * self.grad[i];
  });
}

namespace {
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
thread_local ReluPatternProbe* g_relu_probe = nullptr;
}  // namespace

ReluPatternProbe::ReluPatternProbe() : previous_(g_relu_probe), hash_(kFnvOffset) { g_relu_probe = this; }

ReluPatternProbe::~ReluPatternProbe() { g_relu_probe = previous_; }

void ReluPatternProbe::record(std::span<const float> x) {
  for (float v : x) hash_ = (hash_ ^ static_cast<std::uint64_t>(v > 0.0f)) * kFnvPrime;
  hash_ = (hash_ ^ x.size()) * kFnvPrime;
}

std::uint64_t ReluPatternProbe::take() { return std::exchange(hash_, kFnvOffset); }

Tensor relu(const Tensor& x) {
  if (g_relu_probe) g_relu_probe->record(x.data());
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v = v > 0.0f ? v : 0.0f;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& nx = *self.parents[0];
    auto& gx = nx.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += nx.data[i] > 0.0f ? self.grad[i] : 0.0f;
  });
}

namespace {
constexpr float kGeluC = 0.7978845608f;  // sqrt(2/pi)
constexpr float kGeluK = 0.044715f;
}  // namespace

Tensor gelu(const Tensor& x) {
  auto xd = x.data();
  std::vector<float> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const float v = xd[i];
    out[i] = 0.5f * v * (1.0f + std::tanh(kGeluC * (v + kGeluK * v * v * v)));
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& nx = *self.parents[0];
    auto& gx = nx.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const float v = nx.data[i];
      const float t = std::tanh(kGeluC * (v + kGeluK * v * v * v));
      const float d = 0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * kGeluC * (1.0f + 3.0f * kGeluK * v * v);
      gx[i] += d * self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.rank() < 1 || b.rank() != 2) {
    throw DimensionError("matmul: expected a[..., k] and b of rank 2, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t k = a.shape().back();
  const std::size_t bk = trans_b ? b.dim(1) : b.dim(0);
  const std::size_t n = trans_b ? b.dim(0) : b.dim(1);
  if (k != bk) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + (trans_b ? "^T" : ""));
  }
  const std::size_t m = a.numel() / k;
  std::vector<float> out(m * n, 0.0f);
  std::vector<float> scratch;
  if (trans_b) {
    kernels::mm_nt(m, k, n, a.data().data(), b.data().data(), out.data(), scratch);
  } else {
    kernels::mm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  }
  Shape shape = a.shape();
  shape.back() = n;
  return Tensor::make_result(std::move(shape), std::move(out), {a, b}, [m, k, n, trans_b](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    const float* g = self.grad.data();
    std::vector<float> scratch;
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      if (trans_b) {
        kernels::mm_nn(m, n, k, g, nb.data.data(), ga.data());
      } else {
        kernels::mm_nt(m, n, k, g, nb.data.data(), ga.data(), scratch);
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      if (trans_b) {
        kernels::mm_tn(m, n, k, g, na.data.data(), gb.data());
      } else {
        kernels::mm_tn(m, k, n, na.data.data(), g, gb.data());
      }
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw DimensionError("bmm: expected matching rank-3 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t groups = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t k = a.dim(2);
  const std::size_t bk = trans_b ? b.dim(2) : b.dim(1);
  const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
  if (k != bk) {
    throw DimensionError("bmm: inner dimensions differ for " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + (trans_b ? "^T" : ""));
  }
  std::vector<float> out(groups * m * n, 0.0f);
  std::vector<float> scratch;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const float* ap = a.data().data() + gi * m * k;
    const float* bp = b.data().data() + gi * k * n;
    float* cp = out.data() + gi * m * n;
    if (trans_b) {
      kernels::mm_nt(m, k, n, ap, bp, cp, scratch);
    } else {
      kernels::mm_nn(m, k, n, ap, bp, cp);
    }
  }
  return Tensor::make_result({groups, m, n}, std::move(out), {a, b},
                             [groups, m, k, n, trans_b](TensorNode& self) {
    TensorNode& na = *self.parents[0];
    TensorNode& nb = *self.parents[1];
    std::vector<float> scratch;
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const float* g = self.grad.data() + gi * m * n;
      const float* ap = na.data.data() + gi * m * k;
      const float* bp = nb.data.data() + gi * k * n;
      if (na.requires_grad) {
        float* ga = na.ensure_grad().data() + gi * m * k;
        if (trans_b) {
          kernels::mm_nn(m, n, k, g, bp, ga);
        } else {
          kernels::mm_nt(m, n, k, g, bp, ga, scratch);
        }
      }
      if (nb.requires_grad) {
        float* gb = nb.ensure_grad().data() + gi * k * n;
        if (trans_b) {
          kernels::mm_tn(m, n, k, g, ap, gb);
        } else {
          kernels::mm_tn(m, k, n, ap, g, gb);
        }
      }
    }
  });
}

Tensor softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  auto xd = x.data();
  std::vector<float> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xp = xd.data() + r * n;
    float* op = out.data() + r * n;
    const float mx = *std::max_element(xp, xp + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      op[i] = std::exp(xp[i] - mx);
      total += op[i];
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::size_t i = 0; i < n; ++i) op[i] *= inv;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [rows, n](TensorNode& self) {
    auto& gx = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const float* y = self.data.data() + r * n;
      const float* g = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(g[i]) * y[i];
      const float d = static_cast<float>(dot);
      for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += y[i] * (g[i] - d);
    }
  });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps) {
  const std::size_t d = x.shape().back();
  if (gain.rank() != 1 || gain.dim(0) != d) {
    throw DimensionError("rms_norm: gain " + shape_str(gain.shape()) + " does not match last axis of " +
                         shape_str(x.shape()));
  }
  if (!(eps > 0.0f)) throw ContractError("rms_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  auto xd = x.data();
  auto gd = gain.data();
  std::vector<float> out(xd.size());
  std::vector<float> inv_rms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xp = xd.data() + r * d;
    double ss = 0.0;
    for (std::size_t i = 0; i < d; ++i) ss += static_cast<double>(xp[i]) * xp[i];
    const float inv = static_cast<float>(1.0 / std::sqrt(ss / static_cast<double>(d) + eps));
    inv_rms[r] = inv;
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = gd[i] * xp[i] * inv;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, gain},
                             [rows, d, inv_rms = std::move(inv_rms)](TensorNode& self) {
    TensorNode& nx = *self.parents[0];
    TensorNode& ng = *self.parents[1];
    for (std::size_t r = 0; r < rows; ++r) {
      const float* xp = nx.data.data() + r * d;
      const float* g = self.grad.data() + r * d;
      const float inv = inv_rms[r];
      if (ng.requires_grad) {
        auto& gg = ng.ensure_grad();
        for (std::size_t i = 0; i < d; ++i) gg[i] += g[i] * xp[i] * inv;
      }
      if (nx.requires_grad) {
        auto& gx = nx.ensure_grad();
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += static_cast<double>(g[i]) * ng.data[i] * xp[i];
        const float coef = static_cast<float>(dot / static_cast<double>(d)) * inv * inv * inv;
        for (std::size_t i = 0; i < d; ++i) gx[r * d + i] += inv * g[i] * ng.data[i] - coef * xp[i];
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> indices) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be rank 2, got " + shape_str(table.shape()));
  if (indices.empty()) throw ContractError("embedding: no indices");
  const std::size_t rows = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<std::int32_t> idx(indices.begin(), indices.end());
  std::vector<float> out(idx.size() * d);
  auto td = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= rows) {
      throw ContractError("embedding: index " + std::to_string(idx[i]) + " outside table of " +
                          std::to_string(rows) + " rows");
    }
    std::copy_n(td.data() + static_cast<std::size_t>(idx[i]) * d, d, out.data() + i * d);
  }
  const std::size_t n = idx.size();
  return Tensor::make_result({n, d}, std::move(out), {table}, [d, idx = std::move(idx)](TensorNode& self) {
    auto& gt = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      float* dst = gt.data() + static_cast<std::size_t>(idx[i]) * d;
      const float* src = self.grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range for " + shape_str(s0));
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  std::size_t trailing = 1;
  for (std::size_t i = axis + 1; i < s0.size(); ++i) trailing *= s0[i];
  Shape shape = s0;
  shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(s0));
    shape[axis] += s[axis];
    widths.push_back(s[axis] * trailing);
  }
  const std::size_t row = shape[axis] * trailing;
  std::vector<float> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * widths[p], widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  return Tensor::make_result(std::move(shape), std::move(out), parts,
                             [outer, row, widths = std::move(widths)](TensorNode& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      TensorNode& np = *self.parents[p];
      if (np.requires_grad) {
        auto& gp = np.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < widths[p]; ++i) gp[o * widths[p] + i] += self.grad[o * row + off + i];
        }
      }
      off += widths[p];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](TensorNode& self) {
    accumulate(self.parents[0]->ensure_grad(), self.grad);
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const Shape& in = x.shape();
  const std::size_t rank = in.size();
  if (perm.size() != rank) throw DimensionError("permute: rank mismatch for " + shape_str(in));
  std::vector<bool> used(rank, false);
  for (std::size_t p : perm) {
    if (p >= rank || used[p]) throw ContractError("permute: invalid permutation");
    used[p] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in[perm[i]];
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
  // Stride in the input for each output axis.
  std::vector<std::size_t> src_stride(rank);
  for (std::size_t i = 0; i < rank; ++i) src_stride[i] = in_strides[perm[i]];

  // Map from output flat index to input flat index.
  std::vector<std::size_t> gather(x.numel());
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < gather.size(); ++flat) {
    gather[flat] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++counter[ax];
      src += src_stride[ax];
      if (counter[ax] < out_shape[ax]) break;
      src -= src_stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  auto xd = x.data();
  std::vector<float> out(gather.size());
  for (std::size_t i = 0; i < gather.size(); ++i) out[i] = xd[gather[i]];
  return Tensor::make_result(std::move(out_shape), std::move(out), {x}, [gather = std::move(gather)](TensorNode& self) {
    auto& gx = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < gather.size(); ++i) gx[gather[i]] += self.grad[i];
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& in = x.shape();
  if (axis >= in.size() || begin >= end || end > in[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " invalid for " + shape_str(in));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  std::size_t trailing = 1;
  for (std::size_t i = axis + 1; i < in.size(); ++i) trailing *= in[i];
  const std::size_t row_in = in[axis] * trailing;
  const std::size_t row_out = (end - begin) * trailing;
  const std::size_t skip = begin * trailing;
  std::vector<float> out(outer * row_out);
  auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.data() + o * row_in + skip, row_out, out.data() + o * row_out);
  }
  Shape shape = in;
  shape[axis] = end - begin;
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [outer, row_in, row_out, skip](TensorNode& self) {
    auto& gx = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < row_out; ++i) gx[o * row_in + skip + i] += self.grad[o * row_out + i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  Tensor out = Tensor::make_result({1}, {static_cast<float>(total)}, {x}, [](TensorNode& self) {
    auto& gx = self.parents[0]->ensure_grad();
    const float g = self.grad[0];
    for (float& v : gx) v += g;
  });
  out.node()->exact = total;
  return out;
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  const double n = static_cast<double>(x.numel());
  Tensor out = Tensor::make_result({1}, {static_cast<float>(total / n)}, {x}, [n](TensorNode& self) {
    auto& gx = self.parents[0]->ensure_grad();
    const float g = static_cast<float>(self.grad[0] / n);
    for (float& v : gx) v += g;
  });
  out.node()->exact = total / n;
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> mask) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [n, c], got " + shape_str(logits.shape()));
  const std::size_t rows = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " rows");
  }
  if (!mask.empty() && mask.size() != rows) throw DimensionError("cross_entropy: mask length mismatch");
  std::vector<std::uint8_t> active(rows, 1);
  if (!mask.empty()) std::copy(mask.begin(), mask.end(), active.begin());
  const std::size_t count = static_cast<std::size_t>(std::count(active.begin(), active.end(), 1));
  if (count == 0) throw ContractError("cross_entropy: every position is masked");

  auto ld = logits.data();
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  // Softmax rows are cached for the backward pass.
  std::vector<float> probs(ld.size());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* z = ld.data() + r * classes;
    float* p = probs.data() + r * classes;
    const float mx = *std::max_element(z, z + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(z[c]) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) p[c] = static_cast<float>(std::exp(z[c] - lse));
    if (!active[r]) continue;
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= classes) {
      throw ContractError("cross_entropy: target " + std::to_string(tgt[r]) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    total += lse - z[tgt[r]];
  }
  const double n = static_cast<double>(count);
  Tensor out = Tensor::make_result(
      {1}, {static_cast<float>(total / n)}, {logits},
      [rows, classes, n, tgt = std::move(tgt), active = std::move(active), probs = std::move(probs)](TensorNode& self) {
        auto& gz = self.parents[0]->ensure_grad();
        const float g = static_cast<float>(self.grad[0] / n);
        for (std::size_t r = 0; r < rows; ++r) {
          if (!active[r]) continue;
          const float* p = probs.data() + r * classes;
          float* dst = gz.data() + r * classes;
          for (std::size_t c = 0; c < classes; ++c) dst[c] += g * p[c];
          dst[tgt[r]] -= g;
        }
      });
  out.node()->exact = total / n;
  return out;
}

}  // namespace tslab
