#pragma once

// Multi-head self-attention and the post-norm transformer encoder.

#include <cmath>
#include <string>
#include <vector>

#include "intentkit/nn/layers.hpp"

namespace intentkit::nn {

/// Per-position validity for a [B, T] batch; 1 marks a real token.
using Mask = std::vector<std::uint8_t>;

template <class Real>
struct AttentionCache {
  Tensor<Real> x, q, k, v, ctx;
  std::vector<Real> probs;  // [B, H, T, T]
};

template <class Real>
class MultiHeadAttention {
 public:
  Linear<Real> query, key, value, output;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, std::size_t d, std::size_t h, Rng& rng)
      : query(name + ".query", d, d, rng),
        key(name + ".key", d, d, rng),
        value(name + ".value", d, d, rng),
        output(name + ".output", d, d, rng),
        heads(h) {
    if (h == 0 || d % h != 0)
      throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(h) + " heads");
  }

  std::size_t dim() const { return query.in_dim(); }

  /// x is [B, T, D]; masked key positions receive exactly zero weight.
  Tensor<Real> forward(const Tensor<Real>& x, const Mask& mask, AttentionCache<Real>& c) const {
    check_shape(x.rank() == 3 && x.dim(2) == dim(), "attention: expected [B,T," + std::to_string(dim()) + "], got " +
                                                         shape_string(x.shape));
    const std::size_t B = x.dim(0), T = x.dim(1), D = dim(), H = heads, dh = D / H;
    check_shape(mask.size() == B * T, "attention: mask size mismatch");
    c.x = x;
    c.q = query.forward(x);
    c.k = key.forward(x);
    c.v = value.forward(x);
    c.ctx = Tensor<Real>(x.shape);
    c.probs.assign(B * H * T * T, Real(0));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> scores(T);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t t = 0; t < T; ++t) {
          const Real* qv = c.q.row(b * T + t) + h * dh;
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t s = 0; s < T; ++s) {
            if (!mask[b * T + s]) continue;
            scores[s] = kernel::dot(qv, c.k.row(b * T + s) + h * dh, dh) * scale;
            m = std::max(m, scores[s]);
          }
          double z = 0;
          for (std::size_t s = 0; s < T; ++s) {
            if (!mask[b * T + s]) continue;
            scores[s] = std::exp(scores[s] - m);
            z += scores[s];
          }
          Real* p = &c.probs[((b * H + h) * T + t) * T];
          Real* out = c.ctx.row(b * T + t) + h * dh;
          for (std::size_t s = 0; s < T; ++s) {
            if (!mask[b * T + s]) continue;
            p[s] = static_cast<Real>(scores[s] / z);
            kernel::axpy(out, c.v.row(b * T + s) + h * dh, p[s], dh);
          }
        }
      }
    }
    return output.forward(c.ctx);
  }

  /// Attention weights [B, H, T, T] from the last forward (for inspection).
  static const std::vector<Real>& weights(const AttentionCache<Real>& c) { return c.probs; }

  Tensor<Real> backward(const AttentionCache<Real>& c, const Tensor<Real>& dout) {
    const std::size_t B = c.x.dim(0), T = c.x.dim(1), D = dim(), H = heads, dh = D / H;
    Tensor<Real> dctx = output.backward(c.ctx, dout);
    Tensor<Real> dq(c.x.shape), dk(c.x.shape), dv(c.x.shape);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> dp(T);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t t = 0; t < T; ++t) {
          const Real* p = &c.probs[((b * H + h) * T + t) * T];
          const Real* g = dctx.row(b * T + t) + h * dh;
          double weighted = 0;
          for (std::size_t s = 0; s < T; ++s) {
            if (p[s] == Real(0)) {
              dp[s] = 0;
              continue;
            }
            dp[s] = kernel::dot(g, c.v.row(b * T + s) + h * dh, dh);
            weighted += p[s] * dp[s];
            kernel::axpy(dv.row(b * T + s) + h * dh, g, p[s], dh);
          }
          Real* dqr = dq.row(b * T + t) + h * dh;
          const Real* qr = c.q.row(b * T + t) + h * dh;
          for (std::size_t s = 0; s < T; ++s) {
            if (p[s] == Real(0)) continue;
            const auto ds = static_cast<Real>(p[s] * (dp[s] - weighted) * scale);
            kernel::axpy(dqr, c.k.row(b * T + s) + h * dh, ds, dh);
            kernel::axpy(dk.row(b * T + s) + h * dh, qr, ds, dh);
          }
        }
      }
    }
    Tensor<Real> dx = query.backward(c.x, dq);
    Tensor<Real> dxk = key.backward(c.x, dk);
    Tensor<Real> dxv = value.backward(c.x, dv);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxk[i] + dxv[i];
    return dx;
  }

  /// The key bias is left out: it shifts every score of a query equally, so
  /// it has no effect on the output and stays fixed at zero.
  void collect(ParamList<Real>& out) {
    query.collect(out);
    out.push_back(&key.weight);
    value.collect(out);
    output.collect(out);
  }
};

template <class Real>
struct BlockCache {
  AttentionCache<Real> attn;
  std::vector<Real> attn_drop;
  LayerNormCache<Real> ln1;
  Tensor<Real> h1;      // output of the first norm
  Tensor<Real> ff_pre;  // first feed-forward pre-activation
  Tensor<Real> ff_act;
  std::vector<Real> ff_drop;
  LayerNormCache<Real> ln2;
};

/// attention -> dropout -> residual -> norm -> feed-forward -> dropout -> residual -> norm
template <class Real>
class TransformerBlock {
 public:
  MultiHeadAttention<Real> attention;
  LayerNorm<Real> norm1;
  Linear<Real> ff_in;
  Linear<Real> ff_out;
  LayerNorm<Real> norm2;
  double dropout_rate = 0.0;

  TransformerBlock() = default;
  TransformerBlock(const std::string& name, std::size_t d, std::size_t heads, std::size_t ff, double dropout,
                   Rng& rng)
      : attention(name + ".attention", d, heads, rng),
        norm1(name + ".norm1", d),
        ff_in(name + ".ff_in", d, ff, rng),
        ff_out(name + ".ff_out", ff, d, rng),
        norm2(name + ".norm2", d),
        dropout_rate(dropout) {}

  /// rng == nullptr means evaluation mode.
  Tensor<Real> forward(const Tensor<Real>& x, const Mask& mask, Rng* rng, BlockCache<Real>& c) const {
    Tensor<Real> a = attention.forward(x, mask, c.attn);
    c.attn_drop = dropout_mask<Real>(a.size(), dropout_rate, rng);
    apply_mask(a, c.attn_drop);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
    c.h1 = norm1.forward(a, c.ln1);
    c.ff_pre = ff_in.forward(c.h1);
    c.ff_act = gelu(c.ff_pre);
    Tensor<Real> f = ff_out.forward(c.ff_act);
    c.ff_drop = dropout_mask<Real>(f.size(), dropout_rate, rng);
    apply_mask(f, c.ff_drop);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += c.h1[i];
    return norm2.forward(f, c.ln2);
  }

  Tensor<Real> backward(const BlockCache<Real>& c, const Tensor<Real>& dy) {
    Tensor<Real> dsum2 = norm2.backward(c.ln2, dy);  // d(h1 + f)
    Tensor<Real> df = dsum2;
    apply_mask(df, c.ff_drop);
    Tensor<Real> dact = ff_out.backward(c.ff_act, df);
    Tensor<Real> dpre = gelu_backward(c.ff_pre, dact);
    Tensor<Real> dh1 = ff_in.backward(c.h1, dpre);
    for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] += dsum2[i];
    Tensor<Real> dsum1 = norm1.backward(c.ln1, dh1);  // d(x + a)
    Tensor<Real> da = dsum1;
    apply_mask(da, c.attn_drop);
    Tensor<Real> dx = attention.backward(c.attn, da);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dsum1[i];
    return dx;
  }

  void collect(ParamList<Real>& out) {
    attention.collect(out);
    norm1.collect(out);
    ff_in.collect(out);
    ff_out.collect(out);
    norm2.collect(out);
  }
};

template <class Real>
struct EncoderCache {
  std::vector<BlockCache<Real>> blocks;
};

template <class Real>
class TransformerEncoder {
 public:
  std::vector<TransformerBlock<Real>> blocks;

  TransformerEncoder() = default;
  TransformerEncoder(const std::string& name, std::size_t layers, std::size_t d, std::size_t heads, std::size_t ff,
                     double dropout, Rng& rng) {
    for (std::size_t l = 0; l < layers; ++l)
      blocks.emplace_back(name + "." + std::to_string(l), d, heads, ff, dropout, rng);
  }

  Tensor<Real> forward(const Tensor<Real>& x, const Mask& mask, Rng* rng, EncoderCache<Real>& c) const {
    c.blocks.resize(blocks.size());
    Tensor<Real> h = x;
    for (std::size_t l = 0; l < blocks.size(); ++l) h = blocks[l].forward(h, mask, rng, c.blocks[l]);
    return h;
  }

  Tensor<Real> backward(const EncoderCache<Real>& c, const Tensor<Real>& dy) {
    Tensor<Real> g = dy;
    for (std::size_t l = blocks.size(); l-- > 0;) g = blocks[l].backward(c.blocks[l], g);
    return g;
  }

  void collect(ParamList<Real>& out) {
    for (auto& b : blocks) b.collect(out);
  }
};

/// Convenience wrapper: eval-mode encoder forward without caller-held state.
template <class Real>
Tensor<Real> transformer_encode(const TransformerEncoder<Real>& enc, const Tensor<Real>& x, const Mask& mask) {
  EncoderCache<Real> cache;
  return enc.forward(x, mask, nullptr, cache);
}

}  // namespace intentkit::nn
