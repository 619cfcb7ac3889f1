#include "lol/toymodel/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lol/error.hpp"
#include "transformer_ops.hpp"

namespace lol::toymodel {

namespace {

constexpr float kNormEps = 1e-5f;

// y[T,out] = x[T,in] W[in,out]
void matmul(const float* x, const float* w, float* y, int rows, int in, int out) {
  std::fill(y, y + static_cast<std::size_t>(rows) * out, 0.0f);
  for (int t = 0; t < rows; ++t) {
    float* yr = y + static_cast<std::size_t>(t) * out;
    const float* xr = x + static_cast<std::size_t>(t) * in;
    for (int i = 0; i < in; ++i) {
      const float xi = xr[i];
      const float* wr = w + static_cast<std::size_t>(i) * out;
      for (int j = 0; j < out; ++j) yr[j] += xi * wr[j];
    }
  }
}

// dx += dy W^T ; dW += x^T dy
void matmul_backward(const float* dy, const float* x, const float* w, float* dx, float* dw,
                     int rows, int in, int out) {
  for (int t = 0; t < rows; ++t) {
    const float* dyr = dy + static_cast<std::size_t>(t) * out;
    const float* xr = x + static_cast<std::size_t>(t) * in;
    float* dxr = dx + static_cast<std::size_t>(t) * in;
    for (int i = 0; i < in; ++i) {
      const float* wr = w + static_cast<std::size_t>(i) * out;
      float* dwr = dw + static_cast<std::size_t>(i) * out;
      const float xi = xr[i];
      float acc = 0.0f;
      for (int j = 0; j < out; ++j) {
        acc += dyr[j] * wr[j];
        dwr[j] += xi * dyr[j];
      }
      dxr[i] += acc;
    }
  }
}

void rmsnorm(const float* x, const float* g, float* y, float* rinv, int rows, int d) {
  for (int t = 0; t < rows; ++t) {
    const float* xr = x + static_cast<std::size_t>(t) * d;
    float* yr = y + static_cast<std::size_t>(t) * d;
    float ms = 0.0f;
    for (int i = 0; i < d; ++i) ms += xr[i] * xr[i];
    ms /= static_cast<float>(d);
    const float r = 1.0f / std::sqrt(ms + kNormEps);
    rinv[t] = r;
    for (int i = 0; i < d; ++i) yr[i] = g[i] * xr[i] * r;
  }
}

// dx += d/dx, dg += d/dg
void rmsnorm_backward(const float* dy, const float* x, const float* g, const float* rinv,
                      float* dx, float* dg, int rows, int d) {
  for (int t = 0; t < rows; ++t) {
    const float* dyr = dy + static_cast<std::size_t>(t) * d;
    const float* xr = x + static_cast<std::size_t>(t) * d;
    float* dxr = dx + static_cast<std::size_t>(t) * d;
    const float r = rinv[t];
    float dot = 0.0f;
    for (int i = 0; i < d; ++i) {
      const float xhat = xr[i] * r;
      dg[i] += dyr[i] * xhat;
      dot += dyr[i] * g[i] * xhat;
    }
    dot /= static_cast<float>(d);
    for (int i = 0; i < d; ++i) {
      const float xhat = xr[i] * r;
      dxr[i] += r * (dyr[i] * g[i] - xhat * dot);
    }
  }
}

}  // namespace

std::size_t TensorInfo::numel() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

void ModelConfig::validate() const {
  if (vocab_size <= 0 || n_layers <= 0 || d_model <= 0 || n_heads <= 0 || d_ff <= 0 ||
      max_seq_len <= 0) {
    throw ValidationError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("n_heads (" + std::to_string(n_heads) + ") must divide d_model (" +
                          std::to_string(d_model) + ")");
  }
}

ParamLayout::ParamLayout(const ModelConfig& c) {
  const auto V = static_cast<std::size_t>(c.vocab_size);
  const auto T = static_cast<std::size_t>(c.max_seq_len);
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto ff = static_cast<std::size_t>(c.d_ff);
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    TensorInfo info{std::move(name), total, std::move(shape)};
    total += info.numel();
    tensors.push_back(info);
    return info.offset;
  };
  tok_emb = add("tok_emb", {V, d});
  pos_emb = add("pos_emb", {T, d});
  for (int b = 0; b < c.n_layers; ++b) {
    const std::string p = "block" + std::to_string(b + 1) + ".";
    Block blk{};
    blk.ln1 = add(p + "ln1", {d});
    blk.wq = add(p + "wq", {d, d});
    blk.wk = add(p + "wk", {d, d});
    blk.wv = add(p + "wv", {d, d});
    blk.wo = add(p + "wo", {d, d});
    blk.ln2 = add(p + "ln2", {d});
    blk.w1 = add(p + "w1", {d, ff});
    blk.w2 = add(p + "w2", {ff, d});
    blocks.push_back(blk);
  }
  lnf = add("lnf", {d});
  unembed = add("unembed", {d, V});
}

std::uint64_t ModelParams::checksum() const {
  return fnv1a64(weights.data(), weights.size() * sizeof(float));
}

bool ModelParams::all_finite() const {
  return std::all_of(weights.begin(), weights.end(), [](float w) { return std::isfinite(w); });
}

ModelParams init_params(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed) {
  config.validate();
  if (vocab.size() != static_cast<std::size_t>(config.vocab_size)) {
    throw ValidationError("vocabulary size " + std::to_string(vocab.size()) +
                          " does not match config vocab_size " + std::to_string(config.vocab_size));
  }
  ModelParams m;
  m.config = config;
  m.seed = seed;
  m.vocab = std::move(vocab);
  const ParamLayout layout(config);
  m.weights.assign(layout.total, 0.0f);

  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 0.02f);
  const float resid_scale = 1.0f / std::sqrt(2.0f * static_cast<float>(config.n_layers));
  for (const auto& t : layout.tensors) {
    float* w = m.weights.data() + t.offset;
    const bool is_norm = t.shape.size() == 1;
    const bool is_resid = t.name.ends_with(".wo") || t.name.ends_with(".w2");
    for (std::size_t i = 0; i < t.numel(); ++i) {
      if (is_norm) {
        w[i] = 1.0f;
      } else {
        w[i] = is_resid ? normal(rng) * resid_scale : normal(rng);
      }
    }
  }
  return m;
}

void validate_prefix(const ModelConfig& config, const TokenSequence& prefix) {
  if (prefix.empty()) throw ValidationError("prefix must be non-empty");
  if (prefix.size() > static_cast<std::size_t>(config.max_seq_len)) {
    throw ContextOverflowError(prefix.size(), static_cast<std::size_t>(config.max_seq_len));
  }
  for (TokenId t : prefix) {
    if (t >= static_cast<TokenId>(config.vocab_size)) {
      throw ValidationError("token id " + std::to_string(t) + " >= vocab_size " +
                            std::to_string(config.vocab_size));
    }
  }
}

namespace detail {

void forward(const ModelParams& model, const ParamLayout& L, const TokenId* tokens, int T,
             Activations& a, bool with_logits) {
  const auto& c = model.config;
  const int d = c.d_model, ff = c.d_ff, H = c.n_heads, hd = c.head_dim(), V = c.vocab_size;
  const float* W = model.weights.data();
  const auto Td = static_cast<std::size_t>(T) * d;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  a.length = T;
  a.blocks.resize(static_cast<std::size_t>(c.n_layers));

  std::vector<float> x(Td);
  for (int t = 0; t < T; ++t) {
    const float* te = W + L.tok_emb + static_cast<std::size_t>(tokens[t]) * d;
    const float* pe = W + L.pos_emb + static_cast<std::size_t>(t) * d;
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(t) * d + i] = te[i] + pe[i];
  }

  std::vector<float> tmp(Td);
  for (int b = 0; b < c.n_layers; ++b) {
    const auto& P = L.blocks[static_cast<std::size_t>(b)];
    auto& ba = a.blocks[static_cast<std::size_t>(b)];
    ba.x_in = x;
    ba.n1.resize(Td);
    ba.r1.resize(static_cast<std::size_t>(T));
    rmsnorm(x.data(), W + P.ln1, ba.n1.data(), ba.r1.data(), T, d);
    ba.q.resize(Td);
    ba.k.resize(Td);
    ba.v.resize(Td);
    matmul(ba.n1.data(), W + P.wq, ba.q.data(), T, d, d);
    matmul(ba.n1.data(), W + P.wk, ba.k.data(), T, d, d);
    matmul(ba.n1.data(), W + P.wv, ba.v.data(), T, d, d);

    ba.att.assign(static_cast<std::size_t>(H) * T * T, 0.0f);
    ba.ctx.assign(Td, 0.0f);
    for (int h = 0; h < H; ++h) {
      for (int t = 0; t < T; ++t) {
        float* row = ba.att.data() + (static_cast<std::size_t>(h) * T + t) * T;
        const float* qt = ba.q.data() + static_cast<std::size_t>(t) * d + h * hd;
        float mx = -INFINITY;
        for (int s = 0; s <= t; ++s) {
          const float* ks = ba.k.data() + static_cast<std::size_t>(s) * d + h * hd;
          float dot = 0.0f;
          for (int i = 0; i < hd; ++i) dot += qt[i] * ks[i];
          row[s] = dot * scale;
          mx = std::max(mx, row[s]);
        }
        float sum = 0.0f;
        for (int s = 0; s <= t; ++s) {
          row[s] = std::exp(row[s] - mx);
          sum += row[s];
        }
        float* out = ba.ctx.data() + static_cast<std::size_t>(t) * d + h * hd;
        for (int s = 0; s <= t; ++s) {
          row[s] /= sum;
          const float* vs = ba.v.data() + static_cast<std::size_t>(s) * d + h * hd;
          for (int i = 0; i < hd; ++i) out[i] += row[s] * vs[i];
        }
      }
    }
    matmul(ba.ctx.data(), W + P.wo, tmp.data(), T, d, d);
    for (std::size_t i = 0; i < Td; ++i) x[i] += tmp[i];
    ba.x_mid = x;

    ba.n2.resize(Td);
    ba.r2.resize(static_cast<std::size_t>(T));
    rmsnorm(x.data(), W + P.ln2, ba.n2.data(), ba.r2.data(), T, d);
    ba.h_pre.resize(static_cast<std::size_t>(T) * ff);
    ba.h_act.resize(static_cast<std::size_t>(T) * ff);
    matmul(ba.n2.data(), W + P.w1, ba.h_pre.data(), T, d, ff);
    for (std::size_t i = 0; i < ba.h_pre.size(); ++i) ba.h_act[i] = std::max(0.0f, ba.h_pre[i]);
    matmul(ba.h_act.data(), W + P.w2, tmp.data(), T, ff, d);
    for (std::size_t i = 0; i < Td; ++i) x[i] += tmp[i];
  }
  a.x_out = std::move(x);

  if (with_logits) {
    a.nf.resize(Td);
    a.rf.resize(static_cast<std::size_t>(T));
    rmsnorm(a.x_out.data(), W + L.lnf, a.nf.data(), a.rf.data(), T, d);
    a.logits.resize(static_cast<std::size_t>(T) * V);
    matmul(a.nf.data(), W + L.unembed, a.logits.data(), T, d, V);
  }
}

const float* residual_after(const Activations& a, int layer, int n_layers, int pos, int d) {
  const auto off = static_cast<std::size_t>(pos) * d;
  if (layer == n_layers) return a.x_out.data() + off;
  return a.blocks[static_cast<std::size_t>(layer)].x_in.data() + off;
}

void readout(const ModelParams& model, const ParamLayout& L, const float* hidden, float* logits) {
  const int d = model.config.d_model;
  std::vector<float> normed(static_cast<std::size_t>(d));
  float rinv = 0.0f;
  rmsnorm(hidden, model.weights.data() + L.lnf, normed.data(), &rinv, 1, d);
  matmul(normed.data(), model.weights.data() + L.unembed, logits, 1, d, model.config.vocab_size);
}

void backward(const ModelParams& model, const ParamLayout& L, const TokenId* tokens,
              const Activations& a, const std::vector<float>& dlogits, std::vector<float>& G) {
  const auto& c = model.config;
  const int T = a.length;
  const int d = c.d_model, ff = c.d_ff, H = c.n_heads, hd = c.head_dim(), V = c.vocab_size;
  const float* W = model.weights.data();
  const auto Td = static_cast<std::size_t>(T) * d;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  std::vector<float> dnf(Td, 0.0f);
  matmul_backward(dlogits.data(), a.nf.data(), W + L.unembed, dnf.data(), G.data() + L.unembed, T,
                  d, V);
  std::vector<float> dx(Td, 0.0f);
  rmsnorm_backward(dnf.data(), a.x_out.data(), W + L.lnf, a.rf.data(), dx.data(),
                   G.data() + L.lnf, T, d);

  std::vector<float> dn(Td), dh(static_cast<std::size_t>(T) * ff), dctx(Td), dq(Td), dk(Td),
      dv(Td), datt(static_cast<std::size_t>(T));
  for (int b = c.n_layers - 1; b >= 0; --b) {
    const auto& P = L.blocks[static_cast<std::size_t>(b)];
    const auto& ba = a.blocks[static_cast<std::size_t>(b)];

    // MLP branch: x_out = x_mid + relu(n2 W1) W2
    std::fill(dh.begin(), dh.end(), 0.0f);
    matmul_backward(dx.data(), ba.h_act.data(), W + P.w2, dh.data(), G.data() + P.w2, T, ff, d);
    for (std::size_t i = 0; i < dh.size(); ++i) {
      if (ba.h_pre[i] <= 0.0f) dh[i] = 0.0f;
    }
    std::fill(dn.begin(), dn.end(), 0.0f);
    matmul_backward(dh.data(), ba.n2.data(), W + P.w1, dn.data(), G.data() + P.w1, T, d, ff);
    rmsnorm_backward(dn.data(), ba.x_mid.data(), W + P.ln2, ba.r2.data(), dx.data(),
                     G.data() + P.ln2, T, d);

    // Attention branch: x_mid = x_in + attn(n1) Wo
    std::fill(dctx.begin(), dctx.end(), 0.0f);
    matmul_backward(dx.data(), ba.ctx.data(), W + P.wo, dctx.data(), G.data() + P.wo, T, d, d);
    std::fill(dq.begin(), dq.end(), 0.0f);
    std::fill(dk.begin(), dk.end(), 0.0f);
    std::fill(dv.begin(), dv.end(), 0.0f);
    for (int h = 0; h < H; ++h) {
      for (int t = 0; t < T; ++t) {
        const float* row = ba.att.data() + (static_cast<std::size_t>(h) * T + t) * T;
        const float* dout = dctx.data() + static_cast<std::size_t>(t) * d + h * hd;
        float weighted = 0.0f;
        for (int s = 0; s <= t; ++s) {
          const float* vs = ba.v.data() + static_cast<std::size_t>(s) * d + h * hd;
          float* dvs = dv.data() + static_cast<std::size_t>(s) * d + h * hd;
          float da = 0.0f;
          for (int i = 0; i < hd; ++i) {
            da += dout[i] * vs[i];
            dvs[i] += row[s] * dout[i];
          }
          datt[static_cast<std::size_t>(s)] = da;
          weighted += row[s] * da;
        }
        const float* qt = ba.q.data() + static_cast<std::size_t>(t) * d + h * hd;
        float* dqt = dq.data() + static_cast<std::size_t>(t) * d + h * hd;
        for (int s = 0; s <= t; ++s) {
          const float ds = row[s] * (datt[static_cast<std::size_t>(s)] - weighted) * scale;
          const float* ks = ba.k.data() + static_cast<std::size_t>(s) * d + h * hd;
          float* dks = dk.data() + static_cast<std::size_t>(s) * d + h * hd;
          for (int i = 0; i < hd; ++i) {
            dqt[i] += ds * ks[i];
            dks[i] += ds * qt[i];
          }
        }
      }
    }
    std::fill(dn.begin(), dn.end(), 0.0f);
    matmul_backward(dq.data(), ba.n1.data(), W + P.wq, dn.data(), G.data() + P.wq, T, d, d);
    matmul_backward(dk.data(), ba.n1.data(), W + P.wk, dn.data(), G.data() + P.wk, T, d, d);
    matmul_backward(dv.data(), ba.n1.data(), W + P.wv, dn.data(), G.data() + P.wv, T, d, d);
    rmsnorm_backward(dn.data(), ba.x_in.data(), W + P.ln1, ba.r1.data(), dx.data(),
                     G.data() + P.ln1, T, d);
  }

  for (int t = 0; t < T; ++t) {
    float* gte = G.data() + L.tok_emb + static_cast<std::size_t>(tokens[t]) * d;
    float* gpe = G.data() + L.pos_emb + static_cast<std::size_t>(t) * d;
    const float* dxr = dx.data() + static_cast<std::size_t>(t) * d;
    for (int i = 0; i < d; ++i) {
      gte[i] += dxr[i];
      gpe[i] += dxr[i];
    }
  }
}

}  // namespace detail

std::vector<float> final_logits(const ModelParams& model, const TokenSequence& prefix) {
  validate_prefix(model.config, prefix);
  const ParamLayout layout(model.config);
  detail::Activations acts;
  const int T = static_cast<int>(prefix.size());
  detail::forward(model, layout, prefix.data(), T, acts, /*with_logits=*/true);
  const auto V = static_cast<std::size_t>(model.config.vocab_size);
  auto first = acts.logits.begin() + static_cast<std::ptrdiff_t>((prefix.size() - 1) * V);
  return {first, first + static_cast<std::ptrdiff_t>(V)};
}

LayeredLogits forward_layered(const ModelParams& model, const TokenSequence& prefix,
                              std::span<const LayerIndex> layers) {
  validate_prefix(model.config, prefix);
  if (layers.empty()) throw ValidationError("at least one layer must be requested");
  for (LayerIndex l : layers) {
    if (l < 1 || l > model.config.n_layers) {
      throw ValidationError("layer index " + std::to_string(l) + " outside [1, " +
                            std::to_string(model.config.n_layers) + "]");
    }
  }
  const ParamLayout layout(model.config);
  detail::Activations acts;
  const int T = static_cast<int>(prefix.size());
  detail::forward(model, layout, prefix.data(), T, acts, /*with_logits=*/false);

  const auto V = static_cast<std::size_t>(model.config.vocab_size);
  std::vector<float> row(V);
  LayeredLogits out;
  for (LayerIndex l : layers) {
    if (out.contains(l)) continue;
    const float* h = detail::residual_after(acts, l, model.config.n_layers, T - 1, model.config.d_model);
    detail::readout(model, layout, h, row.data());
    out.emplace(l, std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

}  // namespace lol::toymodel
