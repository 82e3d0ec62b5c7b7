#ifndef WARP_POLICY_NET_HPP_
#define WARP_POLICY_NET_HPP_

// Tiny pre-norm transformer decoder with learned positional embeddings, an
// untied output head and hand-written backward pass. All kernels are
// templated on the scalar type: float for training, double for gradient
// checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warp/arch.hpp"
#include "warp/error.hpp"
#include "warp/rng.hpp"
#include "warp/tensor_store.hpp"

namespace warp {

inline constexpr int kEosToken = 0;
inline constexpr double kInitScale = 0.02;

inline WeightSet init_policy(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  WeightSet w = zeros(arch);
  w.meta.seed = seed;
  const Rng root(seed);
  const auto layout = BlockLayout::of(arch);
  const std::size_t c = arch.embed_dim, h = arch.mlp_hidden;
  auto gaussian = [](Rng& rng, float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<float>(kInitScale * rng.normal());
  };
  auto fill = [](float* p, std::size_t n, float v) { std::fill(p, p + n, v); };
  for (std::size_t gi = 0; gi < w.groups.size(); ++gi) {
    Rng rng = root.split(gi);
    auto& g = w.groups[gi];
    float* p = g.data.data();
    if (g.name == "tok_embed" || g.name == "pos_embed") {
      gaussian(rng, p, g.size());
    } else if (g.name == "final_norm") {
      fill(p, c, 1.0f);
    } else if (g.name == "head") {
      gaussian(rng, p, c * arch.vocab_size);
    } else {
      fill(p + layout.ln1_gain, c, 1.0f);
      fill(p + layout.ln2_gain, c, 1.0f);
      gaussian(rng, p + layout.w_qkv, c * 3 * c);
      gaussian(rng, p + layout.w_out, c * c);
      gaussian(rng, p + layout.w_fc, c * h);
      gaussian(rng, p + layout.w_proj, h * c);
    }
  }
  return w;
}

// Gradient (or any per-parameter quantity) with the WeightSet group layout.
template <class S>
struct GradBuffer {
  std::vector<std::vector<S>> groups;

  static GradBuffer like(const WeightSet& w) {
    GradBuffer g;
    for (const auto& grp : w.groups) g.groups.emplace_back(grp.size(), S(0));
    return g;
  }
  void zero() {
    for (auto& g : groups) std::fill(g.begin(), g.end(), S(0));
  }
  double norm() const {
    double s = 0.0;
    for (const auto& g : groups)
      for (S v : g) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
  }
  bool all_finite() const {
    for (const auto& g : groups)
      for (S v : g)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

namespace kernels {

// y = b + x W, W row-major [in, out].
template <class S>
inline void linear(const S* x, const S* w, const S* b, S* y, int in, int out) {
  for (int j = 0; j < out; ++j) y[j] = b[j];
  for (int i = 0; i < in; ++i) {
    const S xi = x[i];
    const S* wr = w + static_cast<std::size_t>(i) * out;
    for (int j = 0; j < out; ++j) y[j] += xi * wr[j];
  }
}

// Accumulates dW += x^T dy, db += dy and writes dx = dy W^T.
template <class S>
inline void linear_backward(const S* x, const S* w, const S* dy, S* dx, S* dw, S* db, int in,
                            int out) {
  for (int j = 0; j < out; ++j) db[j] += dy[j];
  for (int i = 0; i < in; ++i) {
    const S xi = x[i];
    const S* wr = w + static_cast<std::size_t>(i) * out;
    S* dwr = dw + static_cast<std::size_t>(i) * out;
    S acc = 0;
    for (int j = 0; j < out; ++j) {
      dwr[j] += xi * dy[j];
      acc += dy[j] * wr[j];
    }
    dx[i] = acc;
  }
}

inline constexpr double kLnEps = 1e-5;

template <class S>
inline void layernorm(const S* x, const S* gain, const S* bias, S* y, S* mean_out, S* rstd_out,
                      int n) {
  S mean = 0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= S(n);
  S var = 0;
  for (int i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= S(n);
  const S rstd = S(1) / std::sqrt(var + S(kLnEps));
  for (int i = 0; i < n; ++i) y[i] = (x[i] - mean) * rstd * gain[i] + bias[i];
  *mean_out = mean;
  *rstd_out = rstd;
}

// dx += LN'(dy); dgain, dbias accumulated.
template <class S>
inline void layernorm_backward(const S* x, S mean, S rstd, const S* gain, const S* dy, S* dx,
                               S* dgain, S* dbias, int n) {
  S sum_d = 0, sum_dx = 0;
  for (int i = 0; i < n; ++i) {
    const S xhat = (x[i] - mean) * rstd;
    const S d = dy[i] * gain[i];
    dgain[i] += dy[i] * xhat;
    dbias[i] += dy[i];
    sum_d += d;
    sum_dx += d * xhat;
  }
  sum_d /= S(n);
  sum_dx /= S(n);
  for (int i = 0; i < n; ++i) {
    const S xhat = (x[i] - mean) * rstd;
    dx[i] += rstd * (dy[i] * gain[i] - sum_d - xhat * sum_dx);
  }
}

inline constexpr double kGeluA = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluB = 0.044715;

template <class S>
inline S gelu(S x) {
  return S(0.5) * x * (S(1) + std::tanh(S(kGeluA) * (x + S(kGeluB) * x * x * x)));
}

template <class S>
inline S gelu_grad(S x) {
  const S u = S(kGeluA) * (x + S(kGeluB) * x * x * x);
  const S t = std::tanh(u);
  return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * S(kGeluA) * (S(1) + S(3 * kGeluB) * x * x);
}

// log-softmax of n logits into out; returns log-sum-exp.
template <class S>
inline S log_softmax(const S* logits, S* out, int n) {
  S m = logits[0];
  for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
  double s = 0;
  for (int i = 0; i < n; ++i) s += std::exp(static_cast<double>(logits[i] - m));
  const S ls = static_cast<S>(std::log(s));
  for (int i = 0; i < n; ++i) out[i] = (logits[i] - m) - ls;
  return m + ls;
}

}  // namespace kernels

// Parameters converted to scalar S, with views into the group layout.
template <class S>
class PolicyModel {
 public:
  explicit PolicyModel(const WeightSet& w) : arch_(w.meta.arch), layout_(BlockLayout::of(arch_)) {
    check_schema(w);
    for (const auto& g : w.groups) params_.emplace_back(g.data.begin(), g.data.end());
  }

  const ArchConfig& arch() const { return arch_; }
  const BlockLayout& layout() const { return layout_; }

  const S* tok_embed() const { return params_[0].data(); }
  const S* pos_embed() const { return params_[1].data(); }
  const S* block(int b) const { return params_[2 + b].data(); }
  const S* final_norm() const { return params_[2 + arch_.num_blocks].data(); }
  const S* head() const { return params_[3 + arch_.num_blocks].data(); }

  static constexpr std::size_t kTokGroup = 0, kPosGroup = 1;
  std::size_t block_group(int b) const { return 2 + b; }
  std::size_t final_norm_group() const { return 2 + arch_.num_blocks; }
  std::size_t head_group() const { return 3 + arch_.num_blocks; }

  std::vector<std::vector<S>>& params() { return params_; }

  // Reloads parameters from a compatible WeightSet without reallocating.
  void assign(const WeightSet& w) {
    require(w.meta.arch == arch_ && w.groups.size() == params_.size(), ErrorCode::kIncompatible,
            "weights do not match the model architecture");
    for (std::size_t i = 0; i < params_.size(); ++i)
      std::copy(w.groups[i].data.begin(), w.groups[i].data.end(), params_[i].begin());
  }

 private:
  ArchConfig arch_;
  BlockLayout layout_;
  std::vector<std::vector<S>> params_;
};

// Incremental decoder over one sequence. push() feeds one token and returns
// the logits that predict the next one; every activation is kept so that
// backward() can differentiate any function of the logits.
template <class S>
class Decoder {
 public:
  explicit Decoder(const PolicyModel<S>& model) : m_(model) {
    const auto& a = m_.arch();
    c_ = a.embed_dim;
    h_ = a.mlp_hidden;
    v_ = a.vocab_size;
    nh_ = a.num_heads;
    hd_ = a.head_dim();
    lmax_ = a.max_seq_len();
    nb_ = a.num_blocks;
    const std::size_t L = lmax_;
    resid_.assign(nb_ + 1, std::vector<S>(L * c_));
    mid_.assign(nb_, std::vector<S>(L * c_));
    ln1_.assign(nb_, std::vector<S>(L * c_));
    ln2_.assign(nb_, std::vector<S>(L * c_));
    ln1_stats_.assign(nb_, std::vector<S>(2 * L));
    ln2_stats_.assign(nb_, std::vector<S>(2 * L));
    qkv_.assign(nb_, std::vector<S>(L * 3 * c_));
    att_.assign(nb_, std::vector<S>(static_cast<std::size_t>(nh_) * L * L));
    cat_.assign(nb_, std::vector<S>(L * c_));
    fc_pre_.assign(nb_, std::vector<S>(L * h_));
    fc_act_.assign(nb_, std::vector<S>(L * h_));
    lnf_.assign(L * c_, S(0));
    lnf_stats_.assign(2 * L, S(0));
    logits_.assign(L * v_, S(0));
    tmp_.assign(std::max(c_, h_), S(0));
    dprob_.assign(L, S(0));
  }

  void reset() { len_ = 0; }
  int length() const { return len_; }
  const std::vector<int>& tokens() const { return toks_; }

  std::span<const S> logits(int pos) const {
    return {logits_.data() + static_cast<std::size_t>(pos) * v_, static_cast<std::size_t>(v_)};
  }

  std::span<const S> push(int token) {
    require(len_ < lmax_, ErrorCode::kInvalidArgument, "sequence exceeds max length");
    require(token >= 0 && token < v_, ErrorCode::kOutOfVocab,
            "token " + std::to_string(token) + " outside vocab of " + std::to_string(v_));
    const int t = len_;
    if (static_cast<int>(toks_.size()) <= t) toks_.resize(t + 1);
    toks_[t] = token;
    const auto& L = m_.layout();
    S* x0 = &resid_[0][t * c_];
    const S* te = m_.tok_embed() + static_cast<std::size_t>(token) * c_;
    const S* pe = m_.pos_embed() + static_cast<std::size_t>(t) * c_;
    for (int i = 0; i < c_; ++i) x0[i] = te[i] + pe[i];

    const S scale = S(1) / std::sqrt(S(hd_));
    for (int b = 0; b < nb_; ++b) {
      const S* p = m_.block(b);
      const S* x = &resid_[b][t * c_];
      S* h1 = &ln1_[b][t * c_];
      kernels::layernorm(x, p + L.ln1_gain, p + L.ln1_bias, h1, &ln1_stats_[b][2 * t],
                         &ln1_stats_[b][2 * t + 1], c_);
      S* qkv = &qkv_[b][t * 3 * c_];
      kernels::linear(h1, p + L.w_qkv, p + L.b_qkv, qkv, c_, 3 * c_);
      S* cat = &cat_[b][t * c_];
      for (int hh = 0; hh < nh_; ++hh) {
        const S* q = qkv + hh * hd_;
        S* prob = &att_[b][(static_cast<std::size_t>(hh) * lmax_ + t) * lmax_];
        S mx = -std::numeric_limits<S>::infinity();
        for (int j = 0; j <= t; ++j) {
          const S* k = &qkv_[b][j * 3 * c_ + c_ + hh * hd_];
          S s = 0;
          for (int d = 0; d < hd_; ++d) s += q[d] * k[d];
          prob[j] = s * scale;
          mx = std::max(mx, prob[j]);
        }
        S z = 0;
        for (int j = 0; j <= t; ++j) {
          prob[j] = std::exp(prob[j] - mx);
          z += prob[j];
        }
        for (int j = 0; j <= t; ++j) prob[j] /= z;
        S* o = cat + hh * hd_;
        for (int d = 0; d < hd_; ++d) o[d] = 0;
        for (int j = 0; j <= t; ++j) {
          const S* v = &qkv_[b][j * 3 * c_ + 2 * c_ + hh * hd_];
          for (int d = 0; d < hd_; ++d) o[d] += prob[j] * v[d];
        }
      }
      S* xm = &mid_[b][t * c_];
      kernels::linear(cat, p + L.w_out, p + L.b_out, xm, c_, c_);
      for (int i = 0; i < c_; ++i) xm[i] += x[i];

      S* h2 = &ln2_[b][t * c_];
      kernels::layernorm(xm, p + L.ln2_gain, p + L.ln2_bias, h2, &ln2_stats_[b][2 * t],
                         &ln2_stats_[b][2 * t + 1], c_);
      S* pre = &fc_pre_[b][t * h_];
      S* act = &fc_act_[b][t * h_];
      kernels::linear(h2, p + L.w_fc, p + L.b_fc, pre, c_, h_);
      for (int i = 0; i < h_; ++i) act[i] = kernels::gelu(pre[i]);
      S* xo = &resid_[b + 1][t * c_];
      kernels::linear(act, p + L.w_proj, p + L.b_proj, xo, h_, c_);
      for (int i = 0; i < c_; ++i) xo[i] += xm[i];
    }
    const S* fn = m_.final_norm();
    S* hf = &lnf_[t * c_];
    kernels::layernorm(&resid_[nb_][t * c_], fn, fn + c_, hf, &lnf_stats_[2 * t],
                       &lnf_stats_[2 * t + 1], c_);
    const S* hw = m_.head();
    S* lg = &logits_[static_cast<std::size_t>(t) * v_];
    kernels::linear(hf, hw, hw + static_cast<std::size_t>(c_) * v_, lg, c_, v_);
    ++len_;
    return logits(t);
  }

  // Backpropagates dlogits for positions [first, length()) (row-major,
  // (length()-first) x vocab) and accumulates parameter gradients into g.
  void backward(int first, std::span<const S> dlogits, GradBuffer<S>& g) {
    const int T = len_;
    if (T == 0 || first >= T) return;
    const auto& L = m_.layout();
    dx_.assign(static_cast<std::size_t>(T) * c_, S(0));

    S* dhead = g.groups[m_.head_group()].data();
    S* dfn = g.groups[m_.final_norm_group()].data();
    const S* hw = m_.head();
    const S* fn = m_.final_norm();
    for (int t = first; t < T; ++t) {
      const S* dl = dlogits.data() + static_cast<std::size_t>(t - first) * v_;
      kernels::linear_backward(&lnf_[t * c_], hw, dl, tmp_.data(), dhead,
                               dhead + static_cast<std::size_t>(c_) * v_, c_, v_);
      kernels::layernorm_backward(&resid_[nb_][t * c_], lnf_stats_[2 * t], lnf_stats_[2 * t + 1],
                                  fn, tmp_.data(), &dx_[t * c_], dfn, dfn + c_, c_);
    }

    dmid_.assign(static_cast<std::size_t>(T) * c_, S(0));
    dcat_.assign(static_cast<std::size_t>(T) * c_, S(0));
    dqkv_.assign(static_cast<std::size_t>(T) * 3 * c_, S(0));
    dact_.assign(h_, S(0));
    dln_.assign(std::max(c_, 3 * c_), S(0));
    const S scale = S(1) / std::sqrt(S(hd_));
    for (int b = nb_ - 1; b >= 0; --b) {
      const S* p = m_.block(b);
      S* gp = g.groups[m_.block_group(b)].data();
      // MLP branch: x_out = x_mid + proj(gelu(fc(ln2(x_mid)))).
      for (int t = 0; t < T; ++t) {
        const S* dxo = &dx_[t * c_];
        kernels::linear_backward(&fc_act_[b][t * h_], p + L.w_proj, dxo, dact_.data(),
                                 gp + L.w_proj, gp + L.b_proj, h_, c_);
        const S* pre = &fc_pre_[b][t * h_];
        for (int i = 0; i < h_; ++i) dact_[i] *= kernels::gelu_grad(pre[i]);
        kernels::linear_backward(&ln2_[b][t * c_], p + L.w_fc, dact_.data(), dln_.data(),
                                 gp + L.w_fc, gp + L.b_fc, c_, h_);
        S* dm = &dmid_[t * c_];
        for (int i = 0; i < c_; ++i) dm[i] = dxo[i];
        kernels::layernorm_backward(&mid_[b][t * c_], ln2_stats_[b][2 * t], ln2_stats_[b][2 * t + 1],
                                    p + L.ln2_gain, dln_.data(), dm, gp + L.ln2_gain,
                                    gp + L.ln2_bias, c_);
        kernels::linear_backward(&cat_[b][t * c_], p + L.w_out, dm, &dcat_[t * c_], gp + L.w_out,
                                 gp + L.b_out, c_, c_);
      }
      // Attention.
      std::fill(dqkv_.begin(), dqkv_.end(), S(0));
      const auto& qkv = qkv_[b];
      for (int hh = 0; hh < nh_; ++hh) {
        for (int i = 0; i < T; ++i) {
          const S* prob = &att_[b][(static_cast<std::size_t>(hh) * lmax_ + i) * lmax_];
          const S* dout = &dcat_[i * c_ + hh * hd_];
          const S* q = &qkv[i * 3 * c_ + hh * hd_];
          S* dq = &dqkv_[i * 3 * c_ + hh * hd_];
          S dot_pd = 0;
          for (int j = 0; j <= i; ++j) {
            const S* v = &qkv[j * 3 * c_ + 2 * c_ + hh * hd_];
            S* dv = &dqkv_[j * 3 * c_ + 2 * c_ + hh * hd_];
            S dp = 0;
            for (int d = 0; d < hd_; ++d) {
              dv[d] += prob[j] * dout[d];
              dp += dout[d] * v[d];
            }
            dprob_[j] = dp;
            dot_pd += prob[j] * dp;
          }
          for (int j = 0; j <= i; ++j) {
            const S ds = prob[j] * (dprob_[j] - dot_pd) * scale;
            const S* k = &qkv[j * 3 * c_ + c_ + hh * hd_];
            S* dk = &dqkv_[j * 3 * c_ + c_ + hh * hd_];
            for (int d = 0; d < hd_; ++d) {
              dq[d] += ds * k[d];
              dk[d] += ds * q[d];
            }
          }
        }
      }
      for (int t = 0; t < T; ++t) {
        kernels::linear_backward(&ln1_[b][t * c_], p + L.w_qkv, &dqkv_[t * 3 * c_], dln_.data(),
                                 gp + L.w_qkv, gp + L.b_qkv, c_, 3 * c_);
        S* dxi = &dx_[t * c_];
        const S* dm = &dmid_[t * c_];
        for (int i = 0; i < c_; ++i) dxi[i] = dm[i];
        kernels::layernorm_backward(&resid_[b][t * c_], ln1_stats_[b][2 * t], ln1_stats_[b][2 * t + 1],
                                    p + L.ln1_gain, dln_.data(), dxi, gp + L.ln1_gain,
                                    gp + L.ln1_bias, c_);
      }
    }
    S* dtok = g.groups[PolicyModel<S>::kTokGroup].data();
    S* dpos = g.groups[PolicyModel<S>::kPosGroup].data();
    for (int t = 0; t < T; ++t) {
      const S* d = &dx_[t * c_];
      S* te = dtok + static_cast<std::size_t>(toks_[t]) * c_;
      S* pe = dpos + static_cast<std::size_t>(t) * c_;
      for (int i = 0; i < c_; ++i) {
        te[i] += d[i];
        pe[i] += d[i];
      }
    }
  }

 private:
  const PolicyModel<S>& m_;
  int c_, h_, v_, nh_, hd_, lmax_, nb_;
  int len_ = 0;
  std::vector<int> toks_;
  std::vector<std::vector<S>> resid_, mid_, ln1_, ln2_, ln1_stats_, ln2_stats_, qkv_, att_, cat_,
      fc_pre_, fc_act_;
  std::vector<S> lnf_, lnf_stats_, logits_, tmp_;
  std::vector<S> dx_, dmid_, dcat_, dqkv_, dact_, dln_;
  std::vector<S> dprob_;
};

struct Completion {
  std::vector<int> prompt;
  std::vector<int> tokens;
  std::vector<double> per_step_logprob;  // temperature-1 log-probabilities
  double total_logprob = 0.0;

  // Number of generated tokens, not counting a terminating EOS.
  int length() const {
    const int n = static_cast<int>(tokens.size());
    return (n > 0 && tokens.back() == kEosToken) ? n - 1 : n;
  }
};

inline void check_sequence(const ArchConfig& a, std::span<const int> prompt, std::span<const int> tokens) {
  require(!prompt.empty() && static_cast<int>(prompt.size()) <= a.max_prompt_len,
          ErrorCode::kInvalidArgument,
          "prompt length " + std::to_string(prompt.size()) + " outside [1," +
              std::to_string(a.max_prompt_len) + "]");
  require(static_cast<int>(tokens.size()) <= a.max_completion_len, ErrorCode::kInvalidArgument,
          "completion length " + std::to_string(tokens.size()) + " exceeds " +
              std::to_string(a.max_completion_len));
  for (int t : prompt)
    require(t >= 0 && t < a.vocab_size, ErrorCode::kOutOfVocab, "prompt token " + std::to_string(t));
  for (int t : tokens)
    require(t >= 0 && t < a.vocab_size, ErrorCode::kOutOfVocab, "completion token " + std::to_string(t));
}

namespace detail {

// Feeds prompt and all but the last completion token. Position
// prompt.size()-1+k of the decoder then predicts tokens[k].
template <class S>
void feed(Decoder<S>& dec, std::span<const int> prompt, std::span<const int> tokens) {
  dec.reset();
  for (int t : prompt) dec.push(t);
  for (std::size_t k = 0; k + 1 < tokens.size(); ++k) dec.push(tokens[k]);
}

}  // namespace detail

// Exact temperature-1 log-probability of `tokens` given `prompt`.
template <class S>
double logprob_of(const PolicyModel<S>& model, std::span<const int> prompt, std::span<const int> tokens,
                  std::vector<double>* per_step = nullptr) {
  const auto& a = model.arch();
  check_sequence(a, prompt, tokens);
  if (per_step) per_step->clear();
  if (tokens.empty()) return 0.0;
  Decoder<S> dec(model);
  detail::feed(dec, prompt, tokens);
  std::vector<S> lp(a.vocab_size);
  double total = 0.0;
  const int first = static_cast<int>(prompt.size()) - 1;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    kernels::log_softmax(dec.logits(first + static_cast<int>(k)).data(), lp.data(), a.vocab_size);
    const double v = static_cast<double>(lp[tokens[k]]);
    total += v;
    if (per_step) per_step->push_back(v);
  }
  return total;
}

inline double logprob_of(const WeightSet& w, std::span<const int> prompt, std::span<const int> tokens,
                         std::vector<double>* per_step = nullptr) {
  return logprob_of(PolicyModel<float>(w), prompt, tokens, per_step);
}

// Backward pass for a decoder that already holds prompt + tokens[:-1]:
// accumulates coeff * d/dtheta log pi(tokens | prompt) into g and returns the
// log-probability.
template <class S>
double backprop_logprob(Decoder<S>& dec, int prompt_len, std::span<const int> tokens, S coeff,
                        GradBuffer<S>& g) {
  if (tokens.empty()) return 0.0;
  const int first = prompt_len - 1;
  require(dec.length() == first + static_cast<int>(tokens.size()), ErrorCode::kInvalidArgument,
          "decoder does not hold the expected sequence");
  const int V = static_cast<int>(dec.logits(0).size());
  std::vector<S> dl(tokens.size() * V), lp(V);
  double total = 0.0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    kernels::log_softmax(dec.logits(first + static_cast<int>(k)).data(), lp.data(), V);
    total += static_cast<double>(lp[tokens[k]]);
    S* row = &dl[k * V];
    for (int v = 0; v < V; ++v) row[v] = -coeff * std::exp(lp[v]);
    row[tokens[k]] += coeff;
  }
  dec.backward(first, dl, g);
  return total;
}

// Accumulates coeff * d/dtheta log pi(tokens | prompt) into g and returns the
// log-probability.
template <class S>
double accumulate_grad_logprob(const PolicyModel<S>& model, std::span<const int> prompt,
                               std::span<const int> tokens, S coeff, GradBuffer<S>& g,
                               Decoder<S>* scratch = nullptr) {
  check_sequence(model.arch(), prompt, tokens);
  if (tokens.empty()) return 0.0;
  std::optional<Decoder<S>> own;
  if (!scratch) scratch = &own.emplace(model);
  detail::feed(*scratch, prompt, tokens);
  return backprop_logprob(*scratch, static_cast<int>(prompt.size()), tokens, coeff, g);
}

// Gradient of the total log-probability with respect to every weight, in the
// WeightSet layout.
template <class S = double>
GradBuffer<S> grad_logprob(const WeightSet& w, std::span<const int> prompt, std::span<const int> tokens) {
  PolicyModel<S> model(w);
  auto g = GradBuffer<S>::like(w);
  accumulate_grad_logprob<S>(model, prompt, tokens, S(1), g);
  return g;
}

// Draws one completion per prompt. Tokens are sampled from
// softmax(logits / temperature) (argmax when greedy); recorded log-probs are
// always under the temperature-1 policy.
template <class S>
Completion sample_one(const PolicyModel<S>& model, std::span<const int> prompt, double temperature,
                      Rng& rng, bool greedy, Decoder<S>& dec) {
  const auto& a = model.arch();
  check_sequence(a, prompt, {});
  require(greedy || temperature > 0.0, ErrorCode::kInvalidArgument, "temperature must be > 0");
  Completion c;
  c.prompt.assign(prompt.begin(), prompt.end());
  dec.reset();
  std::span<const S> logits;
  for (int t : prompt) logits = dec.push(t);
  const int V = a.vocab_size;
  std::vector<S> lp(V);
  std::vector<double> w(V);
  for (int k = 0; k < a.max_completion_len; ++k) {
    kernels::log_softmax(logits.data(), lp.data(), V);
    int tok = 0;
    if (greedy) {
      tok = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < V; ++v) mx = std::max(mx, static_cast<double>(logits[v]) / temperature);
      double z = 0.0;
      for (int v = 0; v < V; ++v) {
        w[v] = std::exp(static_cast<double>(logits[v]) / temperature - mx);
        z += w[v];
      }
      double u = rng.uniform() * z;
      tok = V - 1;
      for (int v = 0; v < V; ++v) {
        if (u < w[v]) {
          tok = v;
          break;
        }
        u -= w[v];
      }
    }
    c.tokens.push_back(tok);
    c.per_step_logprob.push_back(static_cast<double>(lp[tok]));
    c.total_logprob += static_cast<double>(lp[tok]);
    if (tok == kEosToken || k + 1 == a.max_completion_len) break;
    logits = dec.push(tok);
  }
  return c;
}

template <class S = float>
std::vector<Completion> sample(const PolicyModel<S>& model, std::span<const std::vector<int>> prompts,
                               double temperature, Rng& rng, bool greedy = false) {
  require(greedy || temperature > 0.0, ErrorCode::kInvalidArgument, "temperature must be > 0");
  Decoder<S> dec(model);
  std::vector<Completion> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(sample_one(model, p, temperature, rng, greedy, dec));
  return out;
}

inline std::vector<Completion> sample(const WeightSet& w, std::span<const std::vector<int>> prompts,
                                      double temperature, Rng& rng, bool greedy = false) {
  return sample(PolicyModel<float>(w), prompts, temperature, rng, greedy);
}

}  // namespace warp

#endif  // WARP_POLICY_NET_HPP_
