#pragma once

// Word-level LSTM language model trained with truncated backpropagation
// through time and plain SGD.
//
// All parameters live in one flat vector; the matrices below are views into
// it. Per layer l the gate block is W_l = [W_i; W_f; W_g; W_o] of shape
// 4H x (in_l + H) acting on [x_t; h_{t-1}], plus a 4H bias. The hidden and
// cell state are zeroed whenever the input token is <s>, so every sentence is
// scored from the same initial state.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "primeprobe/corpus.hpp"
#include "primeprobe/util.hpp"

namespace primeprobe {

struct LstmConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 2;
  std::size_t bptt_len = 35;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double train_lr = 1.0;
  double adapt_lr = 0.0;  // 0 means "same as train_lr"
  double grad_clip = 5.0;
  std::uint64_t seed = 0;

  double effective_adapt_lr() const { return adapt_lr > 0 ? adapt_lr : train_lr; }

  void validate() const {
    if (embed_dim < 1 || hidden_dim < 1 || num_layers < 1 || bptt_len < 1 || batch_size < 1)
      throw InvalidArgument("lstm config: all dimensions must be >= 1");
    if (!(train_lr > 0) || adapt_lr < 0) throw InvalidArgument("lstm config: learning rates must be > 0");
    if (!(grad_clip > 0)) throw InvalidArgument("lstm config: grad_clip must be > 0");
  }

  std::string describe() const {
    return "embed_dim=" + std::to_string(embed_dim) + " hidden_dim=" + std::to_string(hidden_dim) +
           " num_layers=" + std::to_string(num_layers) + " bptt_len=" + std::to_string(bptt_len) +
           " batch_size=" + std::to_string(batch_size) + " epochs=" + std::to_string(epochs) +
           " train_lr=" + format_double(train_lr) + " adapt_lr=" + format_double(adapt_lr) +
           " grad_clip=" + format_double(grad_clip) + " seed=" + std::to_string(seed);
  }
};

/// Named contiguous range of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

template <class Scalar>
class LstmModel {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using MatMap = Eigen::Map<Mat>;
  using CMatMap = Eigen::Map<const Mat>;
  using VecMap = Eigen::Map<Vec>;
  using CVecMap = Eigen::Map<const Vec>;

  /// Recurrent state of every layer, one column per stream.
  struct State {
    std::vector<Mat> h, c;
  };

  LstmModel() = default;

  /// Uniform initialization in [-a, a] with a = 1/sqrt(hidden_dim); forget-gate
  /// biases start at 1.
  static LstmModel init(const LstmConfig& cfg, std::size_t vocab_size, std::uint64_t seed) {
    cfg.validate();
    if (vocab_size < 3) throw InvalidArgument("lstm: vocabulary too small");
    LstmModel m(cfg, vocab_size);
    Rng rng(derive_seed(seed, 0x157aULL));
    const double a = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    for (Eigen::Index i = 0; i < m.params_.size(); ++i) m.params_[i] = static_cast<Scalar>(rng.uniform(-a, a));
    const auto H = static_cast<Eigen::Index>(cfg.hidden_dim);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) m.bias(l).segment(H, H).setOnes();
    return m;
  }

  const LstmConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Views -------------------------------------------------------------------
  MatMap embedding() { return MatMap(ptr(embed_off_), E(), V()); }
  CMatMap embedding() const { return CMatMap(ptr(embed_off_), E(), V()); }
  MatMap weights(std::size_t l) { return MatMap(ptr(layer_off_[l]), 4 * H(), in_dim(l) + H()); }
  CMatMap weights(std::size_t l) const { return CMatMap(ptr(layer_off_[l]), 4 * H(), in_dim(l) + H()); }
  VecMap bias(std::size_t l) { return VecMap(ptr(bias_off(l)), 4 * H()); }
  CVecMap bias(std::size_t l) const { return CVecMap(ptr(bias_off(l)), 4 * H()); }
  MatMap out_weights() { return MatMap(ptr(out_off_), V(), H()); }
  CMatMap out_weights() const { return CMatMap(ptr(out_off_), V(), H()); }
  VecMap out_bias() { return VecMap(ptr(out_off_ + V() * H()), V()); }
  CVecMap out_bias() const { return CVecMap(ptr(out_off_ + V() * H()), V()); }

  /// Parameter ranges by name: "embedding", "layer<l>.W", "layer<l>.b",
  /// "output.W", "output.b". Per-gate index sets come from gate_indices().
  std::vector<ParamBlock> blocks() const {
    std::vector<ParamBlock> out;
    out.push_back({"embedding", static_cast<std::size_t>(embed_off_), static_cast<std::size_t>(E() * V())});
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      out.push_back({"layer" + std::to_string(l) + ".W", static_cast<std::size_t>(layer_off_[l]),
                     static_cast<std::size_t>(4 * H() * (in_dim(l) + H()))});
      out.push_back({"layer" + std::to_string(l) + ".b", static_cast<std::size_t>(bias_off(l)),
                     static_cast<std::size_t>(4 * H())});
    }
    out.push_back({"output.W", static_cast<std::size_t>(out_off_), static_cast<std::size_t>(V() * H())});
    out.push_back({"output.b", static_cast<std::size_t>(out_off_ + V() * H()), static_cast<std::size_t>(V())});
    return out;
  }

  /// Flat indices of the parameters that feed gate `gate` (0=i, 1=f, 2=g, 3=o)
  /// of layer `l`: its weight rows and its bias entries.
  std::vector<std::size_t> gate_indices(std::size_t l, std::size_t gate) const {
    std::vector<std::size_t> out;
    const auto rows = 4 * H(), cols = in_dim(l) + H();
    const auto first = static_cast<Eigen::Index>(gate) * H(), last = first + H();
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = first; r < last; ++r)
        out.push_back(static_cast<std::size_t>(layer_off_[l] + c * rows + r));
    for (Eigen::Index r = first; r < last; ++r) out.push_back(static_cast<std::size_t>(bias_off(l) + r));
    return out;
  }

  State zero_state(std::size_t streams) const {
    State s;
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      s.h.push_back(Mat::Zero(H(), static_cast<Eigen::Index>(streams)));
      s.c.push_back(Mat::Zero(H(), static_cast<Eigen::Index>(streams)));
    }
    return s;
  }

  // Forward pass over a (time x stream) grid of inputs ------------------------

  /// Caches of one forward pass; consumed by backward().
  struct Tape {
    std::size_t steps = 0, streams = 0;
    std::vector<std::vector<Mat>> xh;     // [layer][t]: [x; masked h_prev]
    std::vector<std::vector<Mat>> gates;  // [layer][t]: activated i, f, g, o
    std::vector<std::vector<Mat>> c_prev; // [layer][t]: masked c_prev
    std::vector<std::vector<Mat>> c;      // [layer][t]
    std::vector<std::vector<Mat>> tanh_c; // [layer][t]
    std::vector<std::vector<Scalar>> keep;  // [t][b]: 0 where the state was reset
    Mat h_top;                            // H x (steps * streams), column t*B + b
    Mat probs;                            // V x (steps * streams)
  };

  /// Runs the network on `inputs` laid out time-major (inputs[t * B + b]),
  /// starting from `state`, which is advanced in place.
  Tape forward(std::span<const TokenId> inputs, std::size_t streams, State& state,
               TokenId reset_token) const {
    if (streams == 0 || inputs.empty() || inputs.size() % streams != 0)
      throw InvalidArgument("lstm forward: inputs must form a non-empty time x stream grid");
    Tape tp;
    tp.streams = streams;
    tp.steps = inputs.size() / streams;
    const auto B = static_cast<Eigen::Index>(streams);
    const std::size_t L = cfg_.num_layers;
    tp.xh.resize(L);
    tp.gates.resize(L);
    tp.c_prev.resize(L);
    tp.c.resize(L);
    tp.tanh_c.resize(L);
    tp.keep.assign(tp.steps, std::vector<Scalar>(streams, Scalar(1)));
    tp.h_top.resize(H(), static_cast<Eigen::Index>(tp.steps) * B);
    const auto emb = embedding();
    for (std::size_t t = 0; t < tp.steps; ++t) {
      for (std::size_t b = 0; b < streams; ++b) {
        const TokenId id = inputs[t * streams + b];
        if (id >= vocab_) throw InvalidArgument("lstm forward: token id out of range");
        if (id == reset_token) tp.keep[t][b] = Scalar(0);
      }
      Mat below(E(), B);
      for (std::size_t b = 0; b < streams; ++b)
        below.col(static_cast<Eigen::Index>(b)) = emb.col(inputs[t * streams + b]);
      for (std::size_t l = 0; l < L; ++l) {
        const Eigen::Index in = in_dim(l);
        Mat xh(in + H(), B);
        xh.topRows(in) = below;
        Mat cp(H(), B);
        for (Eigen::Index b = 0; b < B; ++b) {
          const Scalar k = tp.keep[t][static_cast<std::size_t>(b)];
          xh.col(b).bottomRows(H()) = state.h[l].col(b) * k;
          cp.col(b) = state.c[l].col(b) * k;
        }
        Mat g = weights(l) * xh;
        g.colwise() += bias(l);
        auto gi = g.topRows(H()), gf = g.middleRows(H(), H()), gg = g.middleRows(2 * H(), H()),
             go = g.bottomRows(H());
        gi = sigmoid(gi);
        gf = sigmoid(gf);
        gg = gg.array().tanh().matrix();
        go = sigmoid(go);
        Mat c = gf.cwiseProduct(cp) + gi.cwiseProduct(gg);
        Mat tc = c.array().tanh().matrix();
        Mat h = go.cwiseProduct(tc);
        state.h[l] = h;
        state.c[l] = c;
        tp.xh[l].push_back(std::move(xh));
        tp.gates[l].push_back(std::move(g));
        tp.c_prev[l].push_back(std::move(cp));
        tp.c[l].push_back(std::move(c));
        tp.tanh_c[l].push_back(std::move(tc));
        below = std::move(h);
      }
      tp.h_top.middleCols(static_cast<Eigen::Index>(t) * B, B) = below;
    }
    tp.probs = out_weights() * tp.h_top;
    tp.probs.colwise() += out_bias();
    softmax_columns(tp.probs);
    return tp;
  }

  /// Mean cross-entropy (nats) of `targets` under a recorded tape and its
  /// gradient, accumulated into `grad` (same layout as params()).
  Scalar backward(const Tape& tp, std::span<const TokenId> inputs, std::span<const TokenId> targets,
                  Vec& grad) const {
    const auto B = static_cast<Eigen::Index>(tp.streams);
    const auto N = static_cast<Eigen::Index>(tp.steps) * B;
    if (targets.size() != static_cast<std::size_t>(N)) throw InvalidArgument("lstm backward: target grid mismatch");
    if (grad.size() != params_.size()) grad = Vec::Zero(params_.size());
    const Scalar scale = Scalar(1) / static_cast<Scalar>(N);
    Scalar loss = 0;
    Mat dlogits = tp.probs;
    for (Eigen::Index j = 0; j < N; ++j) {
      const auto y = targets[static_cast<std::size_t>(j)];
      if (y >= vocab_) throw InvalidArgument("lstm backward: target id out of range");
      loss -= std::log(std::max(tp.probs(y, j), std::numeric_limits<Scalar>::min()));
      dlogits(y, j) -= Scalar(1);
    }
    dlogits *= scale;
    MatMap(grad.data() + out_off_, V(), H()).noalias() += dlogits * tp.h_top.transpose();
    VecMap(grad.data() + out_off_ + V() * H(), V()) += dlogits.rowwise().sum();
    Mat dbelow = out_weights().transpose() * dlogits;  // H x N, gradient wrt top-layer h

    const std::size_t L = cfg_.num_layers;
    for (std::size_t li = L; li-- > 0;) {
      const Eigen::Index in = in_dim(li);
      MatMap dW(grad.data() + layer_off_[li], 4 * H(), in + H());
      VecMap db(grad.data() + bias_off(li), 4 * H());
      Mat dx(in, N);
      Mat dh_next = Mat::Zero(H(), B), dc_next = Mat::Zero(H(), B);
      for (std::size_t t = tp.steps; t-- > 0;) {
        const auto col = static_cast<Eigen::Index>(t) * B;
        const Mat& g = tp.gates[li][t];
        const auto gi = g.topRows(H()), gf = g.middleRows(H(), H()), gg = g.middleRows(2 * H(), H()),
                   go = g.bottomRows(H());
        const Mat dh = dbelow.middleCols(col, B) + dh_next;
        const Mat& tc = tp.tanh_c[li][t];
        Mat dc = dh.cwiseProduct(go).cwiseProduct((Scalar(1) - tc.array().square()).matrix()) + dc_next;
        Mat da(4 * H(), B);
        da.topRows(H()) = dc.cwiseProduct(gg).cwiseProduct(sig_grad(gi));
        da.middleRows(H(), H()) = dc.cwiseProduct(tp.c_prev[li][t]).cwiseProduct(sig_grad(gf));
        da.middleRows(2 * H(), H()) = dc.cwiseProduct(gi).cwiseProduct((Scalar(1) - gg.array().square()).matrix());
        da.bottomRows(H()) = dh.cwiseProduct(tc).cwiseProduct(sig_grad(go));
        dW.noalias() += da * tp.xh[li][t].transpose();
        db += da.rowwise().sum();
        Mat dxh = weights(li).transpose() * da;
        dx.middleCols(col, B) = dxh.topRows(in);
        dh_next = dxh.bottomRows(H());
        dc_next = dc.cwiseProduct(gf);
        for (Eigen::Index b = 0; b < B; ++b) {
          const Scalar k = tp.keep[t][static_cast<std::size_t>(b)];
          dh_next.col(b) *= k;
          dc_next.col(b) *= k;
        }
      }
      dbelow = std::move(dx);
    }
    MatMap demb(grad.data() + embed_off_, E(), V());
    for (Eigen::Index j = 0; j < N; ++j) demb.col(inputs[static_cast<std::size_t>(j)]) += dbelow.col(j);
    return loss * scale;
  }

  /// Per-position next-token distributions for one sequence (columns of the
  /// returned V x T matrix) and the final state, starting from a zero state.
  std::pair<Mat, State> predict(std::span<const TokenId> inputs, TokenId reset_token) const {
    if (inputs.empty()) throw InvalidArgument("lstm forward: empty input");
    State st = zero_state(1);
    auto tp = forward(inputs, 1, st, reset_token);
    return {std::move(tp.probs), std::move(st)};
  }

  /// Surprisal in bits of `sentence` followed by </s>, read after <s>.
  double surprisal(std::span<const TokenId> sentence, TokenId bos, TokenId eos) const {
    auto [inputs, targets] = sentence_io(sentence, bos, eos);
    State st = zero_state(1);
    auto tp = forward(inputs, 1, st, bos);
    double bits = 0;
    for (std::size_t j = 0; j < targets.size(); ++j)
      bits -= std::log2(static_cast<double>(tp.probs(targets[j], static_cast<Eigen::Index>(j))));
    return bits;
  }

  /// Mean cross-entropy (nats) of one sentence.
  double sentence_loss(std::span<const TokenId> sentence, TokenId bos, TokenId eos) const {
    auto [inputs, targets] = sentence_io(sentence, bos, eos);
    State st = zero_state(1);
    auto tp = forward(inputs, 1, st, bos);
    double nats = 0;
    for (std::size_t j = 0; j < targets.size(); ++j)
      nats -= std::log(static_cast<double>(tp.probs(targets[j], static_cast<Eigen::Index>(j))));
    return nats / static_cast<double>(targets.size());
  }

  /// Mean cross-entropy (nats) and its full gradient for one sentence.
  std::pair<Scalar, Vec> sentence_loss_grad(std::span<const TokenId> sentence, TokenId bos, TokenId eos) const {
    auto [inputs, targets] = sentence_io(sentence, bos, eos);
    State st = zero_state(1);
    auto tp = forward(inputs, 1, st, bos);
    Vec grad = Vec::Zero(params_.size());
    const Scalar loss = backward(tp, inputs, targets, grad);
    return {loss, std::move(grad)};
  }

  static std::pair<std::vector<TokenId>, std::vector<TokenId>> sentence_io(std::span<const TokenId> sentence,
                                                                           TokenId bos, TokenId eos) {
    std::vector<TokenId> inputs{bos}, targets(sentence.begin(), sentence.end());
    inputs.insert(inputs.end(), sentence.begin(), sentence.end());
    targets.push_back(eos);
    return {std::move(inputs), std::move(targets)};
  }

  bool all_finite() const { return params_.allFinite(); }

  /// In-place SGD step with global-norm clipping. Returns the pre-clip norm.
  double sgd_step(const Vec& grad, double lr, double clip) {
    const double norm = static_cast<double>(grad.norm());
    if (!std::isfinite(norm)) throw NumericError("lstm: non-finite gradient");
    const double s = norm > clip ? clip / norm : 1.0;
    params_ -= static_cast<Scalar>(lr * s) * grad;
    return norm;
  }

  // Checkpoints ---------------------------------------------------------------
  // Text header line, then the flat parameter vector as little-endian IEEE
  // values of the model's scalar width:
  //   primeprobe-lstm 1 scalar=<4|8> vocab=<V> vocab_hash=<hex> <config...>\n<bytes>
  std::string serialize(std::uint64_t vocab_hash) const {
    std::string out = "primeprobe-lstm 1 scalar=" + std::to_string(sizeof(Scalar)) +
                      " vocab=" + std::to_string(vocab_) + " vocab_hash=" + hex64(vocab_hash) + ' ' +
                      cfg_.describe() + '\n';
    const auto bytes = static_cast<std::size_t>(params_.size()) * sizeof(Scalar);
    const auto at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, params_.data(), bytes);
    return out;
  }

  static LstmModel deserialize(std::string_view data, std::uint64_t* vocab_hash = nullptr) {
    const auto nl = data.find('\n');
    if (nl == std::string_view::npos) throw ParseError("lstm checkpoint: missing header");
    auto fields = split(data.substr(0, nl), ' ');
    if (fields.size() < 2 || fields[0] != "primeprobe-lstm" || fields[1] != "1")
      throw ParseError("lstm checkpoint: bad header");
    LstmConfig cfg;
    std::size_t vocab = 0, width = 0;
    std::uint64_t vh = 0;
    for (std::size_t i = 2; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string_view::npos) throw ParseError("lstm checkpoint: bad header field");
      const auto k = fields[i].substr(0, eq), v = fields[i].substr(eq + 1);
      if (k == "scalar") width = parse_number<std::size_t>(v, k);
      else if (k == "vocab") vocab = parse_number<std::size_t>(v, k);
      else if (k == "vocab_hash") {
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), vh, 16);
        if (ec != std::errc{} || p != v.data() + v.size()) throw ParseError("lstm checkpoint: bad vocab_hash");
      }
      else if (k == "embed_dim") cfg.embed_dim = parse_number<std::size_t>(v, k);
      else if (k == "hidden_dim") cfg.hidden_dim = parse_number<std::size_t>(v, k);
      else if (k == "num_layers") cfg.num_layers = parse_number<std::size_t>(v, k);
      else if (k == "bptt_len") cfg.bptt_len = parse_number<std::size_t>(v, k);
      else if (k == "batch_size") cfg.batch_size = parse_number<std::size_t>(v, k);
      else if (k == "epochs") cfg.epochs = parse_number<std::size_t>(v, k);
      else if (k == "train_lr") cfg.train_lr = parse_number<double>(v, k);
      else if (k == "adapt_lr") cfg.adapt_lr = parse_number<double>(v, k);
      else if (k == "grad_clip") cfg.grad_clip = parse_number<double>(v, k);
      else if (k == "seed") cfg.seed = parse_number<std::uint64_t>(v, k);
      else throw ParseError("lstm checkpoint: unknown header field '" + std::string(k) + "'");
    }
    if (width != sizeof(Scalar)) throw ParseError("lstm checkpoint: scalar width mismatch");
    cfg.validate();
    if (vocab < 3) throw ParseError("lstm checkpoint: bad vocabulary size");
    LstmModel m(cfg, vocab);
    const auto body = data.substr(nl + 1);
    if (body.size() != m.num_params() * sizeof(Scalar))
      throw ParseError("lstm checkpoint: expected " + std::to_string(m.num_params() * sizeof(Scalar)) +
                       " parameter bytes, found " + std::to_string(body.size()));
    std::memcpy(m.params_.data(), body.data(), body.size());
    if (vocab_hash) *vocab_hash = vh;
    return m;
  }

  friend bool operator==(const LstmModel& a, const LstmModel& b) {
    return a.vocab_ == b.vocab_ && a.params_.size() == b.params_.size() && a.params_ == b.params_;
  }

 private:
  LstmModel(const LstmConfig& cfg, std::size_t vocab) : cfg_(cfg), vocab_(vocab) {
    Eigen::Index off = 0;
    embed_off_ = off;
    off += E() * V();
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      layer_off_.push_back(off);
      off += 4 * H() * (in_dim(l) + H()) + 4 * H();
    }
    out_off_ = off;
    off += V() * H() + V();
    params_ = Vec::Zero(off);
  }

  Eigen::Index E() const { return static_cast<Eigen::Index>(cfg_.embed_dim); }
  Eigen::Index H() const { return static_cast<Eigen::Index>(cfg_.hidden_dim); }
  Eigen::Index V() const { return static_cast<Eigen::Index>(vocab_); }
  Eigen::Index in_dim(std::size_t l) const { return l == 0 ? E() : H(); }
  Eigen::Index bias_off(std::size_t l) const { return layer_off_[l] + 4 * H() * (in_dim(l) + H()); }
  Scalar* ptr(Eigen::Index off) { return params_.data() + off; }
  const Scalar* ptr(Eigen::Index off) const { return params_.data() + off; }

  template <class X>
  static Mat sigmoid(const Eigen::MatrixBase<X>& x) {
    return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
  }
  template <class X>
  static Mat sig_grad(const Eigen::MatrixBase<X>& s) {
    return s.cwiseProduct((Scalar(1) - s.array()).matrix());
  }
  static void softmax_columns(Mat& z) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      auto col = z.col(j);
      col.array() -= col.maxCoeff();
      col = col.array().exp().matrix();
      col /= col.sum();
    }
  }

  LstmConfig cfg_;
  std::size_t vocab_ = 0;
  Eigen::Index embed_off_ = 0, out_off_ = 0;
  std::vector<Eigen::Index> layer_off_;
  Vec params_;
};

// ---------------------------------------------------------------------------
// Training and adaptation

struct TrainResult {
  std::vector<double> epoch_bits;  // mean cross-entropy per token, bits
};

/// Trains in place by truncated BPTT. Sentences are shuffled per epoch and
/// laid end to end (<s> w_1 .. w_n predicting w_1 .. w_n </s>), then cut into
/// batch_size contiguous streams processed bptt_len steps at a time.
template <class Scalar>
TrainResult train_lstm(LstmModel<Scalar>& model, const Corpus& corpus, const Vocabulary& vocab) {
  const auto& cfg = model.config();
  if (corpus.sentences.empty()) throw InvalidArgument("train_lstm: empty corpus");
  if (vocab.size() != model.vocab_size()) throw InvalidArgument("train_lstm: vocabulary size mismatch");
  TrainResult result;
  const TokenId bos = vocab.bos_id(), eos = vocab.eos_id();
  std::vector<std::size_t> order(corpus.sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  typename LstmModel<Scalar>::Vec grad = LstmModel<Scalar>::Vec::Zero(static_cast<Eigen::Index>(model.num_params()));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x7a17ULL, epoch));
    rng.shuffle(order);
    std::vector<TokenId> in, out;
    for (auto i : order) {
      auto [x, y] = LstmModel<Scalar>::sentence_io(corpus.sentences[i], bos, eos);
      in.insert(in.end(), x.begin(), x.end());
      out.insert(out.end(), y.begin(), y.end());
    }
    const std::size_t B = std::min(cfg.batch_size, in.size());
    const std::size_t len = in.size() / B;  // trailing remainder dropped
    auto state = model.zero_state(B);
    double nats = 0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < len; start += cfg.bptt_len) {
      const std::size_t T = std::min(cfg.bptt_len, len - start);
      std::vector<TokenId> xi(T * B), yi(T * B);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < B; ++b) {
          xi[t * B + b] = in[b * len + start + t];
          yi[t * B + b] = out[b * len + start + t];
        }
      auto tape = model.forward(xi, B, state, bos);
      grad.setZero();
      const double loss = static_cast<double>(model.backward(tape, xi, yi, grad));
      if (!std::isfinite(loss))
        throw NumericError("train_lstm: loss became non-finite in epoch " + std::to_string(epoch) +
                           " at step " + std::to_string(start));
      model.sgd_step(grad, cfg.train_lr, cfg.grad_clip);
      nats += loss * static_cast<double>(T * B);
      tokens += T * B;
    }
    if (!model.all_finite()) throw NumericError("train_lstm: parameters diverged in epoch " + std::to_string(epoch));
    result.epoch_bits.push_back(nats / static_cast<double>(tokens) / std::log(2.0));
  }
  return result;
}

/// Copy of `base` after one SGD step per sentence, in the given order. With
/// `carry_state` the recurrent state at the end of each sentence seeds the
/// next one (gradients still stop at sentence boundaries); otherwise every
/// sentence starts from the zero state.
template <class Scalar>
LstmModel<Scalar> adapt_lstm(const LstmModel<Scalar>& base, std::span<const TokenSeq> sentences,
                             const Vocabulary& vocab, double lr, bool carry_state = false) {
  LstmModel<Scalar> m = base;
  auto state = m.zero_state(1);
  const TokenId no_reset = static_cast<TokenId>(m.vocab_size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto [inputs, targets] = LstmModel<Scalar>::sentence_io(sentences[i], vocab.bos_id(), vocab.eos_id());
    if (!carry_state) state = m.zero_state(1);
    auto tape = m.forward(inputs, 1, state, carry_state ? no_reset : vocab.bos_id());
    typename LstmModel<Scalar>::Vec grad;
    const Scalar loss = m.backward(tape, inputs, targets, grad);
    if (!std::isfinite(static_cast<double>(loss)) || !grad.allFinite())
      throw NumericError("adapt_lstm: non-finite gradient at adaptation sentence " + std::to_string(i));
    m.sgd_step(grad, lr, m.config().grad_clip);
  }
  return m;
}

/// An LSTM bundled with its vocabulary and adaptation settings; the interface
/// the priming driver expects from a model family.
template <class Scalar>
class LstmLanguageModel {
 public:
  LstmLanguageModel(LstmModel<Scalar> net, std::shared_ptr<const Vocabulary> vocab, bool carry_state = false)
      : net_(std::move(net)), vocab_(std::move(vocab)), carry_state_(carry_state) {
    if (!vocab_ || vocab_->size() != net_.vocab_size())
      throw InvalidArgument("LstmLanguageModel: vocabulary does not match the network");
  }

  const Vocabulary& vocab() const { return *vocab_; }
  const LstmModel<Scalar>& net() const { return net_; }

  double surprisal(std::span<const TokenId> sentence) const {
    return net_.surprisal(sentence, vocab_->bos_id(), vocab_->eos_id());
  }

  LstmLanguageModel adapt(std::span<const TokenSeq> sentences) const {
    return LstmLanguageModel(
        adapt_lstm(net_, sentences, *vocab_, net_.config().effective_adapt_lr(), carry_state_), vocab_,
        carry_state_);
  }

 private:
  LstmModel<Scalar> net_;
  std::shared_ptr<const Vocabulary> vocab_;
  bool carry_state_ = false;
};

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

/// Compares the analytic gradient of the mean sentence cross-entropy with
/// central differences on up to `max_params` parameters drawn from
/// `candidates` (all parameters when empty).
template <class Scalar>
GradCheckResult grad_check(const LstmModel<Scalar>& model, std::span<const TokenId> sentence,
                           const Vocabulary& vocab, double epsilon, std::size_t max_params = 500,
                           std::vector<std::size_t> candidates = {}, std::uint64_t seed = 0) {
  if (sentence.empty()) throw InvalidArgument("grad_check: empty input");
  const TokenId bos = vocab.bos_id(), eos = vocab.eos_id();
  const auto grad = model.sentence_loss_grad(sentence, bos, eos).second;
  if (candidates.empty()) {
    candidates.resize(model.num_params());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  }
  if (candidates.size() > max_params) {
    Rng rng(derive_seed(seed, 0x9c4ULL));
    rng.shuffle(candidates);
    candidates.resize(max_params);
  }
  LstmModel<Scalar> probe = model;
  GradCheckResult r;
  for (auto i : candidates) {
    const auto idx = static_cast<Eigen::Index>(i);
    const Scalar orig = probe.params()[idx];
    probe.params()[idx] = orig + static_cast<Scalar>(epsilon);
    const double up = probe.sentence_loss(sentence, bos, eos);
    probe.params()[idx] = orig - static_cast<Scalar>(epsilon);
    const double down = probe.sentence_loss(sentence, bos, eos);
    probe.params()[idx] = orig;
    const double numeric = (up - down) / (2 * epsilon);
    const double analytic = static_cast<double>(grad[idx]);
    const double denom = std::max(std::abs(numeric) + std::abs(analytic), 1e-8);
    r.max_rel_error = std::max(r.max_rel_error, std::abs(numeric - analytic) / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace primeprobe
