#pragma once

// Feed-forward terrain classifier in three wirings:
//   Control    actuals -> encoder -> head -> logits
//   InputGvf   [actuals; predictions] -> encoder -> head -> logits
//   LatentGvf  actuals -> encoder, then [encoding; predictions] -> head -> logits
// Hidden layers are ReLU, the output is a softmax over n_classes.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/replay_buffer.hpp"

namespace gvfnet {

enum class NetVariant : std::uint8_t { Control, InputGvf, LatentGvf };

inline constexpr std::array<NetVariant, 3> kAllVariants = {NetVariant::Control, NetVariant::InputGvf,
                                                           NetVariant::LatentGvf};

inline std::string_view variant_name(NetVariant v) {
  switch (v) {
    case NetVariant::Control: return "control";
    case NetVariant::InputGvf: return "input-gvf";
    case NetVariant::LatentGvf: return "latent-gvf";
  }
  return "?";
}

inline NetVariant variant_from_name(std::string_view s) {
  for (auto v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw ValidationError("unknown net variant '" + std::string(s) + "' (control|input-gvf|latent-gvf)");
}

inline bool uses_predictions(NetVariant v) { return v != NetVariant::Control; }

enum class OptimizerKind : std::uint8_t { Adam, Sgd };

struct NetConfig {
  NetVariant variant = NetVariant::Control;
  std::size_t n_actual = 30;
  std::size_t n_predictions = 30;
  std::size_t n_classes = kTerrainCount;
  std::vector<std::size_t> encoder_sizes{24, 16};
  std::vector<std::size_t> head_sizes{32, 16};
  double learning_rate = 0.001;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t init_seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("net config: " + m); };
    if (n_actual == 0) fail("n_actual must be positive");
    if (uses_predictions(variant) && n_predictions == 0) fail("GVF variants need n_predictions > 0");
    if (n_classes < 2) fail("n_classes must be at least 2");
    if (encoder_sizes.empty()) fail("at least one encoder layer is required");
    for (std::size_t i = 0; i < encoder_sizes.size(); ++i) {
      if (encoder_sizes[i] == 0) fail("layer sizes must be positive");
      if (i > 0 && encoder_sizes[i] >= encoder_sizes[i - 1]) fail("encoder sizes must be strictly decreasing");
    }
    for (auto h : head_sizes)
      if (h == 0) fail("layer sizes must be positive");
    if (!(learning_rate >= 0.0)) fail("learning_rate must be nonnegative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("Adam decay rates must lie in [0,1)");
    if (!(epsilon > 0.0)) fail("epsilon must be positive");
  }

  std::size_t input_width() const {
    return variant == NetVariant::InputGvf ? n_actual + n_predictions : n_actual;
  }
  std::size_t merge_width() const {
    return encoder_sizes.back() + (variant == NetVariant::LatentGvf ? n_predictions : 0);
  }
};

struct Classification {
  std::vector<double> logits;
  std::vector<double> probabilities;
  std::size_t label = 0;  // argmax, lowest index on ties
};

class PolicyNet {
public:
  explicit PolicyNet(NetConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.init_seed), static_cast<std::uint32_t>(cfg_.init_seed >> 32),
                      0x9e7u};
    std::mt19937_64 rng(seq);

    std::size_t in = cfg_.input_width();
    auto add = [&](std::size_t out) {
      Layer l;
      const double limit = std::sqrt(6.0 / static_cast<double>(in));  // He-uniform
      std::uniform_real_distribution<double> u(-limit, limit);
      l.W.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
      for (Eigen::Index r = 0; r < l.W.rows(); ++r)
        for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = u(rng);
      l.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
      l.mW = Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols());
      l.vW = l.mW;
      l.mb = Eigen::VectorXd::Zero(l.b.size());
      l.vb = l.mb;
      layers_.push_back(std::move(l));
      in = out;
    };
    for (auto s : cfg_.encoder_sizes) add(s);
    in = cfg_.merge_width();
    for (auto s : cfg_.head_sizes) add(s);
    add(cfg_.n_classes);
  }

  const NetConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return steps_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t encoder_layer_count() const { return cfg_.encoder_sizes.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
  }

  /// Weights row-major per layer, followed by that layer's biases.
  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.W.rows(); ++r)
        for (Eigen::Index c = 0; c < l.W.cols(); ++c) p.push_back(l.W(r, c));
      for (Eigen::Index r = 0; r < l.b.size(); ++r) p.push_back(l.b(r));
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw ValidationError("parameter vector length mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.W.rows(); ++r)
        for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = p[k++];
      for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = p[k++];
    }
  }

  Classification forward(std::span<const double> actuals,
                         std::optional<std::span<const double>> predictions = std::nullopt) const {
    check_inputs(actuals, predictions);
    Eigen::MatrixXd a = Eigen::Map<const Eigen::VectorXd>(actuals.data(), static_cast<Eigen::Index>(actuals.size()));
    Eigen::MatrixXd p;
    if (uses_predictions(cfg_.variant))
      p = Eigen::Map<const Eigen::VectorXd>(predictions->data(), static_cast<Eigen::Index>(predictions->size()));
    Workspace ws;
    run_forward(a, p, ws);
    Classification out;
    const Eigen::VectorXd logits = ws.act.back().col(0);
    const Eigen::VectorXd probs = softmax(logits);
    out.logits.assign(logits.data(), logits.data() + logits.size());
    out.probabilities.assign(probs.data(), probs.data() + probs.size());
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < probs.size(); ++i)
      if (logits(i) > logits(best)) best = i;
    out.label = static_cast<std::size_t>(best);
    return out;
  }

  Classification forward(const Sample& s) const {
    return uses_predictions(cfg_.variant) ? forward(s.actuals, std::span<const double>(s.predictions))
                                          : forward(s.actuals);
  }

  /// Mean cross-entropy over the batch.
  double loss(const Batch& batch) const {
    Workspace ws;
    return forward_batch(batch, ws);
  }

  /// Mean cross-entropy and its gradient, flattened in parameters() order.
  double gradient(const Batch& batch, std::vector<double>& grad) const {
    Workspace ws;
    const double l = forward_batch(batch, ws);
    backward(batch, ws);
    grad.clear();
    grad.reserve(parameter_count());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& gW = ws.gW[i];
      for (Eigen::Index r = 0; r < gW.rows(); ++r)
        for (Eigen::Index c = 0; c < gW.cols(); ++c) grad.push_back(gW(r, c));
      for (Eigen::Index r = 0; r < ws.gb[i].size(); ++r) grad.push_back(ws.gb[i](r));
    }
    return l;
  }

  /// One optimizer step on the batch; returns the loss before the step.
  double train_batch(const Batch& batch) {
    const double l = forward_batch(batch, ws_);
    backward(batch, ws_);
    ++steps_;
    const double lr = cfg_.learning_rate;
    if (cfg_.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].W -= lr * ws_.gW[i];
        layers_[i].b -= lr * ws_.gb[i];
      }
      return l;
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.epsilon;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& L = layers_[i];
      L.mW = b1 * L.mW + (1.0 - b1) * ws_.gW[i];
      L.vW = b2 * L.vW + (1.0 - b2) * ws_.gW[i].cwiseAbs2();
      L.mb = b1 * L.mb + (1.0 - b1) * ws_.gb[i];
      L.vb = b2 * L.vb + (1.0 - b2) * ws_.gb[i].cwiseAbs2();
      L.W.array() -= lr * (L.mW.array() / c1) / ((L.vW.array() / c2).sqrt() + eps);
      L.b.array() -= lr * (L.mb.array() / c1) / ((L.vb.array() / c2).sqrt() + eps);
    }
    return l;
  }

  double train_batch(std::span<const Sample> samples) {
    Batch b;
    for (const auto& s : samples) b.push_back(&s);
    return train_batch(b);
  }

  bool operator==(const PolicyNet& o) const {
    if (steps_ != o.steps_ || layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = o.layers_[i];
      if (a.W != b.W || a.b != b.b || a.mW != b.mW || a.vW != b.vW || a.mb != b.mb || a.vb != b.vb) return false;
    }
    return true;
  }

  void save(std::ostream& os) const;
  static PolicyNet load(std::istream& is);

private:
  struct Layer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
    Eigen::MatrixXd mW, vW;
    Eigen::VectorXd mb, vb;
  };

  struct Workspace {
    std::vector<Eigen::MatrixXd> pre;  // pre-activations per layer
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[i+1] = output of layer i (head input after merge)
    Eigen::MatrixXd probs;
    std::vector<Eigen::MatrixXd> gW;
    std::vector<Eigen::VectorXd> gb;
  };

  static Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
  }

  void check_inputs(std::span<const double> actuals, std::optional<std::span<const double>> predictions) const {
    if (actuals.size() != cfg_.n_actual)
      throw ValidationError("policy net: expected " + std::to_string(cfg_.n_actual) + " actual signals, got " +
                            std::to_string(actuals.size()));
    if (uses_predictions(cfg_.variant)) {
      if (!predictions) throw ValidationError("policy net: variant " + std::string(variant_name(cfg_.variant)) +
                                              " requires GVF predictions");
      if (predictions->size() != cfg_.n_predictions)
        throw ValidationError("policy net: prediction width mismatch");
    }
  }

  // a: n_actual x B, p: n_predictions x B (ignored by Control).
  void run_forward(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, Workspace& ws) const {
    const std::size_t n_enc = cfg_.encoder_sizes.size();
    ws.pre.resize(layers_.size());
    ws.act.resize(layers_.size() + 1);
    if (cfg_.variant == NetVariant::InputGvf) {
      ws.act[0].resize(a.rows() + p.rows(), a.cols());
      ws.act[0] << a, p;
    } else {
      ws.act[0] = a;
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& L = layers_[i];
      ws.pre[i] = (L.W * ws.act[i]).colwise() + L.b;
      const bool last = i + 1 == layers_.size();
      Eigen::MatrixXd h = last ? ws.pre[i] : Eigen::MatrixXd(ws.pre[i].cwiseMax(0.0));
      if (i + 1 == n_enc && cfg_.variant == NetVariant::LatentGvf) {
        ws.act[i + 1].resize(h.rows() + p.rows(), h.cols());
        ws.act[i + 1] << h, p;
      } else {
        ws.act[i + 1] = std::move(h);
      }
    }
  }

  double forward_batch(const Batch& batch, Workspace& ws) const {
    if (batch.empty()) throw ValidationError("train_batch: batch is empty");
    const auto B = static_cast<Eigen::Index>(batch.size());
    Eigen::MatrixXd a(static_cast<Eigen::Index>(cfg_.n_actual), B);
    Eigen::MatrixXd p;
    const bool with_pred = uses_predictions(cfg_.variant);
    if (with_pred) p.resize(static_cast<Eigen::Index>(cfg_.n_predictions), B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const Sample& s = *batch[static_cast<std::size_t>(j)];
      if (s.label >= cfg_.n_classes)
        throw ValidationError("train_batch: label " + std::to_string(s.label) + " out of range");
      check_inputs(s.actuals, with_pred ? std::optional<std::span<const double>>(s.predictions) : std::nullopt);
      a.col(j) = Eigen::Map<const Eigen::VectorXd>(s.actuals.data(), a.rows());
      if (with_pred) p.col(j) = Eigen::Map<const Eigen::VectorXd>(s.predictions.data(), p.rows());
    }
    run_forward(a, p, ws);
    const Eigen::MatrixXd& logits = ws.act.back();
    ws.probs.resize(logits.rows(), B);
    double total = 0.0;
    for (Eigen::Index j = 0; j < B; ++j) {
      const double m = logits.col(j).maxCoeff();
      const Eigen::VectorXd e = (logits.col(j).array() - m).exp();
      const double z = e.sum();
      ws.probs.col(j) = e / z;
      const auto y = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(j)]->label);
      total += -(logits(y, j) - m - std::log(z));
    }
    return total / static_cast<double>(B);
  }

  void backward(const Batch& batch, Workspace& ws) const {
    const auto B = static_cast<Eigen::Index>(batch.size());
    const std::size_t n_enc = cfg_.encoder_sizes.size();
    ws.gW.resize(layers_.size());
    ws.gb.resize(layers_.size());
    Eigen::MatrixXd g = ws.probs;  // d loss / d logits
    for (Eigen::Index j = 0; j < B; ++j) g(static_cast<Eigen::Index>(batch[static_cast<std::size_t>(j)]->label), j) -= 1.0;
    g /= static_cast<double>(B);
    for (std::size_t i = layers_.size(); i-- > 0;) {
      ws.gW[i] = g * ws.act[i].transpose();
      ws.gb[i] = g.rowwise().sum();
      if (i == 0) break;
      Eigen::MatrixXd up = layers_[i].W.transpose() * g;
      if (i == n_enc && cfg_.variant == NetVariant::LatentGvf)
        up = up.topRows(static_cast<Eigen::Index>(cfg_.encoder_sizes.back())).eval();
      g = up.cwiseProduct((ws.pre[i - 1].array() > 0.0).cast<double>().matrix());
    }
  }

  NetConfig cfg_;
  std::vector<Layer> layers_;
  std::uint64_t steps_ = 0;
  Workspace ws_;
};

// Checkpoint: magic, version, config echo, step counter, then per layer the
// shape followed by W, b and the optimizer moments.
inline constexpr char kPolicyMagic[8] = {'G', 'V', 'F', 'N', 'P', 'N', 'E', 'T'};
inline constexpr std::uint32_t kPolicyVersion = 1;

inline void PolicyNet::save(std::ostream& os) const {
  auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_sizes = [&](const std::vector<std::size_t>& v) {
    put(static_cast<std::uint64_t>(v.size()));
    for (auto x : v) put(static_cast<std::uint64_t>(x));
  };
  auto put_mat = [&](const auto& m) {
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  };
  os.write(kPolicyMagic, sizeof kPolicyMagic);
  put(kPolicyVersion);
  put(static_cast<std::uint8_t>(cfg_.variant));
  put(static_cast<std::uint64_t>(cfg_.n_actual));
  put(static_cast<std::uint64_t>(cfg_.n_predictions));
  put(static_cast<std::uint64_t>(cfg_.n_classes));
  put_sizes(cfg_.encoder_sizes);
  put_sizes(cfg_.head_sizes);
  put(cfg_.learning_rate);
  put(static_cast<std::uint8_t>(cfg_.optimizer));
  put(cfg_.beta1);
  put(cfg_.beta2);
  put(cfg_.epsilon);
  put(cfg_.init_seed);
  put(steps_);
  for (const auto& L : layers_) {
    put(static_cast<std::uint64_t>(L.W.rows()));
    put(static_cast<std::uint64_t>(L.W.cols()));
    put_mat(L.W);
    put_mat(L.b);
    put_mat(L.mW);
    put_mat(L.vW);
    put_mat(L.mb);
    put_mat(L.vb);
  }
  if (!os) throw std::runtime_error("failed to write policy net checkpoint");
}

inline PolicyNet PolicyNet::load(std::istream& is) {
  char magic[sizeof kPolicyMagic];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + sizeof magic, kPolicyMagic))
    throw ValidationError("not a policy net checkpoint");
  auto get = [&](auto& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ValidationError("truncated policy net checkpoint");
  };
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    get(v);
    return v;
  };
  auto get_sizes = [&] {
    const auto n = get_u64();
    if (n > 64) throw ValidationError("corrupt policy net checkpoint");
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = get_u64();
    return v;
  };
  std::uint32_t version = 0;
  get(version);
  if (version != kPolicyVersion) throw ValidationError("unsupported policy net checkpoint version");
  NetConfig cfg;
  std::uint8_t tag = 0;
  get(tag);
  if (tag > 2) throw ValidationError("corrupt policy net checkpoint");
  cfg.variant = static_cast<NetVariant>(tag);
  cfg.n_actual = get_u64();
  cfg.n_predictions = get_u64();
  cfg.n_classes = get_u64();
  cfg.encoder_sizes = get_sizes();
  cfg.head_sizes = get_sizes();
  get(cfg.learning_rate);
  get(tag);
  if (tag > 1) throw ValidationError("corrupt policy net checkpoint");
  cfg.optimizer = static_cast<OptimizerKind>(tag);
  get(cfg.beta1);
  get(cfg.beta2);
  get(cfg.epsilon);
  get(cfg.init_seed);
  PolicyNet net(cfg);
  get(net.steps_);
  auto get_mat = [&](auto& m) {
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw ValidationError("truncated policy net checkpoint");
  };
  for (auto& L : net.layers_) {
    const auto rows = get_u64();
    const auto cols = get_u64();
    if (rows != static_cast<std::uint64_t>(L.W.rows()) || cols != static_cast<std::uint64_t>(L.W.cols()))
      throw ValidationError("policy net checkpoint layer shape mismatch");
    get_mat(L.W);
    get_mat(L.b);
    get_mat(L.mW);
    get_mat(L.vW);
    get_mat(L.mb);
    get_mat(L.vb);
  }
  return net;
}

} // namespace gvfnet
