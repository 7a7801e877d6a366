#pragma once

// General value functions learned with true online TD(lambda) over sparse
// binary features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gvfnet/common.hpp"
#include "gvfnet/kanerva.hpp"

namespace gvfnet {

/// Expected lookahead of a discounted prediction, 1 / (1 - gamma).
inline double horizon(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("horizon: gamma must lie in [0, 1)");
  return 1.0 / (1.0 - gamma);
}

struct TdParams {
  double gamma = 0.94;
  double lambda = 0.5;
  double alpha = 0.1 / 625.0;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gvf: gamma must lie in [0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("gvf: lambda must lie in [0, 1]");
    if (!(alpha > 0.0)) throw ValidationError("gvf: alpha must be positive");
  }
};

struct GvfSpec {
  std::size_t cumulant_channel = 0;
  TdParams td;
};

inline double sparse_dot(std::span<const double> w, const FeatureVector& x) {
  double v = 0.0;
  for (auto i : x.active) v += w[i];
  return v;
}

/// One GVF with a dense eligibility trace; the reference form of the update.
class GvfLearner {
public:
  GvfLearner(GvfSpec spec, std::size_t feature_length)
    : spec_(spec), w_(feature_length, 0.0), e_(feature_length, 0.0) {
    spec_.td.validate();
  }

  double predict(const FeatureVector& x) const {
    check(x);
    return sparse_dot(w_, x);
  }

  /// One transition x -> x_next with cumulant z_next observed on arrival.
  /// Returns the prediction for x_next under the updated weights.
  double step(const FeatureVector& x, const FeatureVector& x_next, double z_next) {
    check(x);
    check(x_next);
    const auto [gamma, lambda, alpha] = spec_.td;
    const double v = sparse_dot(w_, x);
    const double v_next = sparse_dot(w_, x_next);
    const double delta = z_next + gamma * v_next - v;

    const double ex = sparse_dot(e_, x);
    const double decay = gamma * lambda;
    for (double& ei : e_) ei *= decay;
    const double bump = 1.0 - alpha * decay * ex;
    for (auto i : x.active) e_[i] += bump;

    const double a = alpha * (delta + v - v_old_);
    const double b = alpha * (v - v_old_);
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] += a * e_[i];
    for (auto i : x.active) w_[i] -= b;

    v_old_ = v_next;
    return sparse_dot(w_, x_next);
  }

  const GvfSpec& spec() const { return spec_; }
  std::span<const double> weights() const { return w_; }
  std::span<double> weights() { return w_; }
  std::span<const double> trace() const { return e_; }
  double v_old() const { return v_old_; }

private:
  void check(const FeatureVector& x) const {
    if (x.length != w_.size()) throw ValidationError("gvf: feature length does not match weight length");
  }

  GvfSpec spec_;
  std::vector<double> w_;
  std::vector<double> e_;
  double v_old_ = 0.0;
};

/// Clamped (1 - gamma) rescaling that puts a prediction on the cumulant's scale.
inline double normalize_prediction(double v, double gamma) {
  return std::clamp(v * (1.0 - gamma), 0.0, 1.5);
}

/// Bank of GVFs, channel c predicting cumulant c, all fed the same features.
///
/// The trace recursion never reads the cumulant, so with shared (gamma,
/// lambda, alpha) every learner's trace is identical and the bank keeps one.
/// Trace entries that decay below `trace_tolerance` are dropped, so each step
/// touches only recently active features.
class GvfBank {
public:
  GvfBank(std::size_t n_channels, std::size_t feature_length, TdParams td, double trace_tolerance = 1e-12)
    : n_ch_(n_channels), length_(feature_length), td_(td), tol_(trace_tolerance),
      w_(n_channels * feature_length, 0.0), e_(feature_length, 0.0), in_nz_(feature_length, 0),
      v_old_(n_channels, 0.0), last_(n_channels, 0.0), v_(n_channels), v_next_(n_channels),
      a_(n_channels), b_(n_channels) {
    if (n_channels == 0) throw ValidationError("gvf bank needs at least one channel");
    td_.validate();
  }

  std::size_t channels() const { return n_ch_; }
  std::size_t feature_length() const { return length_; }
  const TdParams& params() const { return td_; }
  std::uint64_t steps() const { return steps_; }

  /// Runs one transition for every channel, cumulant c = cumulants_next[c].
  /// Returns the post-update predictions for x_next.
  std::span<const double> step(const FeatureVector& x, const FeatureVector& x_next,
                               std::span<const double> cumulants_next) {
    check(x);
    check(x_next);
    if (cumulants_next.size() != n_ch_) throw ValidationError("gvf bank: cumulant count mismatch");
    const auto [gamma, lambda, alpha] = td_;

    values(x, v_);
    values(x_next, v_next_);

    double ex = 0.0;
    for (auto i : x.active) ex += e_[i];
    const double decay = gamma * lambda;
    std::size_t kept = 0;
    for (auto i : nz_) {
      e_[i] *= decay;
      if (std::abs(e_[i]) < tol_) {
        e_[i] = 0.0;
        in_nz_[i] = 0;
      } else {
        nz_[kept++] = i;
      }
    }
    nz_.resize(kept);
    const double bump = 1.0 - alpha * decay * ex;
    for (auto i : x.active) {
      e_[i] += bump;
      if (!in_nz_[i]) {
        in_nz_[i] = 1;
        nz_.push_back(i);
      }
    }

    for (std::size_t c = 0; c < n_ch_; ++c) {
      const double delta = cumulants_next[c] + gamma * v_next_[c] - v_[c];
      a_[c] = alpha * (delta + v_[c] - v_old_[c]);
      b_[c] = alpha * (v_[c] - v_old_[c]);
    }
    for (auto i : nz_) {
      const double ei = e_[i];
      double* row = w_.data() + static_cast<std::size_t>(i) * n_ch_;
      for (std::size_t c = 0; c < n_ch_; ++c) row[c] += a_[c] * ei;
    }
    for (auto i : x.active) {
      double* row = w_.data() + static_cast<std::size_t>(i) * n_ch_;
      for (std::size_t c = 0; c < n_ch_; ++c) row[c] -= b_[c];
    }

    std::copy(v_next_.begin(), v_next_.end(), v_old_.begin());
    values(x_next, last_);
    ++steps_;
    return last_;
  }

  std::span<const double> predict(const FeatureVector& x) {
    check(x);
    values(x, v_);
    return v_;
  }

  /// Post-update predictions from the most recent step.
  std::span<const double> predictions() const { return last_; }

  std::vector<double> normalized_predictions() const {
    std::vector<double> out(n_ch_);
    for (std::size_t c = 0; c < n_ch_; ++c) out[c] = normalize_prediction(last_[c], td_.gamma);
    return out;
  }

  double weight(std::size_t feature, std::size_t channel) const { return w_[feature * n_ch_ + channel]; }
  double trace(std::size_t feature) const { return e_[feature]; }
  std::size_t trace_support() const { return nz_.size(); }

  void save(std::ostream& os) const;
  static GvfBank load(std::istream& is);

private:
  void check(const FeatureVector& x) const {
    if (x.length != length_) throw ValidationError("gvf bank: feature length mismatch");
  }

  void values(const FeatureVector& x, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (auto i : x.active) {
      const double* row = w_.data() + static_cast<std::size_t>(i) * n_ch_;
      for (std::size_t c = 0; c < n_ch_; ++c) out[c] += row[c];
    }
  }

  std::size_t n_ch_;
  std::size_t length_;
  TdParams td_;
  double tol_;
  std::vector<double> w_;  // feature-major: w_[i * n_ch_ + c]
  std::vector<double> e_;
  std::vector<std::uint32_t> nz_;
  std::vector<std::uint8_t> in_nz_;
  std::vector<double> v_old_;
  std::vector<double> last_;
  std::vector<double> v_, v_next_, a_, b_;
  std::uint64_t steps_ = 0;
};

inline constexpr char kGvfBankMagic[8] = {'G', 'V', 'F', 'N', 'B', 'A', 'N', 'K'};
inline constexpr std::uint32_t kGvfBankVersion = 1;

inline void GvfBank::save(std::ostream& os) const {
  auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_vec = [&](const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  os.write(kGvfBankMagic, sizeof kGvfBankMagic);
  put(kGvfBankVersion);
  put(static_cast<std::uint64_t>(n_ch_));
  put(static_cast<std::uint64_t>(length_));
  put(td_.gamma);
  put(td_.lambda);
  put(td_.alpha);
  put(tol_);
  put(steps_);
  put_vec(w_);
  put_vec(e_);
  put_vec(v_old_);
  put_vec(last_);
  if (!os) throw std::runtime_error("failed to write gvf bank checkpoint");
}

inline GvfBank GvfBank::load(std::istream& is) {
  char magic[sizeof kGvfBankMagic];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + sizeof magic, kGvfBankMagic))
    throw ValidationError("not a gvf bank checkpoint");
  auto get = [&](auto& v) { is.read(reinterpret_cast<char*>(&v), sizeof v); };
  std::uint32_t version = 0;
  std::uint64_t n_ch = 0, length = 0;
  TdParams td;
  double tol = 0.0;
  get(version);
  if (version != kGvfBankVersion) throw ValidationError("unsupported gvf bank checkpoint version");
  get(n_ch);
  get(length);
  get(td.gamma);
  get(td.lambda);
  get(td.alpha);
  get(tol);
  if (!is || n_ch == 0 || length == 0 || n_ch * length > (1ull << 32))
    throw ValidationError("corrupt gvf bank checkpoint header");
  GvfBank bank(n_ch, length, td, tol);
  get(bank.steps_);
  auto get_vec = [&](std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  get_vec(bank.w_);
  get_vec(bank.e_);
  get_vec(bank.v_old_);
  get_vec(bank.last_);
  if (!is) throw ValidationError("truncated gvf bank checkpoint");
  for (std::size_t i = 0; i < length; ++i)
    if (bank.e_[i] != 0.0) {
      bank.in_nz_[i] = 1;
      bank.nz_.push_back(static_cast<std::uint32_t>(i));
    }
  return bank;
}

} // namespace gvfnet
