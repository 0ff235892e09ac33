#pragma once

// Trainable span scorers: a hashed-feature linear model and a two-layer MLP
// head over the same hashed span representation.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "charparse/error.hpp"
#include "charparse/features.hpp"
#include "charparse/random.hpp"
#include "charparse/scores.hpp"

namespace charparse {

struct ForwardOptions {
  bool train_mode = false;
  std::uint64_t seed = 0;  // dropout stream, train mode only
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_vector(std::ostream& out, std::span<const double> v) {
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out << ' ';
    out << format_double(v[k]);
  }
  out << '\n';
}

inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v)) {
    throw DataError("non-numeric value '" + tok + "'");
  }
  return v;
}

inline std::vector<double> read_vector(std::istream& in, std::size_t count) {
  std::vector<double> v(count);
  std::string tok;
  for (auto& x : v) {
    if (!(in >> tok)) throw DataError("truncated parameter block");
    x = parse_double(tok);
  }
  return v;
}

inline void expect_key(std::istream& in, const std::string& key) {
  std::string got;
  if (!(in >> got) || got != key) throw DataError("expected '" + key + "', found '" + got + "'");
}

// Groups sorted gradient entries by span and calls fn(i, j, dense row).
template <class Fn>
void for_each_span_gradient(std::span<const ScoreGrad> grads, int num_labels, Fn&& fn) {
  std::map<std::pair<int, int>, std::vector<double>> by_span;
  for (const auto& g : grads) {
    if (!std::isfinite(g.value)) throw DataError("non-finite upstream gradient");
    if (g.label < 0 || g.label >= num_labels) throw UsageError("gradient label out of range");
    auto& row = by_span[{g.i, g.j}];
    if (row.empty()) row.assign(static_cast<std::size_t>(num_labels), 0.0);
    row[static_cast<std::size_t>(g.label)] += g.value;
  }
  for (const auto& [span, row] : by_span) fn(span.first, span.second, std::span<const double>(row));
}

}  // namespace detail

// score(i, j, l) = bias[l] + sum over active features f of weight[f][l].
class LinearScorer {
 public:
  struct Gradient {
    std::unordered_map<std::uint32_t, std::vector<double>> rows;
    std::vector<double> bias;
  };

  LinearScorer() = default;
  LinearScorer(std::uint32_t dim, int num_labels)
      : dim_(dim), labels_(num_labels), bias_(static_cast<std::size_t>(num_labels), 0.0) {
    if (dim == 0 || num_labels <= 0) throw UsageError("invalid LinearScorer dimensions");
  }

  std::uint32_t dim() const { return dim_; }
  int num_labels() const { return labels_; }
  std::size_t stored_rows() const { return rows_.size(); }

  void forward(const SpanRepresentation& rep, std::span<double> out) const {
    check_rep(rep);
    std::copy(bias_.begin(), bias_.end(), out.begin());
    for (const auto f : rep.ids) {
      if (const auto it = rows_.find(f); it != rows_.end()) {
        for (int l = 0; l < labels_; ++l) out[l] += it->second[l];
      }
    }
  }

  SpanScores score(const std::vector<std::string>& chars, const ForwardOptions& = {}) const {
    const int n = static_cast<int>(chars.size());
    SpanScores s(n, labels_);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j <= n; ++j) forward(span_representation(chars, i, j, dim_), s.row(i, j));
    }
    return s;
  }

  Gradient zero_gradient() const { return {{}, std::vector<double>(static_cast<std::size_t>(labels_), 0.0)}; }

  void backward(const std::vector<std::string>& chars, std::span<const ScoreGrad> upstream, Gradient& acc,
                const ForwardOptions& = {}) const {
    detail::for_each_span_gradient(upstream, labels_, [&](int i, int j, std::span<const double> g) {
      const SpanRepresentation rep = span_representation(chars, i, j, dim_);
      for (int l = 0; l < labels_; ++l) acc.bias[l] += g[l];
      for (const auto f : rep.ids) {
        auto& row = acc.rows[f];
        if (row.empty()) row.assign(static_cast<std::size_t>(labels_), 0.0);
        for (int l = 0; l < labels_; ++l) row[l] += g[l];
      }
    });
  }

  void apply(const Gradient& grad, double lr) {
    for (int l = 0; l < labels_; ++l) bias_[l] -= lr * grad.bias[l];
    for (const auto& [f, g] : grad.rows) {
      auto& row = rows_[f];
      if (row.empty()) row.assign(static_cast<std::size_t>(labels_), 0.0);
      for (int l = 0; l < labels_; ++l) row[l] -= lr * g[l];
    }
  }

  bool all_finite() const {
    const auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(bias_)) return false;
    return std::all_of(rows_.begin(), rows_.end(), [&](const auto& kv) { return finite(kv.second); });
  }

  void save(std::ostream& out) const {
    out << "linear " << dim_ << ' ' << labels_ << '\n' << "bias ";
    detail::write_vector(out, bias_);
    std::vector<std::uint32_t> keys;
    keys.reserve(rows_.size());
    for (const auto& kv : rows_) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    out << "rows " << keys.size() << '\n';
    for (const auto f : keys) {
      out << f << ' ';
      detail::write_vector(out, rows_.at(f));
    }
  }

  static LinearScorer load(std::istream& in) {
    detail::expect_key(in, "linear");
    std::uint32_t dim = 0;
    int labels = 0;
    if (!(in >> dim >> labels)) throw DataError("bad linear scorer header");
    LinearScorer s(dim, labels);
    detail::expect_key(in, "bias");
    s.bias_ = detail::read_vector(in, static_cast<std::size_t>(labels));
    detail::expect_key(in, "rows");
    std::size_t count = 0;
    if (!(in >> count)) throw DataError("bad row count");
    for (std::size_t k = 0; k < count; ++k) {
      std::uint32_t f = 0;
      if (!(in >> f) || f >= dim) throw DataError("bad feature row id");
      s.rows_[f] = detail::read_vector(in, static_cast<std::size_t>(labels));
    }
    return s;
  }

  friend bool operator==(const LinearScorer&, const LinearScorer&) = default;

 private:
  void check_rep(const SpanRepresentation& rep) const {
    if (rep.dim != dim_) throw UsageError("span representation dimension does not match scorer");
  }

  std::uint32_t dim_ = kDefaultFeatureDim;
  int labels_ = 0;
  std::vector<double> bias_;
  std::unordered_map<std::uint32_t, std::vector<double>> rows_;
};

struct MLPGradients {
  std::unordered_map<std::uint32_t, std::vector<double>> w1_rows;
  std::vector<double> b1;
  std::vector<double> w2;  // hidden x labels, row-major
  std::vector<double> b2;
};

// Two-layer MLP head: scores = W2^T relu(W1^T x + b1) + b2 with x the binary
// hashed feature vector of a span. W1 rows are sparse; a row that was never
// updated reads as its deterministic initial value, so the model never has
// to materialize all D rows.
class MLPHead {
 public:
  using Gradient = MLPGradients;

  struct Cache {
    std::vector<double> pre;     // W1^T x + b1
    std::vector<double> hidden;  // after relu and dropout
    std::vector<double> scale;   // per-unit dropout scale (0 or 1/(1-p))
  };

  MLPHead() = default;
  MLPHead(std::uint32_t dim, int hidden, int num_labels, double dropout = 0.2, std::uint64_t init_seed = 1,
          bool zero = false)
      : dim_(dim), hidden_(hidden), labels_(num_labels), dropout_(dropout), init_seed_(init_seed),
        zero_init_(zero), b1_(static_cast<std::size_t>(hidden), 0.0),
        w2_(static_cast<std::size_t>(hidden) * num_labels, 0.0), b2_(static_cast<std::size_t>(num_labels), 0.0) {
    if (dim == 0 || hidden <= 0 || num_labels <= 0) throw UsageError("invalid MLPHead dimensions");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
    if (!zero) {
      Rng rng(hash_combine(init_seed, 0xB2));
      const double a = std::sqrt(6.0 / (hidden + num_labels));
      for (auto& w : w2_) w = rng.uniform(-a, a);
    }
  }

  std::uint32_t dim() const { return dim_; }
  int hidden() const { return hidden_; }
  int num_labels() const { return labels_; }
  double dropout() const { return dropout_; }

  // Adds row f of W1 to acc.
  void add_w1_row(std::uint32_t f, std::span<double> acc, double factor = 1.0) const {
    if (const auto it = w1_.find(f); it != w1_.end()) {
      for (int u = 0; u < hidden_; ++u) acc[u] += factor * it->second[u];
      return;
    }
    if (zero_init_) return;
    Rng rng(hash_combine(init_seed_, f));
    const double a = init_range();
    for (int u = 0; u < hidden_; ++u) acc[u] += factor * rng.uniform(-a, a);
  }

  double w1(std::uint32_t f, int u) const {
    std::vector<double> row(static_cast<std::size_t>(hidden_), 0.0);
    add_w1_row(f, row);
    return row[u];
  }
  double& w1_mutable(std::uint32_t f, int u) { return materialize(f)[u]; }
  double& b1(int u) { return b1_[u]; }
  double& w2(int u, int l) { return w2_[static_cast<std::size_t>(u) * labels_ + l]; }
  double& b2(int l) { return b2_[l]; }

  // Per-unit dropout scale for span (i, j); all ones outside train mode.
  std::vector<double> dropout_scale(const ForwardOptions& opts, int i, int j) const {
    std::vector<double> scale(static_cast<std::size_t>(hidden_), 1.0);
    if (!opts.train_mode || dropout_ == 0.0) return scale;
    const std::uint64_t base = hash_combine(hash_combine(opts.seed, static_cast<std::uint64_t>(i)),
                                            static_cast<std::uint64_t>(j));
    for (int u = 0; u < hidden_; ++u) {
      const double r = to_unit(hash_combine(base, static_cast<std::uint64_t>(u)));
      scale[u] = r < dropout_ ? 0.0 : 1.0 / (1.0 - dropout_);
    }
    return scale;
  }

  void forward(const SpanRepresentation& rep, std::span<double> out, Cache& cache,
               const std::vector<double>* scale = nullptr) const {
    if (rep.dim != dim_) throw UsageError("span representation dimension does not match MLP head");
    cache.pre = b1_;
    for (const auto f : rep.ids) add_w1_row(f, cache.pre);
    cache.hidden.assign(static_cast<std::size_t>(hidden_), 0.0);
    cache.scale = scale ? *scale : std::vector<double>(static_cast<std::size_t>(hidden_), 1.0);
    std::copy(b2_.begin(), b2_.end(), out.begin());
    for (int u = 0; u < hidden_; ++u) {
      const double h = cache.pre[u] > 0.0 ? cache.pre[u] * cache.scale[u] : 0.0;
      cache.hidden[u] = h;
      if (h == 0.0) continue;
      const double* w = &w2_[static_cast<std::size_t>(u) * labels_];
      for (int l = 0; l < labels_; ++l) out[l] += h * w[l];
    }
  }

  std::vector<double> forward(const SpanRepresentation& rep) const {
    std::vector<double> out(static_cast<std::size_t>(labels_));
    Cache cache;
    forward(rep, out, cache);
    return out;
  }

  SpanScores score(const std::vector<std::string>& chars, const ForwardOptions& opts = {}) const {
    const int n = static_cast<int>(chars.size());
    SpanScores s(n, labels_);
    Cache cache;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j <= n; ++j) {
        const auto scale = dropout_scale(opts, i, j);
        forward(span_representation(chars, i, j, dim_), s.row(i, j), cache, &scale);
      }
    }
    return s;
  }

  Gradient zero_gradient() const {
    return {{},
            std::vector<double>(static_cast<std::size_t>(hidden_), 0.0),
            std::vector<double>(w2_.size(), 0.0),
            std::vector<double>(static_cast<std::size_t>(labels_), 0.0)};
  }

  // Accumulates the gradient of <upstream, forward(rep)> into acc.
  void backward(const SpanRepresentation& rep, std::span<const double> upstream, Gradient& acc,
                const std::vector<double>* scale = nullptr) const {
    if (static_cast<int>(upstream.size()) != labels_) throw UsageError("upstream gradient has wrong size");
    for (const double g : upstream) {
      if (!std::isfinite(g)) throw DataError("non-finite upstream gradient");
    }
    std::vector<double> out(static_cast<std::size_t>(labels_));
    Cache cache;
    forward(rep, out, cache, scale);
    std::vector<double> d_pre(static_cast<std::size_t>(hidden_), 0.0);
    for (int l = 0; l < labels_; ++l) acc.b2[l] += upstream[l];
    for (int u = 0; u < hidden_; ++u) {
      const double* w = &w2_[static_cast<std::size_t>(u) * labels_];
      double* gw = &acc.w2[static_cast<std::size_t>(u) * labels_];
      double dh = 0.0;
      for (int l = 0; l < labels_; ++l) {
        gw[l] += cache.hidden[u] * upstream[l];
        dh += w[l] * upstream[l];
      }
      d_pre[u] = cache.pre[u] > 0.0 ? dh * cache.scale[u] : 0.0;
      acc.b1[u] += d_pre[u];
    }
    for (const auto f : rep.ids) {
      auto& row = acc.w1_rows[f];
      if (row.empty()) row.assign(static_cast<std::size_t>(hidden_), 0.0);
      for (int u = 0; u < hidden_; ++u) row[u] += d_pre[u];
    }
  }

  void backward(const std::vector<std::string>& chars, std::span<const ScoreGrad> upstream, Gradient& acc,
                const ForwardOptions& opts = {}) const {
    detail::for_each_span_gradient(upstream, labels_, [&](int i, int j, std::span<const double> g) {
      const auto scale = dropout_scale(opts, i, j);
      backward(span_representation(chars, i, j, dim_), g, acc, &scale);
    });
  }

  void apply(const Gradient& grad, double lr) {
    for (int u = 0; u < hidden_; ++u) b1_[u] -= lr * grad.b1[u];
    for (std::size_t k = 0; k < w2_.size(); ++k) w2_[k] -= lr * grad.w2[k];
    for (int l = 0; l < labels_; ++l) b2_[l] -= lr * grad.b2[l];
    for (const auto& [f, g] : grad.w1_rows) {
      auto& row = materialize(f);
      for (int u = 0; u < hidden_; ++u) row[u] -= lr * g[u];
    }
  }

  bool all_finite() const {
    const auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(b1_) || !finite(w2_) || !finite(b2_)) return false;
    return std::all_of(w1_.begin(), w1_.end(), [&](const auto& kv) { return finite(kv.second); });
  }

  void save(std::ostream& out) const {
    out << "mlp " << dim_ << ' ' << hidden_ << ' ' << labels_ << ' ' << detail::format_double(dropout_) << ' '
        << init_seed_ << ' ' << (zero_init_ ? 1 : 0) << '\n';
    out << "b1 ";
    detail::write_vector(out, b1_);
    out << "w2 ";
    detail::write_vector(out, w2_);
    out << "b2 ";
    detail::write_vector(out, b2_);
    std::vector<std::uint32_t> keys;
    for (const auto& kv : w1_) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    out << "rows " << keys.size() << '\n';
    for (const auto f : keys) {
      out << f << ' ';
      detail::write_vector(out, w1_.at(f));
    }
  }

  static MLPHead load(std::istream& in) {
    detail::expect_key(in, "mlp");
    std::uint32_t dim = 0;
    int hidden = 0, labels = 0, zero = 0;
    std::string dropout;
    std::uint64_t seed = 0;
    if (!(in >> dim >> hidden >> labels >> dropout >> seed >> zero)) throw DataError("bad MLP header");
    MLPHead h(dim, hidden, labels, detail::parse_double(dropout), seed, zero != 0);
    detail::expect_key(in, "b1");
    h.b1_ = detail::read_vector(in, static_cast<std::size_t>(hidden));
    detail::expect_key(in, "w2");
    h.w2_ = detail::read_vector(in, static_cast<std::size_t>(hidden) * labels);
    detail::expect_key(in, "b2");
    h.b2_ = detail::read_vector(in, static_cast<std::size_t>(labels));
    detail::expect_key(in, "rows");
    std::size_t count = 0;
    if (!(in >> count)) throw DataError("bad row count");
    for (std::size_t k = 0; k < count; ++k) {
      std::uint32_t f = 0;
      if (!(in >> f) || f >= dim) throw DataError("bad feature row id");
      h.w1_[f] = detail::read_vector(in, static_cast<std::size_t>(hidden));
    }
    return h;
  }

  friend bool operator==(const MLPHead&, const MLPHead&) = default;

 private:
  double init_range() const { return std::sqrt(6.0 / (8.0 + hidden_)); }

  std::vector<double>& materialize(std::uint32_t f) {
    if (const auto it = w1_.find(f); it != w1_.end()) return it->second;
    std::vector<double> row(static_cast<std::size_t>(hidden_), 0.0);
    add_w1_row(f, row);
    return w1_.emplace(f, std::move(row)).first->second;
  }

  std::uint32_t dim_ = kDefaultFeatureDim;
  int hidden_ = 250;
  int labels_ = 0;
  double dropout_ = 0.2;
  std::uint64_t init_seed_ = 1;
  bool zero_init_ = false;
  std::vector<double> b1_;
  std::vector<double> w2_;
  std::vector<double> b2_;
  std::unordered_map<std::uint32_t, std::vector<double>> w1_;
};

inline MLPGradients mlp_backward(const MLPHead& head, const SpanRepresentation& rep,
                                 std::span<const double> upstream) {
  MLPGradients g = head.zero_gradient();
  head.backward(rep, upstream, g);
  return g;
}

// Interface the trainer and CLI rely on.
template <class S>
concept SpanScorer = requires(const S& cs, S& s, const std::vector<std::string>& chars,
                              std::span<const ScoreGrad> grads, typename S::Gradient& g, std::ostream& out,
                              std::istream& in) {
  { cs.score(chars, ForwardOptions{}) } -> std::same_as<SpanScores>;
  { cs.zero_gradient() } -> std::same_as<typename S::Gradient>;
  cs.backward(chars, grads, g, ForwardOptions{});
  s.apply(g, 1.0);
  { cs.num_labels() } -> std::convertible_to<int>;
  { cs.all_finite() } -> std::same_as<bool>;
  cs.save(out);
  { S::load(in) } -> std::same_as<S>;
};

static_assert(SpanScorer<LinearScorer>);
static_assert(SpanScorer<MLPHead>);

}  // namespace charparse
