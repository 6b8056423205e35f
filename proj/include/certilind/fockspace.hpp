#pragma once

// Finite truncations of the multi-mode Fock space l2(N)^{(x)m}.
//
// A TruncationShape selects the multi-indices (k_1..k_m) spanning H_N.  Two
// families are supported: rectangular boxes k_j <= N_j and weighted totals
// sum_j w_j k_j <= B with exact rational weights.  The basis is enumerated in
// graded lexicographic order, so a single-mode box keeps |0>..|N> in place
// when it grows.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include "certilind/errors.hpp"

namespace certilind {

using Rational = boost::rational<std::int64_t>;
using MultiIndex = std::vector<int>;

inline Rational parse_rational(const std::string& text) {
  auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      auto dot = text.find('.');
      if (dot == std::string::npos) return Rational(std::stoll(text));
      // finite decimal, e.g. "0.5"
      std::string digits = text.substr(0, dot) + text.substr(dot + 1);
      std::int64_t den = 1;
      for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
      return Rational(std::stoll(digits), den);
    }
    return Rational(std::stoll(text.substr(0, slash)),
                    std::stoll(text.substr(slash + 1)));
  } catch (const std::exception&) {
    throw ModelError("invalid rational '" + text + "'");
  }
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

struct RectCaps {
  std::vector<int> caps;
  bool operator==(const RectCaps&) const = default;
};

struct WeightedCap {
  std::vector<Rational> weights;
  Rational cap;
  bool operator==(const WeightedCap&) const = default;
};

/// Increment used by grow()/shrink(): per-mode for boxes, scalar for
/// weighted totals.
using ShapeStep = std::variant<std::vector<int>, Rational>;

namespace detail {

struct Basis {
  std::vector<MultiIndex> states;
  std::vector<int> max_occupation;  // per mode
  std::vector<std::uint64_t> radix;
  std::unordered_map<std::uint64_t, std::size_t> index;

  std::uint64_t key(const MultiIndex& k) const {
    std::uint64_t out = 0;
    for (std::size_t j = 0; j < k.size(); ++j) out = out * radix[j] + static_cast<std::uint64_t>(k[j]);
    return out;
  }
};

}  // namespace detail

class TruncationShape {
 public:
  using Variant = std::variant<RectCaps, WeightedCap>;

  static TruncationShape rect(std::vector<int> caps) {
    if (caps.empty()) throw ShapeError("shape needs at least one mode");
    for (int c : caps)
      if (c < 0) throw ShapeError("rectangular caps must be non-negative");
    return TruncationShape(RectCaps{std::move(caps)});
  }

  static TruncationShape weighted(std::vector<Rational> weights, Rational cap) {
    if (weights.empty()) throw ShapeError("shape needs at least one mode");
    for (const auto& w : weights)
      if (w <= 0) throw ShapeError("weights must be positive");
    if (cap < 0) throw ShapeError("weighted cap must be non-negative");
    return TruncationShape(WeightedCap{std::move(weights), cap});
  }

  const Variant& variant() const { return variant_; }
  bool is_rect() const { return std::holds_alternative<RectCaps>(variant_); }
  const RectCaps& rect_caps() const { return std::get<RectCaps>(variant_); }
  const WeightedCap& weighted_cap() const { return std::get<WeightedCap>(variant_); }

  int mode_count() const {
    return is_rect() ? static_cast<int>(rect_caps().caps.size())
                     : static_cast<int>(weighted_cap().weights.size());
  }

  std::size_t dimension() const { return basis_->states.size(); }

  /// Shape predicate; arbitrary multi-indices (including negative entries)
  /// are accepted and rejected.
  bool admits(const MultiIndex& k) const {
    if (static_cast<int>(k.size()) != mode_count()) return false;
    for (int v : k)
      if (v < 0) return false;
    if (is_rect()) {
      const auto& caps = rect_caps().caps;
      for (std::size_t j = 0; j < k.size(); ++j)
        if (k[j] > caps[j]) return false;
      return true;
    }
    return weight(k) <= weighted_cap().cap;
  }

  /// Grade used for ordering: weighted total for weighted shapes, plain total
  /// for boxes.
  Rational weight(const MultiIndex& k) const {
    Rational g(0);
    for (std::size_t j = 0; j < k.size(); ++j)
      g += is_rect() ? Rational(k[j]) : weighted_cap().weights[j] * k[j];
    return g;
  }

  const MultiIndex& multi_index_of(std::size_t i) const { return basis_->states.at(i); }

  std::size_t index_of(const MultiIndex& k) const {
    auto found = find(k);
    if (!found) throw ShapeError("multi-index outside shape");
    return *found;
  }

  std::optional<std::size_t> find(const MultiIndex& k) const {
    if (!admits(k)) return std::nullopt;
    auto it = basis_->index.find(basis_->key(k));
    if (it == basis_->index.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<MultiIndex>& states() const { return basis_->states; }
  int max_occupation(int mode) const { return basis_->max_occupation.at(mode); }

  bool operator==(const TruncationShape& other) const { return variant_ == other.variant_; }

  std::string describe() const {
    std::ostringstream os;
    if (is_rect()) {
      os << "rect(";
      const auto& caps = rect_caps().caps;
      for (std::size_t j = 0; j < caps.size(); ++j) os << (j ? "," : "") << caps[j];
      os << ")";
    } else {
      os << "weighted(";
      const auto& wc = weighted_cap();
      for (std::size_t j = 0; j < wc.weights.size(); ++j) os << (j ? "," : "") << to_string(wc.weights[j]);
      os << ";" << to_string(wc.cap) << ")";
    }
    return os.str();
  }

 private:
  explicit TruncationShape(Variant v) : variant_(std::move(v)) { build(); }

  void build() {
    auto basis = std::make_shared<detail::Basis>();
    const int m = mode_count();
    basis->max_occupation.resize(m);
    for (int j = 0; j < m; ++j) {
      if (is_rect()) {
        basis->max_occupation[j] = rect_caps().caps[j];
      } else {
        const auto& wc = weighted_cap();
        Rational q = wc.cap / wc.weights[j];
        basis->max_occupation[j] = static_cast<int>(q.numerator() / q.denominator());
      }
    }
    // odometer over the bounding box, filtered by the predicate
    MultiIndex k(m, 0);
    while (true) {
      if (admits(k)) basis->states.push_back(k);
      int j = m - 1;
      while (j >= 0 && k[j] == basis->max_occupation[j]) k[j--] = 0;
      if (j < 0) break;
      ++k[j];
    }
    std::stable_sort(basis->states.begin(), basis->states.end(),
                     [this](const MultiIndex& a, const MultiIndex& b) {
                       Rational ga = weight(a), gb = weight(b);
                       if (ga != gb) return ga < gb;
                       return a < b;
                     });
    basis->radix.resize(m);
    for (int j = 0; j < m; ++j) basis->radix[j] = static_cast<std::uint64_t>(basis->max_occupation[j]) + 1;
    basis->index.reserve(basis->states.size());
    for (std::size_t i = 0; i < basis->states.size(); ++i) basis->index.emplace(basis->key(basis->states[i]), i);
    basis_ = std::move(basis);
  }

  Variant variant_;
  std::shared_ptr<const detail::Basis> basis_;
};

/// Read-only view of the index maps of a shape.
struct BasisMap {
  TruncationShape shape;
  std::size_t index_of(const MultiIndex& k) const { return shape.index_of(k); }
  const MultiIndex& multi_index_of(std::size_t i) const { return shape.multi_index_of(i); }
};

inline std::size_t dimension(const TruncationShape& shape) { return shape.dimension(); }

inline bool contains(const TruncationShape& small, const TruncationShape& big) {
  if (small.mode_count() != big.mode_count()) throw ShapeError("mode-count mismatch");
  for (const auto& k : small.states())
    if (!big.admits(k)) return false;
  return true;
}

/// Position of every basis state of `small` inside `big`.
inline std::vector<std::size_t> embedding_indices(const TruncationShape& small, const TruncationShape& big) {
  if (!contains(small, big)) throw ShapeError("shape " + small.describe() + " is not contained in " + big.describe());
  std::vector<std::size_t> out(small.dimension());
  for (std::size_t i = 0; i < small.dimension(); ++i) out[i] = big.index_of(small.multi_index_of(i));
  return out;
}

inline Eigen::MatrixXcd embed_matrix(const Eigen::MatrixXcd& m, const std::vector<std::size_t>& where, std::size_t big_dim) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(big_dim, big_dim);
  const auto n = static_cast<Eigen::Index>(where.size());
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) out(where[r], where[c]) = m(r, c);
  return out;
}

inline Eigen::MatrixXcd restrict_matrix(const Eigen::MatrixXcd& m, const std::vector<std::size_t>& where) {
  const auto n = static_cast<Eigen::Index>(where.size());
  Eigen::MatrixXcd out(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) out(r, c) = m(where[r], where[c]);
  return out;
}

inline TruncationShape grow(const TruncationShape& shape, const ShapeStep& step) {
  if (shape.is_rect()) {
    const auto* inc = std::get_if<std::vector<int>>(&step);
    if (!inc || static_cast<int>(inc->size()) != shape.mode_count())
      throw ShapeError("rectangular shapes grow by a per-mode integer vector");
    auto caps = shape.rect_caps().caps;
    for (std::size_t j = 0; j < caps.size(); ++j) {
      if ((*inc)[j] < 0) throw ShapeError("grow step must be non-negative");
      caps[j] += (*inc)[j];
    }
    return TruncationShape::rect(caps);
  }
  const auto* inc = std::get_if<Rational>(&step);
  if (!inc) throw ShapeError("weighted shapes grow by a scalar rational");
  if (*inc < 0) throw ShapeError("grow step must be non-negative");
  const auto& wc = shape.weighted_cap();
  return TruncationShape::weighted(wc.weights, wc.cap + *inc);
}

inline TruncationShape shrink(const TruncationShape& shape, const ShapeStep& step) {
  if (shape.is_rect()) {
    const auto* dec = std::get_if<std::vector<int>>(&step);
    if (!dec || static_cast<int>(dec->size()) != shape.mode_count())
      throw ShapeError("rectangular shapes shrink by a per-mode integer vector");
    auto caps = shape.rect_caps().caps;
    for (std::size_t j = 0; j < caps.size(); ++j) {
      caps[j] -= (*dec)[j];
      if (caps[j] < 0) throw ShapeError("shrink would drive a cap below zero");
    }
    return TruncationShape::rect(caps);
  }
  const auto* dec = std::get_if<Rational>(&step);
  if (!dec) throw ShapeError("weighted shapes shrink by a scalar rational");
  const auto& wc = shape.weighted_cap();
  if (wc.cap - *dec < 0) throw ShapeError("shrink would drive the weighted cap below zero");
  return TruncationShape::weighted(wc.weights, wc.cap - *dec);
}

inline bool can_shrink(const TruncationShape& shape, const ShapeStep& step) {
  try {
    shrink(shape, step);
    return true;
  } catch (const ShapeError&) {
    return false;
  }
}

}  // namespace certilind
