#pragma once

// Dense rasters and the entropy primitives built on them.
//
// Every raster is a row-major Eigen array with rows = height and
// cols = width, so `data()` walks pixels in row-major order and
// pixel (x, y) lives at `(y, x)`.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>

#include "uncerseg/errors.hpp"

namespace uncerseg {

template <typename Scalar>
using Raster = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel foreground probability in [0, 1].
template <typename Scalar = double>
using ProbMaskT = Raster<Scalar>;
/// Per-pixel normalized binary entropy in [0, 1].
template <typename Scalar = double>
using UncertaintyMapT = Raster<Scalar>;

using ProbMask = ProbMaskT<double>;
using UncertaintyMap = UncertaintyMapT<double>;
/// Labels in {0, 1}.
using BinaryMask = Raster<std::uint8_t>;
/// 8-bit grayscale input image.
using GrayImage = Raster<std::uint8_t>;

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

template <typename Derived>
ImageSize size_of(const Eigen::DenseBase<Derived>& r) {
  return {static_cast<int>(r.cols()), static_cast<int>(r.rows())};
}

template <typename A, typename B>
void require_same_size(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                       const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DomainError(std::string(what) + ": raster dimensions differ");
  }
}

/// Throws DomainError unless `mask` is non-empty with every value in [0, 1].
template <typename Derived>
void validate_probabilities(const Eigen::DenseBase<Derived>& mask) {
  if (mask.rows() < 1 || mask.cols() < 1) throw DomainError("raster must be at least 1x1");
  // Written so that NaN fails too.
  if (!((mask.derived() >= 0).all() && (mask.derived() <= 1).all())) {
    throw DomainError("probability raster has values outside [0, 1]");
  }
}

template <typename Derived>
void validate_binary(const Eigen::DenseBase<Derived>& mask) {
  if (mask.rows() < 1 || mask.cols() < 1) throw DomainError("raster must be at least 1x1");
  if (!((mask.derived() == 0) || (mask.derived() == 1)).all()) {
    throw DomainError("binary raster has values other than 0 and 1");
  }
}

namespace detail {
template <typename Scalar>
Scalar entropy_unchecked(Scalar p) {
  using std::log2;
  Scalar h = 0;
  if (p > 0) h -= p * log2(p);
  if (p < 1) h -= (1 - p) * log2(1 - p);
  return h;
}
}  // namespace detail

/// Shannon entropy (bits) of a Bernoulli(p) label; 0·log 0 is taken as 0.
template <typename Scalar>
Scalar binary_entropy(Scalar p) {
  if (!(p >= 0 && p <= 1)) throw DomainError("binary_entropy: probability outside [0, 1]");
  return detail::entropy_unchecked(p);
}

template <typename Derived>
UncertaintyMapT<typename Derived::Scalar> entropy_map(const Eigen::ArrayBase<Derived>& mask) {
  using Scalar = typename Derived::Scalar;
  validate_probabilities(mask);
  return mask.derived().unaryExpr([](Scalar p) { return detail::entropy_unchecked(p); });
}

/// Whole-image mean entropy; the order used to compare two maps.
template <typename Derived>
typename Derived::Scalar scalar_uncertainty(const Eigen::ArrayBase<Derived>& map) {
  if (map.size() == 0) throw DomainError("scalar_uncertainty: empty map");
  return map.mean();
}

/// pixel = 1 iff value >= t.
template <typename Derived>
BinaryMask threshold_mask(const Eigen::ArrayBase<Derived>& mask, typename Derived::Scalar t) {
  if (!(t >= 0 && t <= 1)) throw DomainError("threshold_mask: threshold outside [0, 1]");
  return (mask.derived() >= t).template cast<std::uint8_t>();
}

template <typename Scalar = double>
ProbMaskT<Scalar> to_probabilities(const BinaryMask& mask) {
  return mask.cast<Scalar>();
}

inline std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>((mask != 0).count());
}

}  // namespace uncerseg
