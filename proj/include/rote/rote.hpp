#pragma once

#include <span>
#include <vector>

#include "rote/calendar.hpp"
#include "rote/tensor.hpp"

namespace rote {

// Per-level base frequencies and fusion weights for the three calendar
// levels, shared across all heads and layers.
struct RoTEConfig {
  double base_y = 1e6;
  double base_m = 1e4;
  double base_d = 1e2;
  double alpha_y = 1.5;
  double alpha_m = 1.0;
  double alpha_d = 0.5;
  int head_dim = 0;  // even, >= 2
};

void validate(const RoTEConfig& cfg);

// Geometric spectrum base^(-2i/head_dim), i = 0 .. head_dim/2 - 1.
// Entry 0 is exactly 1; strictly decreasing.
std::vector<double> inverse_frequencies(double base, int head_dim);

// theta_i = value * inv_freq_i.
std::vector<double> rotation_angles(double value, std::span<const double> spectrum);

// (-x1, x0, -x3, x2, ...): the quarter-turn permutation over even-odd pairs.
std::vector<double> rotate_half(std::span<const double> x);

// Rotates each (2i, 2i+1) pair of x by angles[i]. Norm-preserving.
std::vector<double> apply_rotary(std::span<const double> x,
                                 std::span<const double> angles);

// Weighted sum of the three per-level rotated copies of x.
std::vector<double> fuse_levels(std::span<const double> x,
                                const cal::TemporalTriplet& triplet,
                                const RoTEConfig& cfg);

// Applies fuse_levels to every row of Q and K. Values are never touched.
void rote_transform_qk(Tensor& q, Tensor& k,
                       std::span<const cal::TemporalTriplet> triplets,
                       const RoTEConfig& cfg);

}  // namespace rote
