#include "rote/rote.hpp"

#include <cmath>
#include <stdexcept>

namespace rote {

void validate(const RoTEConfig& cfg) {
  if (cfg.head_dim < 2 || cfg.head_dim % 2 != 0)
    throw std::invalid_argument("RoTEConfig: head_dim must be even and >= 2");
  if (cfg.base_y <= 1.0 || cfg.base_m <= 1.0 || cfg.base_d <= 1.0)
    throw std::invalid_argument("RoTEConfig: bases must be > 1");
}

std::vector<double> inverse_frequencies(double base, int head_dim) {
  if (head_dim < 2 || head_dim % 2 != 0)
    throw std::invalid_argument("inverse_frequencies: head_dim must be even and >= 2");
  if (base <= 1.0) throw std::invalid_argument("inverse_frequencies: base must be > 1");
  std::vector<double> inv_freq(head_dim / 2);
  inv_freq[0] = 1.0;
  for (int i = 1; i < head_dim / 2; ++i)
    inv_freq[i] = std::pow(base, -2.0 * i / head_dim);
  return inv_freq;
}

std::vector<double> rotation_angles(double value, std::span<const double> spectrum) {
  std::vector<double> theta(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) theta[i] = value * spectrum[i];
  return theta;
}

std::vector<double> rotate_half(std::span<const double> x) {
  if (x.size() % 2 != 0)
    throw std::invalid_argument("rotate_half: vector length must be even");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
    out[i] = -x[i + 1];
    out[i + 1] = x[i];
  }
  return out;
}

std::vector<double> apply_rotary(std::span<const double> x,
                                 std::span<const double> angles) {
  if (x.size() != 2 * angles.size())
    throw std::invalid_argument("apply_rotary: length(x) != 2*length(angles)");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double c = std::cos(angles[i]);
    const double s = std::sin(angles[i]);
    out[2 * i] = x[2 * i] * c - x[2 * i + 1] * s;
    out[2 * i + 1] = x[2 * i] * s + x[2 * i + 1] * c;
  }
  return out;
}

std::vector<double> fuse_levels(std::span<const double> x,
                                const cal::TemporalTriplet& triplet,
                                const RoTEConfig& cfg) {
  validate(cfg);
  if (static_cast<int>(x.size()) != cfg.head_dim)
    throw std::invalid_argument("fuse_levels: length(x) != head_dim");
  const auto omega_y = inverse_frequencies(cfg.base_y, cfg.head_dim);
  const auto omega_m = inverse_frequencies(cfg.base_m, cfg.head_dim);
  const auto omega_d = inverse_frequencies(cfg.base_d, cfg.head_dim);
  const auto ry = apply_rotary(x, rotation_angles(static_cast<double>(triplet.y), omega_y));
  const auto rm = apply_rotary(x, rotation_angles(static_cast<double>(triplet.m), omega_m));
  const auto rd = apply_rotary(x, rotation_angles(static_cast<double>(triplet.d), omega_d));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = cfg.alpha_y * ry[i] + cfg.alpha_m * rm[i] + cfg.alpha_d * rd[i];
  return out;
}

void rote_transform_qk(Tensor& q, Tensor& k,
                       std::span<const cal::TemporalTriplet> triplets,
                       const RoTEConfig& cfg) {
  if (!q.same_shape(k) || q.rows != triplets.size())
    throw std::invalid_argument("rote_transform_qk: shape mismatch");
  if (static_cast<int>(q.cols) != cfg.head_dim)
    throw std::invalid_argument("rote_transform_qk: head_dim mismatch");
  for (std::size_t r = 0; r < q.rows; ++r) {
    const auto qt = fuse_levels(std::span(q.row(r), q.cols), triplets[r], cfg);
    const auto kt = fuse_levels(std::span(k.row(r), k.cols), triplets[r], cfg);
    for (std::size_t c = 0; c < q.cols; ++c) {
      q.at(r, c) = qt[c];
      k.at(r, c) = kt[c];
    }
  }
}

}  // namespace rote
