#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2m/skeleton.hpp"

namespace s2m {

// On-disk layout ("SNPM1"): magic, u32 frames/joints/dims, f32 fps, then
// frames*joints*dims little-endian f32 values in (frame, joint, feature)
// row-major order. Values are f32 on disk and f64 in memory.
inline constexpr char kMotionMagic[] = "SNPM1";

MotionSequence read_motion(const std::string& path);
void write_motion(const MotionSequence& seq, const std::string& path);

// Piecewise-linear test motion: poses pinned at knot frames, linear in
// between, optional Gaussian noise on top. The interior knots are the
// ground-truth transitional points.
struct SyntheticSpec {
  int joints = 0;
  int dims = 3;
  std::vector<int> knot_frames;  // strictly increasing, starting at 0
  std::vector<Pose> knot_poses;  // one per knot, (joints, dims) each
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  double fps = 25.0;
};

struct SyntheticMotion {
  MotionSequence sequence;
  std::vector<int> true_transitions;  // interior knot frames
};

SyntheticMotion generate_synthetic(const SyntheticSpec& spec);

}  // namespace s2m
