#pragma once

#include <vector>

#include "s2m/segment.hpp"
#include "s2m/skeleton.hpp"

namespace s2m {

// Boundary poses at [first, T_1, ..., T_{S-1}, last] plus the segmentation
// that places them; consecutive snippets share their boundary frame.
struct SnippetSet {
  std::vector<Pose> boundary_poses;  // S+1 poses
  Segmentation segmentation;

  void validate() const;
};

enum class ReconstructionMode { interpolate, pad_last, pad_first };

// Linear interpolation between the two boundary poses over [t_start, t_end];
// both endpoints are reproduced exactly.
MotionSequence reconstruct_snippet(const Pose& start_pose, const Pose& end_pose,
                                   int t_start, int t_end, double fps);

// interpolate: reconstruct_snippet. pad_last: hold the starting pose until
// the final frame. pad_first: jump to the ending pose right after the first.
MotionSequence reconstruct_variant(ReconstructionMode mode, const Pose& start_pose,
                                   const Pose& end_pose, int t_start, int t_end,
                                   double fps);

// Per-frame boundary weights of the assembled interpolation: row t holds the
// weight of each boundary pose in the output frame first_frame+t. Exactly two
// entries per interior row; boundary rows are one-hot.
Eigen::MatrixXd interpolation_weights(const Segmentation& seg);

// Same map expanded to node granularity: (span_len*J, (S+1)*J), acting on
// boundary poses stacked as ((S+1)*J, D).
Eigen::MatrixXd interpolation_matrix(const Segmentation& seg, int joints);

// Concatenated snippet reconstruction over the whole span; shared boundary
// frames appear once and equal the boundary poses exactly.
MotionSequence assemble(const SnippetSet& snippets, double fps);

}  // namespace s2m
