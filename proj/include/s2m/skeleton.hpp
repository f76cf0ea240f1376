#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "s2m/error.hpp"

namespace s2m {

// Joint features at a single frame, shape (J, D).
using Pose = Eigen::MatrixXd;

// Joint topology: a joint count plus undirected bone edges.
// The bone graph must be connected, with no self-loops or duplicate bones.
class Skeleton {
 public:
  Skeleton(int joint_count, std::vector<std::pair<int, int>> bones);

  int joint_count() const { return joint_count_; }
  const std::vector<std::pair<int, int>>& bones() const { return bones_; }
  bool has_bone(int i, int j) const;

  // Longest shortest-path between any two joints in the bone graph.
  int diameter() const;

  // Simple chain 0-1-...-(n-1); handy default topology for synthetic data.
  static Skeleton chain(int joint_count);

 private:
  int joint_count_;
  std::vector<std::pair<int, int>> bones_;   // normalized (i < j), sorted
  std::vector<char> bone_lookup_;            // J*J dense lookup
};

// Dense (frames x joints x dims) motion tensor with frame-rate metadata.
// Stored as a (T*J, D) matrix in (frame, joint) row-major node order, which
// is exactly the node-feature layout the graph modules consume.
class MotionSequence {
 public:
  MotionSequence(int frames, int joints, int dims, double fps);

  // Takes ownership of a (frames*joints, dims) matrix. Rejects non-finite
  // values and inconsistent shapes.
  static MotionSequence from_matrix(Eigen::MatrixXd data, int joints, double fps);

  int frames() const { return frames_; }
  int joints() const { return joints_; }
  int dims() const { return static_cast<int>(data_.cols()); }
  double fps() const { return fps_; }

  double at(int t, int j, int d) const { return data_(t * joints_ + j, d); }
  double& at(int t, int j, int d) { return data_(t * joints_ + j, d); }

  Pose pose(int t) const;
  void set_pose(int t, const Pose& pose);

  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::MatrixXd& data() { return data_; }

  bool all_finite() const { return data_.allFinite(); }

 private:
  int frames_;
  int joints_;
  double fps_;
  Eigen::MatrixXd data_;  // (frames*joints, dims)
};

// Frames start..end inclusive as a new sequence. Both bounds must be valid
// and start <= end.
MotionSequence slice(const MotionSequence& seq, int start, int end);

// First differences along time: out[t] = seq[t+1] - seq[t], length T-1.
MotionSequence velocity(const MotionSequence& seq);

}  // namespace s2m
