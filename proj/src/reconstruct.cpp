#include "s2m/reconstruct.hpp"

#include <string>

namespace s2m {

void SnippetSet::validate() const {
  segmentation.validate();
  if (boundary_poses.size() !=
      static_cast<std::size_t>(segmentation.snippet_count()) + 1) {
    throw ShapeError("snippet set has " + std::to_string(boundary_poses.size()) +
                     " poses for " + std::to_string(segmentation.snippet_count()) +
                     " snippets");
  }
  for (const Pose& pose : boundary_poses) {
    if (pose.rows() != boundary_poses.front().rows() ||
        pose.cols() != boundary_poses.front().cols()) {
      throw ShapeError("snippet set boundary poses disagree on shape");
    }
  }
}

namespace {

void check_span(int t_start, int t_end) {
  if (t_end <= t_start) {
    throw ValueError("snippet span [" + std::to_string(t_start) + ", " +
                     std::to_string(t_end) + "] must cover at least 2 frames");
  }
}

void check_pose_pair(const Pose& a, const Pose& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0 ||
      a.cols() == 0) {
    throw ShapeError("boundary poses disagree on shape");
  }
}

}  // namespace

MotionSequence reconstruct_snippet(const Pose& start_pose, const Pose& end_pose,
                                   int t_start, int t_end, double fps) {
  check_span(t_start, t_end);
  check_pose_pair(start_pose, end_pose);
  const int joints = static_cast<int>(start_pose.rows());
  MotionSequence out(t_end - t_start + 1, joints,
                     static_cast<int>(start_pose.cols()), fps);
  const double len = t_end - t_start;
  for (int t = t_start; t <= t_end; ++t) {
    if (t == t_start) {
      out.set_pose(0, start_pose);
    } else if (t == t_end) {
      out.set_pose(t_end - t_start, end_pose);
    } else {
      out.set_pose(t - t_start,
                   (start_pose * (t_end - t) + end_pose * (t - t_start)) / len);
    }
  }
  return out;
}

MotionSequence reconstruct_variant(ReconstructionMode mode, const Pose& start_pose,
                                   const Pose& end_pose, int t_start, int t_end,
                                   double fps) {
  if (mode == ReconstructionMode::interpolate) {
    return reconstruct_snippet(start_pose, end_pose, t_start, t_end, fps);
  }
  check_span(t_start, t_end);
  check_pose_pair(start_pose, end_pose);
  const int frames = t_end - t_start + 1;
  MotionSequence out(frames, static_cast<int>(start_pose.rows()),
                     static_cast<int>(start_pose.cols()), fps);
  for (int k = 0; k < frames; ++k) {
    if (mode == ReconstructionMode::pad_last) {
      out.set_pose(k, k == frames - 1 ? end_pose : start_pose);
    } else {  // pad_first
      out.set_pose(k, k == 0 ? start_pose : end_pose);
    }
  }
  return out;
}

Eigen::MatrixXd interpolation_weights(const Segmentation& seg) {
  seg.validate();
  const std::vector<int> bounds = seg.boundaries();
  const int len = seg.last_frame - seg.first_frame + 1;
  const int poses = static_cast<int>(bounds.size());
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(len, poses);
  for (int s = 0; s + 1 < poses; ++s) {
    const int a = bounds[s];
    const int b = bounds[s + 1];
    const double span = b - a;
    for (int t = a; t <= b; ++t) {
      const int row = t - seg.first_frame;
      if (t == a) {
        weights(row, s) = 1.0;
        weights(row, s + 1) = 0.0;
      } else if (t == b) {
        weights(row, s) = 0.0;
        weights(row, s + 1) = 1.0;
      } else {
        weights(row, s) = (b - t) / span;
        weights(row, s + 1) = (t - a) / span;
      }
    }
  }
  return weights;
}

Eigen::MatrixXd interpolation_matrix(const Segmentation& seg, int joints) {
  if (joints <= 0) throw ShapeError("interpolation_matrix: joints must be positive");
  const Eigen::MatrixXd weights = interpolation_weights(seg);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(weights.rows() * joints,
                                              weights.cols() * joints);
  for (Eigen::Index t = 0; t < weights.rows(); ++t) {
    for (Eigen::Index k = 0; k < weights.cols(); ++k) {
      const double w = weights(t, k);
      if (w == 0.0) continue;
      for (int j = 0; j < joints; ++j) out(t * joints + j, k * joints + j) = w;
    }
  }
  return out;
}

MotionSequence assemble(const SnippetSet& snippets, double fps) {
  snippets.validate();
  const int joints = static_cast<int>(snippets.boundary_poses.front().rows());
  const int dims = static_cast<int>(snippets.boundary_poses.front().cols());
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(snippets.boundary_poses.size()) * joints,
                          dims);
  for (std::size_t k = 0; k < snippets.boundary_poses.size(); ++k) {
    stacked.middleRows(static_cast<Eigen::Index>(k) * joints, joints) =
        snippets.boundary_poses[k];
  }
  // Same code path the model's differentiable assembly uses, so the two
  // agree bit for bit.
  Eigen::MatrixXd data =
      interpolation_matrix(snippets.segmentation, joints) * stacked;
  return MotionSequence::from_matrix(std::move(data), joints, fps);
}

}  // namespace s2m
