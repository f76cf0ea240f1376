#include "s2m/graph.hpp"

#include <string>

namespace s2m {

namespace {

void check_frames(int frames) {
  if (frames < 1) {
    throw ValueError("graph needs at least 1 frame, got " + std::to_string(frames));
  }
}

}  // namespace

Eigen::MatrixXd build_unified_mask(const Skeleton& skeleton, int frames,
                                   bool same_joint_temporal) {
  check_frames(frames);
  const int joints = skeleton.joint_count();
  const Eigen::Index n = static_cast<Eigen::Index>(frames) * joints;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
  for (int t = 0; t < frames; ++t) {
    for (int s = 0; s < frames; ++s) {
      for (int i = 0; i < joints; ++i) {
        for (int j = 0; j < joints; ++j) {
          const bool bone = skeleton.has_bone(i, j);
          const bool same_joint = i == j && (same_joint_temporal || t == s);
          if (bone || same_joint) {
            mask(static_cast<Eigen::Index>(t) * joints + i,
                 static_cast<Eigen::Index>(s) * joints + j) = 1.0;
          }
        }
      }
    }
  }
  return mask;
}

Eigen::MatrixXd build_spatial_only_mask(const Skeleton& skeleton, int frames) {
  check_frames(frames);
  const int joints = skeleton.joint_count();
  const Eigen::Index n = static_cast<Eigen::Index>(frames) * joints;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd block = build_spatial_mask(skeleton);
  for (int t = 0; t < frames; ++t) {
    mask.block(static_cast<Eigen::Index>(t) * joints,
               static_cast<Eigen::Index>(t) * joints, joints, joints) = block;
  }
  return mask;
}

Eigen::MatrixXd build_spatial_mask(const Skeleton& skeleton) {
  const int joints = skeleton.joint_count();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Identity(joints, joints);
  for (auto [i, j] : skeleton.bones()) {
    mask(i, j) = 1.0;
    mask(j, i) = 1.0;
  }
  return mask;
}

Eigen::MatrixXd build_temporal_mask(int frames) {
  check_frames(frames);
  return Eigen::MatrixXd::Ones(frames, frames);
}

GraphMasks build_mask(const Skeleton& skeleton, int frames, GraphMode mode,
                      bool same_joint_temporal) {
  GraphMasks out;
  out.mode = mode;
  switch (mode) {
    case GraphMode::unified:
      out.node_mask = build_unified_mask(skeleton, frames, same_joint_temporal);
      break;
    case GraphMode::spatial_only:
      out.node_mask = build_spatial_only_mask(skeleton, frames);
      break;
    case GraphMode::separate:
      out.node_mask = build_spatial_mask(skeleton);
      out.temporal_mask = build_temporal_mask(frames);
      break;
  }
  return out;
}

Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& adjacency,
                           const Eigen::MatrixXd& mask) {
  if (adjacency.rows() != mask.rows() || adjacency.cols() != mask.cols()) {
    throw ShapeError("apply_mask: adjacency is " + std::to_string(adjacency.rows()) +
                     "x" + std::to_string(adjacency.cols()) + " but mask is " +
                     std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()));
  }
  return adjacency.cwiseProduct(mask);
}

Eigen::MatrixXd row_normalized(const Eigen::MatrixXd& mask) {
  Eigen::MatrixXd out = mask;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double degree = out.row(r).sum();
    if (degree > 0.0) out.row(r) /= degree;
  }
  return out;
}

Eigen::MatrixXd graph_conv(const Eigen::MatrixXd& adjacency,
                           const Eigen::MatrixXd& node_features,
                           const Eigen::MatrixXd& weights, Activation activation) {
  if (adjacency.cols() != node_features.rows()) {
    throw ShapeError("graph_conv: adjacency cols " + std::to_string(adjacency.cols()) +
                     " != node rows " + std::to_string(node_features.rows()));
  }
  if (node_features.cols() != weights.rows()) {
    throw ShapeError("graph_conv: feature dim " + std::to_string(node_features.cols()) +
                     " != weight rows " + std::to_string(weights.rows()));
  }
  Eigen::MatrixXd out = adjacency * node_features * weights;
  if (activation == Activation::relu) out = out.cwiseMax(0.0);
  return out;
}

UnifiedGraph make_unified_graph(const Skeleton& skeleton, int frames,
                                GraphMode mode, bool same_joint_temporal) {
  if (mode == GraphMode::separate) {
    throw ValueError("make_unified_graph: separate mode uses factored "
                     "spatial/temporal matrices, not a single node graph");
  }
  UnifiedGraph graph;
  graph.frames = frames;
  graph.joints = skeleton.joint_count();
  graph.mask = mode == GraphMode::unified
                   ? build_unified_mask(skeleton, frames, same_joint_temporal)
                   : build_spatial_only_mask(skeleton, frames);
  graph.adjacency = row_normalized(graph.mask);
  return graph;
}

}  // namespace s2m
