#pragma once

#include <Eigen/Dense>

#include "s2m/skeleton.hpp"

namespace s2m {

enum class GraphMode { unified, separate, spatial_only };
enum class Activation { relu, none };

// Graph over (frame, joint) nodes, row/col index = frame*J + joint.
// The mask is the fixed binary edge structure; the adjacency holds the
// trainable values and stays exactly zero outside the mask.
struct UnifiedGraph {
  int frames = 0;
  int joints = 0;
  Eigen::MatrixXd mask;       // (F*J, F*J), entries 0/1, symmetric
  Eigen::MatrixXd adjacency;  // same shape, zero outside mask

  int node_index(int t, int j) const { return t * joints + j; }
};

// Edge rules over (frame, joint) nodes:
//   (a) same frame, bone-connected joints
//   (b) different frames, bone-connected joints
//   (c) different frames, same joint (optional; joins a joint to its own
//       trajectory so its history reaches its future directly)
//   (d) diagonal self-connections
// spatial_only keeps (a) and (d) only, making the matrix block-diagonal
// per frame.
Eigen::MatrixXd build_unified_mask(const Skeleton& skeleton, int frames,
                                   bool same_joint_temporal = true);
Eigen::MatrixXd build_spatial_only_mask(const Skeleton& skeleton, int frames);

// Factors for separate space-time modeling: a per-frame spatial graph over
// joints (bones + diagonal) and a per-joint temporal graph over frames
// (fully connected).
Eigen::MatrixXd build_spatial_mask(const Skeleton& skeleton);
Eigen::MatrixXd build_temporal_mask(int frames);

struct GraphMasks {
  GraphMode mode = GraphMode::unified;
  // unified/spatial_only: the (F*J)^2 node mask. separate: the (J, J)
  // spatial factor, with the temporal factor alongside.
  Eigen::MatrixXd node_mask;
  Eigen::MatrixXd temporal_mask;  // separate mode only, (F, F)
};

GraphMasks build_mask(const Skeleton& skeleton, int frames, GraphMode mode,
                      bool same_joint_temporal = true);

// Elementwise product; forces entries outside the mask to zero.
Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& adjacency,
                           const Eigen::MatrixXd& mask);

// Each row of the mask scaled to sum to one; the unbiased averaging start
// for trainable adjacency values.
Eigen::MatrixXd row_normalized(const Eigen::MatrixXd& mask);

// sigma(A * X * W); adjacency is expected to be masked already.
Eigen::MatrixXd graph_conv(const Eigen::MatrixXd& adjacency,
                           const Eigen::MatrixXd& node_features,
                           const Eigen::MatrixXd& weights, Activation activation);

UnifiedGraph make_unified_graph(const Skeleton& skeleton, int frames,
                                GraphMode mode, bool same_joint_temporal = true);

}  // namespace s2m
