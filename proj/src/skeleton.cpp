#include "s2m/skeleton.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

namespace s2m {

Skeleton::Skeleton(int joint_count, std::vector<std::pair<int, int>> bones)
    : joint_count_(joint_count) {
  if (joint_count <= 0) {
    throw ValueError("skeleton joint_count must be positive, got " +
                     std::to_string(joint_count));
  }
  bones_.reserve(bones.size());
  for (auto [i, j] : bones) {
    if (i == j) {
      throw ValueError("skeleton bone (" + std::to_string(i) + ", " +
                       std::to_string(j) + ") is a self-loop");
    }
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= joint_count) {
      throw IndexError("skeleton bone (" + std::to_string(i) + ", " +
                       std::to_string(j) + ") out of range for " +
                       std::to_string(joint_count) + " joints");
    }
    bones_.emplace_back(i, j);
  }
  std::sort(bones_.begin(), bones_.end());
  if (std::adjacent_find(bones_.begin(), bones_.end()) != bones_.end()) {
    throw ValueError("skeleton has duplicate bones");
  }

  bone_lookup_.assign(static_cast<std::size_t>(joint_count) * joint_count, 0);
  for (auto [i, j] : bones_) {
    bone_lookup_[static_cast<std::size_t>(i) * joint_count + j] = 1;
    bone_lookup_[static_cast<std::size_t>(j) * joint_count + i] = 1;
  }

  // Connectivity: one body, every joint reachable over bones.
  std::vector<char> seen(joint_count, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v = 0; v < joint_count; ++v) {
      if (!seen[v] && has_bone(u, v)) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  if (reached != joint_count) {
    throw ValueError("skeleton bone graph is disconnected (" +
                     std::to_string(reached) + " of " +
                     std::to_string(joint_count) + " joints reachable)");
  }
}

bool Skeleton::has_bone(int i, int j) const {
  if (i < 0 || j < 0 || i >= joint_count_ || j >= joint_count_) return false;
  return bone_lookup_[static_cast<std::size_t>(i) * joint_count_ + j] != 0;
}

int Skeleton::diameter() const {
  int diameter = 0;
  std::vector<int> dist(joint_count_);
  for (int source = 0; source < joint_count_; ++source) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> frontier;
    frontier.push(source);
    dist[source] = 0;
    while (!frontier.empty()) {
      int u = frontier.front();
      frontier.pop();
      diameter = std::max(diameter, dist[u]);
      for (int v = 0; v < joint_count_; ++v) {
        if (dist[v] < 0 && has_bone(u, v)) {
          dist[v] = dist[u] + 1;
          frontier.push(v);
        }
      }
    }
  }
  return diameter;
}

Skeleton Skeleton::chain(int joint_count) {
  std::vector<std::pair<int, int>> bones;
  bones.reserve(std::max(0, joint_count - 1));
  for (int i = 0; i + 1 < joint_count; ++i) bones.emplace_back(i, i + 1);
  return Skeleton(joint_count, std::move(bones));
}

MotionSequence::MotionSequence(int frames, int joints, int dims, double fps)
    : frames_(frames), joints_(joints), fps_(fps) {
  if (frames <= 0 || joints <= 0 || dims <= 0) {
    throw ShapeError("motion sequence dimensions must be positive, got (" +
                     std::to_string(frames) + ", " + std::to_string(joints) +
                     ", " + std::to_string(dims) + ")");
  }
  if (!(fps > 0.0)) {
    throw ValueError("fps must be positive, got " + std::to_string(fps));
  }
  data_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frames) * joints, dims);
}

MotionSequence MotionSequence::from_matrix(Eigen::MatrixXd data, int joints,
                                           double fps) {
  if (joints <= 0 || data.rows() % joints != 0 || data.rows() == 0 ||
      data.cols() == 0) {
    throw ShapeError("node matrix of " + std::to_string(data.rows()) +
                     " rows is not a whole number of " +
                     std::to_string(joints) + "-joint frames");
  }
  if (!data.allFinite()) {
    throw ValueError("motion sequence contains non-finite values");
  }
  MotionSequence seq(static_cast<int>(data.rows()) / joints, joints,
                     static_cast<int>(data.cols()), fps);
  seq.data_ = std::move(data);
  return seq;
}

Pose MotionSequence::pose(int t) const {
  if (t < 0 || t >= frames_) {
    throw IndexError("frame " + std::to_string(t) + " out of range [0, " +
                     std::to_string(frames_ - 1) + "]");
  }
  return data_.middleRows(static_cast<Eigen::Index>(t) * joints_, joints_);
}

void MotionSequence::set_pose(int t, const Pose& pose) {
  if (t < 0 || t >= frames_) {
    throw IndexError("frame " + std::to_string(t) + " out of range [0, " +
                     std::to_string(frames_ - 1) + "]");
  }
  if (pose.rows() != joints_ || pose.cols() != data_.cols()) {
    throw ShapeError("pose shape (" + std::to_string(pose.rows()) + ", " +
                     std::to_string(pose.cols()) + ") does not match (" +
                     std::to_string(joints_) + ", " +
                     std::to_string(data_.cols()) + ")");
  }
  data_.middleRows(static_cast<Eigen::Index>(t) * joints_, joints_) = pose;
}

MotionSequence slice(const MotionSequence& seq, int start, int end) {
  if (start < 0) {
    throw IndexError("slice start " + std::to_string(start) + " below 0");
  }
  if (end >= seq.frames()) {
    throw IndexError("slice end " + std::to_string(end) + " beyond last frame " +
                     std::to_string(seq.frames() - 1));
  }
  if (start > end) {
    throw IndexError("slice start " + std::to_string(start) +
                     " greater than end " + std::to_string(end));
  }
  const int joints = seq.joints();
  Eigen::MatrixXd data =
      seq.data().middleRows(static_cast<Eigen::Index>(start) * joints,
                            static_cast<Eigen::Index>(end - start + 1) * joints);
  return MotionSequence::from_matrix(std::move(data), joints, seq.fps());
}

MotionSequence velocity(const MotionSequence& seq) {
  if (seq.frames() < 2) {
    throw ShapeError("velocity needs at least 2 frames, got " +
                     std::to_string(seq.frames()));
  }
  const Eigen::Index body = static_cast<Eigen::Index>(seq.frames() - 1) * seq.joints();
  Eigen::MatrixXd diff = seq.data().bottomRows(body) - seq.data().topRows(body);
  return MotionSequence::from_matrix(std::move(diff), seq.joints(), seq.fps());
}

}  // namespace s2m
