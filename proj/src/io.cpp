#include "s2m/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace s2m {
namespace {

// The format is explicitly little-endian; every supported target here is
// little-endian, so plain byte copies of u32/f32 are the wire encoding.
static_assert(sizeof(float) == 4);

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& value) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) return false;
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

}  // namespace

MotionSequence read_motion(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  char magic[sizeof(kMotionMagic) - 1];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMotionMagic, sizeof(magic)) != 0) {
    throw FormatError("'" + path + "' is not a motion file (bad magic)");
  }

  std::uint32_t frames = 0, joints = 0, dims = 0;
  float fps = 0.0f;
  if (!get(in, frames) || !get(in, joints) || !get(in, dims) || !get(in, fps)) {
    throw LengthError("'" + path + "': truncated header");
  }
  if (frames == 0 || joints == 0 || dims == 0 || !(fps > 0.0f)) {
    throw FormatError("'" + path + "': invalid header fields");
  }

  const std::uint64_t count =
      std::uint64_t{frames} * joints * dims;
  Eigen::MatrixXd data(static_cast<Eigen::Index>(std::uint64_t{frames} * joints),
                       static_cast<Eigen::Index>(dims));
  std::vector<float> payload(count);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(count * sizeof(float)))) {
    throw LengthError("'" + path + "': payload shorter than " +
                      std::to_string(count) + " values");
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw LengthError("'" + path + "': trailing bytes after payload");
  }

  std::uint64_t k = 0;
  for (Eigen::Index row = 0; row < data.rows(); ++row) {
    for (Eigen::Index col = 0; col < data.cols(); ++col) {
      const float v = payload[k++];
      if (!std::isfinite(v)) {
        throw ValueError("'" + path + "': non-finite value in payload");
      }
      data(row, col) = static_cast<double>(v);
    }
  }
  return MotionSequence::from_matrix(std::move(data), static_cast<int>(joints),
                                     static_cast<double>(fps));
}

void write_motion(const MotionSequence& seq, const std::string& path) {
  if (!seq.all_finite()) {
    throw ValueError("refusing to write non-finite motion data");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  out.write(kMotionMagic, sizeof(kMotionMagic) - 1);
  put(out, static_cast<std::uint32_t>(seq.frames()));
  put(out, static_cast<std::uint32_t>(seq.joints()));
  put(out, static_cast<std::uint32_t>(seq.dims()));
  put(out, static_cast<float>(seq.fps()));
  const Eigen::MatrixXd& data = seq.data();
  for (Eigen::Index row = 0; row < data.rows(); ++row) {
    for (Eigen::Index col = 0; col < data.cols(); ++col) {
      put(out, static_cast<float>(data(row, col)));
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

SyntheticMotion generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t knots = spec.knot_frames.size();
  if (knots < 2) {
    throw SpecError("synthetic spec needs at least 2 knots, got " +
                    std::to_string(knots));
  }
  if (spec.knot_poses.size() != knots) {
    throw SpecError("synthetic spec has " + std::to_string(knots) +
                    " knot frames but " + std::to_string(spec.knot_poses.size()) +
                    " knot poses");
  }
  if (spec.knot_frames.front() != 0) {
    throw SpecError("synthetic knot frames must start at 0");
  }
  for (std::size_t k = 1; k < knots; ++k) {
    if (spec.knot_frames[k] <= spec.knot_frames[k - 1]) {
      throw SpecError("synthetic knot frames must be strictly increasing");
    }
  }
  if (spec.noise_std < 0.0) {
    throw SpecError("noise_std must be nonnegative");
  }
  for (const Pose& pose : spec.knot_poses) {
    if (pose.rows() != spec.joints || pose.cols() != spec.dims) {
      throw ShapeError("knot pose shape does not match (joints, dims)");
    }
  }

  const int frames = spec.knot_frames.back() + 1;
  MotionSequence seq(frames, spec.joints, spec.dims, spec.fps);
  for (std::size_t k = 0; k + 1 < knots; ++k) {
    const int a = spec.knot_frames[k];
    const int b = spec.knot_frames[k + 1];
    const Pose& pa = spec.knot_poses[k];
    const Pose& pb = spec.knot_poses[k + 1];
    for (int t = a; t <= b; ++t) {
      if (t == a) {
        seq.set_pose(t, pa);
      } else if (t == b) {
        seq.set_pose(t, pb);
      } else {
        const double len = b - a;
        seq.set_pose(t, (pa * (b - t) + pb * (t - a)) / len);
      }
    }
  }

  if (spec.noise_std > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    Eigen::MatrixXd& data = seq.data();
    for (Eigen::Index row = 0; row < data.rows(); ++row) {
      for (Eigen::Index col = 0; col < data.cols(); ++col) {
        data(row, col) += noise(rng);
      }
    }
  }

  SyntheticMotion out{std::move(seq), {}};
  out.true_transitions.assign(spec.knot_frames.begin() + 1,
                              spec.knot_frames.end() - 1);
  return out;
}

}  // namespace s2m
