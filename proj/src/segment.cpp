#include "s2m/segment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace s2m {

std::vector<int> Segmentation::boundaries() const {
  std::vector<int> out;
  out.reserve(transitions.size() + 2);
  out.push_back(first_frame);
  out.insert(out.end(), transitions.begin(), transitions.end());
  out.push_back(last_frame);
  return out;
}

void Segmentation::validate() const {
  if (first_frame >= last_frame) {
    throw ValueError("segmentation span [" + std::to_string(first_frame) + ", " +
                     std::to_string(last_frame) + "] is empty");
  }
  int prev = first_frame;
  for (int t : transitions) {
    if (t <= prev || t >= last_frame) {
      throw ValueError("segmentation transitions are not strictly increasing "
                       "inside the span");
    }
    prev = t;
  }
}

double reconstruction_error(const MotionSequence& seq, const MotionSequence& approx,
                            int frame) {
  if (seq.frames() != approx.frames() || seq.joints() != approx.joints() ||
      seq.dims() != approx.dims()) {
    throw ShapeError("reconstruction_error: sequence shapes differ");
  }
  if (frame < 0 || frame >= seq.frames()) {
    throw IndexError("reconstruction_error: frame " + std::to_string(frame) +
                     " out of range");
  }
  const int joints = seq.joints();
  double total = 0.0;
  for (int j = 0; j < joints; ++j) {
    const Eigen::Index row = static_cast<Eigen::Index>(frame) * joints + j;
    total += (approx.data().row(row) - seq.data().row(row)).norm();
  }
  return total / joints;
}

namespace {

// Chord error at one frame: distance between the true pose and the linear
// interpolation of the span's endpoint poses.
double chord_error(const MotionSequence& seq, int span_start, int span_end,
                   int frame) {
  const int joints = seq.joints();
  const double len = span_end - span_start;
  const double wa = (span_end - frame) / len;
  const double wb = (frame - span_start) / len;
  double total = 0.0;
  for (int j = 0; j < joints; ++j) {
    const Eigen::Index ra = static_cast<Eigen::Index>(span_start) * joints + j;
    const Eigen::Index rb = static_cast<Eigen::Index>(span_end) * joints + j;
    const Eigen::Index rt = static_cast<Eigen::Index>(frame) * joints + j;
    total += (wa * seq.data().row(ra) + wb * seq.data().row(rb) -
              seq.data().row(rt))
                 .norm();
  }
  return total / joints;
}

struct SpanPick {
  double error = -1.0;  // max chord error over interior frames
  int frame = -1;       // argmax frame (lowest index on ties); midpoint if error 0
};

SpanPick pick_split(const MotionSequence& seq, int start, int end) {
  SpanPick pick;
  pick.error = 0.0;
  pick.frame = -1;
  for (int t = start + 1; t < end; ++t) {
    const double err = chord_error(seq, start, end, t);
    if (err > pick.error) {
      pick.error = err;
      pick.frame = t;
    }
  }
  if (pick.frame < 0) pick.frame = (start + end) / 2;  // perfectly linear span
  return pick;
}

}  // namespace

std::vector<SplitEvent> split_order(const MotionSequence& seq, int snippets) {
  if (snippets < 1) {
    throw ValueError("snippet count must be >= 1, got " + std::to_string(snippets));
  }
  const int frames = seq.frames();
  if (frames < snippets + 1) {
    throw LengthError("history of " + std::to_string(frames) +
                      " frames is too short for " + std::to_string(snippets) +
                      " snippets (needs at least " + std::to_string(snippets + 1) +
                      ")");
  }

  struct Span {
    int start, end;
    SpanPick pick;
  };
  std::vector<Span> spans;
  spans.push_back({0, frames - 1, pick_split(seq, 0, frames - 1)});

  std::vector<SplitEvent> trail;
  while (static_cast<int>(spans.size()) < snippets) {
    // Split the span holding the globally largest chord error; a span needs
    // an interior frame (length >= 3) to be splittable. Ties between spans
    // resolve to the earliest span.
    int best = -1;
    for (std::size_t s = 0; s < spans.size(); ++s) {
      if (spans[s].end - spans[s].start < 2) continue;
      if (best < 0 || spans[s].pick.error > spans[best].pick.error) {
        best = static_cast<int>(s);
      }
    }
    if (best < 0) {
      throw LengthError("no span left with an interior frame; cannot reach " +
                        std::to_string(snippets) + " snippets");
    }
    const Span chosen = spans[best];
    trail.push_back({chosen.start, chosen.end, chosen.pick.frame});
    Span left{chosen.start, chosen.pick.frame, {}};
    Span right{chosen.pick.frame, chosen.end, {}};
    if (left.end - left.start >= 2) left.pick = pick_split(seq, left.start, left.end);
    if (right.end - right.start >= 2) {
      right.pick = pick_split(seq, right.start, right.end);
    }
    spans[best] = left;
    spans.insert(spans.begin() + best + 1, right);
  }
  return trail;
}

Segmentation segment_history(const MotionSequence& seq, int snippets) {
  std::vector<SplitEvent> trail = split_order(seq, snippets);
  Segmentation seg;
  seg.first_frame = 0;
  seg.last_frame = seq.frames() - 1;
  seg.transitions.reserve(trail.size());
  for (const SplitEvent& e : trail) seg.transitions.push_back(e.frame);
  std::sort(seg.transitions.begin(), seg.transitions.end());
  seg.validate();
  return seg;
}

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

// Round the targets, then restore strict monotonicity inside (first, last):
// collisions push later points forward, and a backward pass pulls points
// off the upper bound if the forward pass ran into it.
std::vector<int> round_monotone(const std::vector<double>& targets, int first_frame,
                                int last_frame) {
  const int n = static_cast<int>(targets.size());
  std::vector<int> out(n);
  int prev = first_frame;
  for (int k = 0; k < n; ++k) {
    out[k] = std::max(round_half_up(targets[k]), prev + 1);
    prev = out[k];
  }
  int ceiling = last_frame;
  for (int k = n - 1; k >= 0; --k) {
    out[k] = std::min(out[k], ceiling - 1);
    ceiling = out[k];
  }
  if (n > 0 && out[0] <= first_frame) {
    throw LengthError("span [" + std::to_string(first_frame) + ", " +
                      std::to_string(last_frame) + "] cannot hold " +
                      std::to_string(n) + " interior transitions");
  }
  return out;
}

}  // namespace

Segmentation shared_transitions(const std::vector<Segmentation>& segmentations) {
  if (segmentations.empty()) {
    throw ValueError("shared_transitions needs at least one segmentation");
  }
  const Segmentation& head = segmentations.front();
  for (const Segmentation& seg : segmentations) {
    seg.validate();
    if (seg.transitions.size() != head.transitions.size() ||
        seg.first_frame != head.first_frame || seg.last_frame != head.last_frame) {
      throw ValueError("shared_transitions: inputs mix snippet counts or spans");
    }
  }

  const std::size_t count = head.transitions.size();
  std::vector<double> means(count, 0.0);
  for (const Segmentation& seg : segmentations) {
    for (std::size_t k = 0; k < count; ++k) means[k] += seg.transitions[k];
  }
  for (double& m : means) m /= static_cast<double>(segmentations.size());

  Segmentation out;
  out.first_frame = head.first_frame;
  out.last_frame = head.last_frame;
  out.transitions = round_monotone(means, head.first_frame, head.last_frame);
  out.validate();
  return out;
}

FutureProjection project_future_transitions(const Segmentation& history_seg,
                                            int history_len, int horizon,
                                            int snippets) {
  history_seg.validate();
  if (history_seg.first_frame != 0 || history_seg.last_frame != history_len - 1) {
    throw ValueError("history segmentation does not span the " +
                     std::to_string(history_len) + "-frame history window");
  }
  if (history_seg.snippet_count() != snippets) {
    throw ValueError("history segmentation has " +
                     std::to_string(history_seg.snippet_count()) +
                     " snippets, expected " + std::to_string(snippets));
  }
  if (horizon < snippets + 1) {
    throw LengthError("future window of " + std::to_string(horizon) +
                      " frames is too short for " + std::to_string(snippets) +
                      " snippets");
  }

  FutureProjection out;
  out.segmentation.first_frame = 0;
  out.segmentation.last_frame = horizon - 1;
  if (snippets == 1) return out;

  // Fit frame index against ordinal position over all S+1 history boundaries,
  // then continue the line S-1 ordinals past the history window. History
  // boundary indices are translated so the future window starts at 0.
  const std::vector<int> hist = history_seg.boundaries();
  const int n = static_cast<int>(hist.size());
  double mean_k = 0.0, mean_x = 0.0;
  for (int k = 0; k < n; ++k) {
    mean_k += k;
    mean_x += hist[k];
  }
  mean_k /= n;
  mean_x /= n;
  double cov = 0.0, var = 0.0;
  for (int k = 0; k < n; ++k) {
    cov += (k - mean_k) * (hist[k] - mean_x);
    var += (k - mean_k) * (k - mean_k);
  }

  std::vector<double> targets(snippets - 1);
  const double slope = cov / var;
  const double intercept = mean_x - slope * mean_k;
  if (!std::isfinite(slope) || slope <= 0.0) {
    // Cannot happen for a valid (strictly increasing) segmentation, but the
    // fallback keeps the contract total: evenly spaced future transitions.
    out.degenerate_fallback = true;
    for (int k = 1; k < snippets; ++k) {
      targets[k - 1] = static_cast<double>(k) * (horizon - 1) / snippets;
    }
  } else {
    for (int k = 1; k < snippets; ++k) {
      targets[k - 1] = slope * (n - 1 + k) + intercept - history_len;
    }
  }

  out.segmentation.transitions = round_monotone(targets, 0, horizon - 1);
  out.segmentation.validate();
  return out;
}

}  // namespace s2m
