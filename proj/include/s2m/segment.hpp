#pragma once

#include <vector>

#include "s2m/skeleton.hpp"

namespace s2m {

// Interior transitional frame indices over an inclusive [first, last] span.
// Snippet s runs from boundary s to boundary s+1 with a one-frame overlap.
struct Segmentation {
  std::vector<int> transitions;  // strictly increasing, all in (first, last)
  int first_frame = 0;
  int last_frame = 0;

  int snippet_count() const { return static_cast<int>(transitions.size()) + 1; }
  // Boundaries including both span endpoints: [first, T_1, ..., last].
  std::vector<int> boundaries() const;
  void validate() const;
};

enum class SchemeMode { shared, non_shared };

struct SegmentationScheme {
  SchemeMode mode = SchemeMode::non_shared;
  int snippets = 1;
};

// Per-joint mean of Euclidean distances between approx and seq at one frame.
double reconstruction_error(const MotionSequence& seq, const MotionSequence& approx,
                            int frame);

struct SplitEvent {
  int span_start = 0;
  int span_end = 0;
  int frame = 0;  // chosen transitional frame inside (span_start, span_end)
};

// Iterative chord-error split of a history window into `snippets` snippets:
// interpolate each span between its endpoint poses, pick the frame with the
// largest reconstruction error, split there, repeat. The span holding the
// globally largest error is split first; ties go to the lowest frame index,
// and a span whose error is exactly zero splits at its floor midpoint.
Segmentation segment_history(const MotionSequence& seq, int snippets);

// Audit trail of segment_history: one event per iteration, in split order.
std::vector<SplitEvent> split_order(const MotionSequence& seq, int snippets);

// Corpus-level averaging: k-th shared transition is the rounded mean of the
// k-th transition over all samples, nudged where rounding collides so the
// result stays strictly increasing inside the span.
Segmentation shared_transitions(const std::vector<Segmentation>& segmentations);

struct FutureProjection {
  Segmentation segmentation;         // over [0, horizon-1], future coordinates
  bool degenerate_fallback = false;  // least-squares fit unusable; uniform spacing used
};

// Least-squares line through the history boundaries (frame index as a
// function of ordinal position), extrapolated one snippet pattern into the
// future window, rounded and clamped to stay strictly monotone.
FutureProjection project_future_transitions(const Segmentation& history_seg,
                                            int history_len, int horizon,
                                            int snippets);

}  // namespace s2m
