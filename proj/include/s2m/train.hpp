#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <json.hpp>

#include "s2m/model.hpp"
#include "s2m/skeleton.hpp"

namespace s2m {

// Per-term weights of the intermediate supervision; every stage contributes
// all three terms.
struct LossWeights {
  double refined_mpjpe = 1.0;
  double refined_velocity = 1.0;
  double transitional_mpjpe = 1.0;
};

struct TrainConfig {
  double learning_rate = 0.00001;
  double decay_factor = 0.96;
  int decay_every = 4;  // epochs
  int epochs = 50;
  int batch_size = 16;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  LossWeights weights;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct StageLoss {
  double mpjpe = 0.0;
  double velocity = 0.0;
  double transitional = 0.0;
};

// total is the training objective (weighted sum over stages); mpjpe and
// velocity report the last stage's refined terms on their own.
struct LossReport {
  double total = 0.0;
  double mpjpe = 0.0;
  double velocity = 0.0;
  std::vector<StageLoss> per_stage;
};

// Mean per-joint position error over all frames and joints.
double mpjpe(const MotionSequence& pred, const MotionSequence& truth);

// mpjpe applied to first differences along time.
double velocity_loss(const MotionSequence& pred, const MotionSequence& truth);

// Intermediate supervision over every stage: refined mpjpe + refined velocity
// + transitional-pose mpjpe against the truth poses at the target frames.
LossReport total_loss(const ForwardResult& stages, const MotionSequence& truth,
                      const Segmentation& future_seg,
                      const LossWeights& weights = {});

struct Sample {
  MotionSequence history;
  MotionSequence future;
};

// Splits full-length sequences (history+horizon frames each) into samples.
std::vector<Sample> split_corpus(const std::vector<MotionSequence>& sequences,
                                 int history, int horizon);

// Global-norm gradient clipping: scales every gradient by clip/norm when the
// joint norm exceeds clip, leaving the direction unchanged.
double clip_gradients(std::vector<Eigen::MatrixXd>& grads, double clip_norm);

class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  double learning_rate_at(int epoch) const;

  // One optimizer step on one batch; returns the batch-mean loss report.
  LossReport step(const std::vector<const Sample*>& batch, double learning_rate);

  LossReport run_epoch(const std::vector<Sample>& corpus, int epoch);

  std::vector<LossReport> train(const std::vector<Sample>& corpus,
                                const std::function<void(int, const LossReport&)>&
                                    on_epoch = {});

 private:
  Model* model_;
  TrainConfig config_;
  std::mt19937_64 shuffle_rng_;
  // Adam state, aligned with Model::parameters().
  std::vector<Eigen::MatrixXd> first_moment_;
  std::vector<Eigen::MatrixXd> second_moment_;
  long step_count_ = 0;
};

struct EvalTable {
  std::vector<double> timestamps_ms;
  std::vector<int> frame_indices;   // 0-based future frames
  std::vector<double> mpjpe;        // corpus mean at each timestamp
};

// Frame index of a prediction timestamp: round(ms*fps/1000) - 1 in 0-based
// future coordinates; errors if it falls outside [0, horizon).
int timestamp_to_frame(double ms, double fps, int horizon);

// Per-timestamp MPJPE of the model's final prediction, averaged over the
// corpus. Each timestamp is scored at its own frame only.
EvalTable evaluate(const Model& model, const std::vector<Sample>& corpus,
                   const std::vector<double>& timestamps_ms);

}  // namespace s2m
