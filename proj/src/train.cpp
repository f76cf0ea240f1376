#include "s2m/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace s2m {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (weights.refined_mpjpe < 0.0 || weights.refined_velocity < 0.0 ||
      weights.transitional_mpjpe < 0.0) {
    throw ConfigError("loss weights must be nonnegative");
  }
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"learning_rate", c.learning_rate},
                        {"decay_factor", c.decay_factor},
                        {"decay_every", c.decay_every},
                        {"epochs", c.epochs},
                        {"batch_size", c.batch_size},
                        {"clip_norm", c.clip_norm},
                        {"seed", c.seed},
                        {"weights",
                         {{"refined_mpjpe", c.weights.refined_mpjpe},
                          {"refined_velocity", c.weights.refined_velocity},
                          {"transitional_mpjpe", c.weights.transitional_mpjpe}}},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"epsilon", c.epsilon}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.decay_every = j.value("decay_every", c.decay_every);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.refined_mpjpe = w.value("refined_mpjpe", c.weights.refined_mpjpe);
      c.weights.refined_velocity =
          w.value("refined_velocity", c.weights.refined_velocity);
      c.weights.transitional_mpjpe =
          w.value("transitional_mpjpe", c.weights.transitional_mpjpe);
    }
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

void check_same_shape(const MotionSequence& a, const MotionSequence& b,
                      const char* op) {
  if (a.frames() != b.frames() || a.joints() != b.joints() || a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": sequence shapes differ");
  }
}

double mean_row_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    total += (a.row(r) - b.row(r)).norm();
  }
  return total / static_cast<double>(a.rows());
}

}  // namespace

double mpjpe(const MotionSequence& pred, const MotionSequence& truth) {
  check_same_shape(pred, truth, "mpjpe");
  return mean_row_distance(pred.data(), truth.data());
}

double velocity_loss(const MotionSequence& pred, const MotionSequence& truth) {
  check_same_shape(pred, truth, "velocity_loss");
  if (pred.frames() < 2) {
    throw ShapeError("velocity_loss needs at least 2 frames");
  }
  return mean_row_distance(velocity(pred).data(), velocity(truth).data());
}

LossReport total_loss(const ForwardResult& stages, const MotionSequence& truth,
                      const Segmentation& future_seg, const LossWeights& weights) {
  if (stages.empty()) throw ValueError("total_loss: no stage outputs");
  future_seg.validate();

  const int joints = truth.joints();
  LossReport report;
  for (const StageOutput& stage : stages) {
    StageLoss loss;
    loss.mpjpe = mpjpe(stage.refined_sequence, truth);
    loss.velocity = velocity_loss(stage.refined_sequence, truth);
    double transitional = 0.0;
    for (std::size_t k = 0; k < stage.target_frames.size(); ++k) {
      const Pose truth_pose = truth.pose(stage.target_frames[k]);
      for (int j = 0; j < joints; ++j) {
        transitional +=
            (stage.predicted_transitionals[k].row(j) - truth_pose.row(j)).norm();
      }
    }
    loss.transitional = transitional /
                        static_cast<double>(stage.target_frames.size() * joints);
    report.per_stage.push_back(loss);
    report.total += weights.refined_mpjpe * loss.mpjpe +
                    weights.refined_velocity * loss.velocity +
                    weights.transitional_mpjpe * loss.transitional;
  }
  report.mpjpe = report.per_stage.back().mpjpe;
  report.velocity = report.per_stage.back().velocity;
  return report;
}

std::vector<Sample> split_corpus(const std::vector<MotionSequence>& sequences,
                                 int history, int horizon) {
  std::vector<Sample> corpus;
  corpus.reserve(sequences.size());
  for (const MotionSequence& seq : sequences) {
    if (seq.frames() != history + horizon) {
      throw ShapeError("corpus sample has " + std::to_string(seq.frames()) +
                       " frames; configuration needs exactly " +
                       std::to_string(history + horizon));
    }
    corpus.push_back({slice(seq, 0, history - 1),
                      slice(seq, history, history + horizon - 1)});
  }
  return corpus;
}

double clip_gradients(std::vector<Eigen::MatrixXd>& grads, double clip_norm) {
  double squared = 0.0;
  for (const Eigen::MatrixXd& g : grads) squared += g.squaredNorm();
  const double norm = std::sqrt(squared);
  if (norm > clip_norm && norm > 0.0) {
    const double factor = clip_norm / norm;
    for (Eigen::MatrixXd& g : grads) g *= factor;
  }
  return norm;
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(&model), config_(config), shuffle_rng_(config.seed) {
  config_.validate();
  for (const Model::ParamRef& p : model_->parameters()) {
    first_moment_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
    second_moment_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
  }
}

double Trainer::learning_rate_at(int epoch) const {
  return config_.learning_rate *
         std::pow(config_.decay_factor, epoch / config_.decay_every);
}

LossReport Trainer::step(const std::vector<const Sample*>& batch,
                         double learning_rate) {
  if (batch.empty()) throw ValueError("empty batch");
  const ModelConfig& cfg = model_->config();
  const int joints = model_->skeleton().joint_count();
  const int horizon = cfg.horizon;

  ad::Tape tape(true);
  TapeModel bound(*model_, tape);

  auto mean_norm_node = [&](ad::Tape::Id prediction, ad::Tape::Id truth,
                            Eigen::Index rows) {
    return tape.scale(tape.sum(tape.row_norms(tape.sub(prediction, truth))),
                      1.0 / static_cast<double>(rows));
  };

  // Rows selecting frames 1.. and 0..T-2 of a (T*J, D) node block; their
  // difference is the per-frame velocity.
  std::vector<int> upper_rows(static_cast<std::size_t>(horizon - 1) * joints);
  std::vector<int> lower_rows(upper_rows.size());
  for (std::size_t r = 0; r < upper_rows.size(); ++r) {
    upper_rows[r] = static_cast<int>(r) + joints;
    lower_rows[r] = static_cast<int>(r);
  }

  LossReport mean_report;
  mean_report.per_stage.resize(cfg.stages);
  ad::Tape::Id batch_sum = -1;
  for (const Sample* sample : batch) {
    const Segmentation future_seg = model_->future_segmentation(sample->history);
    const std::vector<TapeModel::StageNodes> nodes =
        bound.forward(sample->history, future_seg);
    const std::vector<int> targets = model_->target_frames(future_seg);

    const ad::Tape::Id truth = tape.leaf(sample->future.data(), false, "truth");
    const ad::Tape::Id truth_velocity =
        tape.leaf(velocity(sample->future).data(), false, "truth_velocity");
    Eigen::MatrixXd target_poses(static_cast<Eigen::Index>(targets.size()) * joints,
                                 cfg.dims);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      target_poses.middleRows(static_cast<Eigen::Index>(k) * joints, joints) =
          sample->future.pose(targets[k]);
    }
    const ad::Tape::Id truth_targets =
        tape.leaf(std::move(target_poses), false, "truth_transitionals");

    ad::Tape::Id sample_total = -1;
    for (int s = 0; s < cfg.stages; ++s) {
      const TapeModel::StageNodes& stage = nodes[s];
      const ad::Tape::Id stage_mpjpe = mean_norm_node(
          stage.refined, truth, static_cast<Eigen::Index>(horizon) * joints);
      const ad::Tape::Id pred_velocity =
          tape.sub(tape.select_rows(stage.refined, upper_rows),
                   tape.select_rows(stage.refined, lower_rows));
      const ad::Tape::Id stage_velocity =
          mean_norm_node(pred_velocity, truth_velocity,
                         static_cast<Eigen::Index>(horizon - 1) * joints);
      const ad::Tape::Id stage_transitional =
          mean_norm_node(stage.transitional_poses, truth_targets,
                         static_cast<Eigen::Index>(targets.size()) * joints);

      mean_report.per_stage[s].mpjpe += tape.value(stage_mpjpe)(0, 0);
      mean_report.per_stage[s].velocity += tape.value(stage_velocity)(0, 0);
      mean_report.per_stage[s].transitional += tape.value(stage_transitional)(0, 0);

      ad::Tape::Id stage_total =
          tape.scale(stage_mpjpe, config_.weights.refined_mpjpe);
      stage_total = tape.add(
          stage_total, tape.scale(stage_velocity, config_.weights.refined_velocity));
      stage_total = tape.add(
          stage_total,
          tape.scale(stage_transitional, config_.weights.transitional_mpjpe));
      sample_total = sample_total < 0 ? stage_total : tape.add(sample_total, stage_total);
    }
    batch_sum = batch_sum < 0 ? sample_total : tape.add(batch_sum, sample_total);
  }
  const ad::Tape::Id batch_loss =
      tape.scale(batch_sum, 1.0 / static_cast<double>(batch.size()));

  tape.backward(batch_loss);

  const std::vector<Model::ParamRef> params = model_->parameters();
  const std::vector<ad::Tape::Id>& ids = bound.param_ids();
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads.push_back(tape.grad(ids[i]));
  }
  clip_gradients(grads, config_.clip_norm);

  ++step_count_;
  const double bias1 = 1.0 - std::pow(config_.beta1, step_count_);
  const double bias2 = 1.0 - std::pow(config_.beta2, step_count_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& m = first_moment_[i];
    Eigen::MatrixXd& v = second_moment_[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * grads[i];
    v = config_.beta2 * v +
        (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]).eval();
    const Eigen::ArrayXXd m_hat = m.array() / bias1;
    const Eigen::ArrayXXd v_hat = v.array() / bias2;
    params[i].value->array() -=
        learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
    if (params[i].mask != nullptr) {
      // Masked entries see zero gradient and zero moments, so they stay put;
      // the projection makes the invariant unconditional.
      *params[i].value = params[i].value->cwiseProduct(*params[i].mask);
    }
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  mean_report.total = tape.value(batch_loss)(0, 0);
  for (StageLoss& stage : mean_report.per_stage) {
    stage.mpjpe *= scale;
    stage.velocity *= scale;
    stage.transitional *= scale;
  }
  mean_report.mpjpe = mean_report.per_stage.back().mpjpe;
  mean_report.velocity = mean_report.per_stage.back().velocity;
  return mean_report;
}

LossReport Trainer::run_epoch(const std::vector<Sample>& corpus, int epoch) {
  if (corpus.empty()) throw ValueError("empty corpus");
  if (config_.batch_size > static_cast<int>(corpus.size())) {
    throw ConfigError("batch_size " + std::to_string(config_.batch_size) +
                      " exceeds corpus size " + std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng_);

  const double lr = learning_rate_at(epoch);
  LossReport epoch_report;
  epoch_report.per_stage.resize(model_->config().stages);
  std::size_t samples_seen = 0;
  for (std::size_t begin = 0; begin < order.size();
       begin += static_cast<std::size_t>(config_.batch_size)) {
    const std::size_t end =
        std::min(order.size(), begin + static_cast<std::size_t>(config_.batch_size));
    std::vector<const Sample*> batch;
    batch.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) batch.push_back(&corpus[order[k]]);
    const LossReport report = step(batch, lr);
    const double weight = static_cast<double>(batch.size());
    epoch_report.total += weight * report.total;
    for (int s = 0; s < model_->config().stages; ++s) {
      epoch_report.per_stage[s].mpjpe += weight * report.per_stage[s].mpjpe;
      epoch_report.per_stage[s].velocity += weight * report.per_stage[s].velocity;
      epoch_report.per_stage[s].transitional +=
          weight * report.per_stage[s].transitional;
    }
    samples_seen += batch.size();
  }
  const double scale = 1.0 / static_cast<double>(samples_seen);
  epoch_report.total *= scale;
  for (StageLoss& stage : epoch_report.per_stage) {
    stage.mpjpe *= scale;
    stage.velocity *= scale;
    stage.transitional *= scale;
  }
  epoch_report.mpjpe = epoch_report.per_stage.back().mpjpe;
  epoch_report.velocity = epoch_report.per_stage.back().velocity;
  return epoch_report;
}

std::vector<LossReport> Trainer::train(
    const std::vector<Sample>& corpus,
    const std::function<void(int, const LossReport&)>& on_epoch) {
  if (model_->config().scheme == SchemeMode::shared &&
      !model_->shared_future_segmentation()) {
    std::vector<MotionSequence> histories;
    histories.reserve(corpus.size());
    for (const Sample& s : corpus) histories.push_back(s.history);
    model_->fit_shared_segmentation(histories);
  }
  std::vector<LossReport> reports;
  reports.reserve(config_.epochs);
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    reports.push_back(run_epoch(corpus, epoch));
    if (on_epoch) on_epoch(epoch, reports.back());
  }
  return reports;
}

int timestamp_to_frame(double ms, double fps, int horizon) {
  const int frame = static_cast<int>(std::lround(ms * fps / 1000.0)) - 1;
  if (frame < 0 || frame >= horizon) {
    throw IndexError("timestamp " + std::to_string(ms) + " ms maps to frame " +
                     std::to_string(frame) + ", outside [0, " +
                     std::to_string(horizon - 1) + "]");
  }
  return frame;
}

EvalTable evaluate(const Model& model, const std::vector<Sample>& corpus,
                   const std::vector<double>& timestamps_ms) {
  if (corpus.empty()) throw ValueError("empty corpus");
  const int horizon = model.config().horizon;
  const int joints = model.skeleton().joint_count();

  EvalTable table;
  table.timestamps_ms = timestamps_ms;
  for (double ms : timestamps_ms) {
    table.frame_indices.push_back(
        timestamp_to_frame(ms, corpus.front().history.fps(), horizon));
  }
  table.mpjpe.assign(timestamps_ms.size(), 0.0);

  for (const Sample& sample : corpus) {
    const MotionSequence prediction = model.predict(sample.history);
    for (std::size_t k = 0; k < table.frame_indices.size(); ++k) {
      const int frame = table.frame_indices[k];
      double err = 0.0;
      for (int j = 0; j < joints; ++j) {
        const Eigen::Index row = static_cast<Eigen::Index>(frame) * joints + j;
        err += (prediction.data().row(row) - sample.future.data().row(row)).norm();
      }
      table.mpjpe[k] += err / joints;
    }
  }
  for (double& value : table.mpjpe) value /= static_cast<double>(corpus.size());
  return table;
}

}  // namespace s2m
