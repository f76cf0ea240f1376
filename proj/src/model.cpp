#include "s2m/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <utility>

namespace s2m {

void ModelConfig::validate() const {
  if (stages < 1) throw ConfigError("stages must be >= 1");
  if (snippets < 1) throw ConfigError("snippets must be >= 1");
  if (blocks_per_refiner < 1) throw ConfigError("blocks_per_refiner must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (dims < 1) throw ConfigError("dims must be >= 1");
  if (history < 2) throw ConfigError("history must be >= 2 frames");
  if (horizon < 2) throw ConfigError("horizon must be >= 2 frames");
  if (history < snippets + 1) {
    throw ConfigError("history of " + std::to_string(history) +
                      " frames cannot hold " + std::to_string(snippets) +
                      " snippets");
  }
  if (horizon < snippets + 1) {
    throw ConfigError("horizon of " + std::to_string(horizon) +
                      " frames cannot hold " + std::to_string(snippets) +
                      " snippets");
  }
}

std::string to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::unified: return "unified";
    case GraphMode::separate: return "separate";
    case GraphMode::spatial_only: return "spatial_only";
  }
  throw ValueError("unknown graph mode");
}

std::string to_string(SchemeMode mode) {
  return mode == SchemeMode::shared ? "shared" : "non_shared";
}

GraphMode graph_mode_from_string(const std::string& s) {
  if (s == "unified") return GraphMode::unified;
  if (s == "separate") return GraphMode::separate;
  if (s == "spatial_only") return GraphMode::spatial_only;
  throw ConfigError("unknown graph mode '" + s + "'");
}

SchemeMode scheme_mode_from_string(const std::string& s) {
  if (s == "shared") return SchemeMode::shared;
  if (s == "non_shared") return SchemeMode::non_shared;
  throw ConfigError("unknown segmentation scheme '" + s + "'");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"stages", c.stages},
                        {"snippets", c.snippets},
                        {"blocks_per_refiner", c.blocks_per_refiner},
                        {"hidden_dim", c.hidden_dim},
                        {"history", c.history},
                        {"horizon", c.horizon},
                        {"dims", c.dims},
                        {"scheme", to_string(c.scheme)},
                        {"graph_mode", to_string(c.graph_mode)},
                        {"same_joint_temporal", c.same_joint_temporal}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.stages = j.value("stages", c.stages);
    c.snippets = j.value("snippets", c.snippets);
    c.blocks_per_refiner = j.value("blocks_per_refiner", c.blocks_per_refiner);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.history = j.value("history", c.history);
    c.horizon = j.value("horizon", c.horizon);
    c.dims = j.value("dims", c.dims);
    if (j.contains("scheme")) {
      c.scheme = scheme_mode_from_string(j.at("scheme").get<std::string>());
    }
    if (j.contains("graph_mode")) {
      c.graph_mode = graph_mode_from_string(j.at("graph_mode").get<std::string>());
    }
    c.same_joint_temporal = j.value("same_joint_temporal", c.same_joint_temporal);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json skeleton_to_json(const Skeleton& skeleton) {
  nlohmann::json bones = nlohmann::json::array();
  for (auto [i, j] : skeleton.bones()) bones.push_back({i, j});
  return nlohmann::json{{"joints", skeleton.joint_count()}, {"bones", bones}};
}

Skeleton skeleton_from_json(const nlohmann::json& j) {
  try {
    const int joints = j.at("joints").get<int>();
    std::vector<std::pair<int, int>> bones;
    for (const auto& b : j.at("bones")) {
      bones.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
    }
    return Skeleton(joints, std::move(bones));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad skeleton config: ") + e.what());
  }
}

Eigen::MatrixXd seed_input(const MotionSequence& history,
                           const MotionSequence* prev_refined, int history_len,
                           int horizon) {
  if (history.frames() != history_len) {
    throw ShapeError("seed_input: history has " + std::to_string(history.frames()) +
                     " frames, expected " + std::to_string(history_len));
  }
  const int joints = history.joints();
  const int dims = history.dims();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(history_len + horizon) * joints, dims);
  out.topRows(static_cast<Eigen::Index>(history_len) * joints) = history.data();
  if (prev_refined != nullptr) {
    if (prev_refined->frames() != horizon || prev_refined->joints() != joints ||
        prev_refined->dims() != dims) {
      throw ShapeError("seed_input: previous refinement shape mismatch");
    }
    out.bottomRows(static_cast<Eigen::Index>(horizon) * joints) = prev_refined->data();
  } else {
    const Eigen::MatrixXd last =
        history.data().bottomRows(joints);  // last observed pose
    for (int t = 0; t < horizon; ++t) {
      out.middleRows(static_cast<Eigen::Index>(history_len + t) * joints, joints) = last;
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd glorot(std::mt19937_64& rng, int rows, int cols) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = dist(rng);
  }
  return w;
}

}  // namespace

Model::Model(Skeleton skeleton, ModelConfig config, std::uint64_t seed)
    : skeleton_(std::move(skeleton)), config_(config) {
  config_.validate();
  masks_ = build_mask(skeleton_, config_.total_frames(), config_.graph_mode,
                      config_.same_joint_temporal);

  const Eigen::MatrixXd adjacency_init = row_normalized(masks_.node_mask);
  const Eigen::MatrixXd temporal_init =
      config_.graph_mode == GraphMode::separate
          ? row_normalized(masks_.temporal_mask)
          : Eigen::MatrixXd();

  std::mt19937_64 rng(seed);
  const int d = config_.hidden_dim;
  const int dims = config_.dims;
  auto make_layer = [&](int in_dim, int out_dim, bool zero_weight) {
    LayerParams layer;
    layer.adjacency = adjacency_init;
    layer.temporal = temporal_init;
    layer.weight = zero_weight ? Eigen::MatrixXd::Zero(in_dim, out_dim)
                               : glorot(rng, in_dim, out_dim);
    return layer;
  };

  stages_.resize(config_.stages);
  for (StageParams& stage : stages_) {
    stage.transitional[0] = make_layer(dims, d, false);
    stage.transitional[1] = make_layer(d, d, false);
    stage.transitional[2] = make_layer(d, dims, false);
    stage.refiner.encoder = make_layer(dims, d, false);
    stage.refiner.blocks.resize(config_.blocks_per_refiner);
    for (auto& block : stage.refiner.blocks) {
      block[0] = make_layer(d, d, false);
      block[1] = make_layer(d, d, false);
    }
    // Zero decoder: at initialization the refiner is the identity around the
    // assembled interpolation.
    stage.refiner.decoder = make_layer(d, dims, true);
  }
}

int Model::layers_per_stage() const {
  return 3 + 1 + 2 * config_.blocks_per_refiner + 1;
}

std::vector<Model::LayerRef> Model::layer_refs() {
  std::vector<LayerRef> refs;
  const int d = config_.hidden_dim;
  const int dims = config_.dims;
  for (int s = 0; s < config_.stages; ++s) {
    const std::string prefix = "stage" + std::to_string(s) + ".";
    StageParams& stage = stages_[s];
    refs.push_back({prefix + "trans.l0", &stage.transitional[0], dims, d});
    refs.push_back({prefix + "trans.l1", &stage.transitional[1], d, d});
    refs.push_back({prefix + "trans.l2", &stage.transitional[2], d, dims});
    refs.push_back({prefix + "refine.enc", &stage.refiner.encoder, dims, d});
    for (int b = 0; b < config_.blocks_per_refiner; ++b) {
      const std::string bp = prefix + "refine.block" + std::to_string(b) + ".";
      refs.push_back({bp + "c0", &stage.refiner.blocks[b][0], d, d});
      refs.push_back({bp + "c1", &stage.refiner.blocks[b][1], d, d});
    }
    refs.push_back({prefix + "refine.dec", &stage.refiner.decoder, d, dims});
  }
  return refs;
}

std::vector<Model::ParamRef> Model::parameters() {
  std::vector<ParamRef> params;
  const bool separate = config_.graph_mode == GraphMode::separate;
  for (LayerRef& ref : layer_refs()) {
    if (separate) {
      params.push_back({ref.name + ".spatial", &ref.params->adjacency,
                        &masks_.node_mask});
      params.push_back({ref.name + ".temporal", &ref.params->temporal, nullptr});
    } else {
      params.push_back({ref.name + ".adjacency", &ref.params->adjacency,
                        &masks_.node_mask});
    }
    params.push_back({ref.name + ".weight", &ref.params->weight, nullptr});
  }
  return params;
}

std::size_t Model::parameter_count() const {
  auto& self = const_cast<Model&>(*this);
  std::size_t count = 0;
  for (const ParamRef& p : self.parameters()) {
    if (p.mask != nullptr) {
      count += static_cast<std::size_t>(p.mask->sum());
    } else {
      count += static_cast<std::size_t>(p.value->size());
    }
  }
  return count;
}

void Model::fit_shared_segmentation(const std::vector<MotionSequence>& histories) {
  if (config_.scheme != SchemeMode::shared) {
    throw ConfigError("model scheme is non_shared; nothing to fit");
  }
  if (histories.empty()) {
    throw ValueError("fit_shared_segmentation needs at least one history");
  }
  std::vector<Segmentation> segs;
  segs.reserve(histories.size());
  for (const MotionSequence& h : histories) {
    segs.push_back(segment_history(h, config_.snippets));
  }
  shared_history_ = shared_transitions(segs);
  shared_future_ = project_future_transitions(*shared_history_, config_.history,
                                              config_.horizon, config_.snippets)
                       .segmentation;
}

Segmentation Model::future_segmentation(const MotionSequence& history) const {
  if (config_.scheme == SchemeMode::shared) {
    if (!shared_future_) {
      throw ConfigError("shared scheme: call fit_shared_segmentation (or load "
                        "a fitted checkpoint) before prediction");
    }
    return *shared_future_;
  }
  const Segmentation hist_seg = segment_history(history, config_.snippets);
  return project_future_transitions(hist_seg, config_.history, config_.horizon,
                                    config_.snippets)
      .segmentation;
}

std::vector<int> Model::target_frames(const Segmentation& future_seg) const {
  if (future_seg.first_frame != 0 || future_seg.last_frame != config_.horizon - 1) {
    throw ValueError("future segmentation does not span the horizon window");
  }
  return future_seg.boundaries();
}

// ---- TapeModel ----

TapeModel::TapeModel(const Model& model, ad::Tape& tape)
    : model_(&model), tape_(&tape) {
  const bool separate = model.config_.graph_mode == GraphMode::separate;
  const ad::Tape::Id mask_id =
      tape.leaf(model.masks_.node_mask, false, "node_mask");
  auto& self = const_cast<Model&>(model);
  for (Model::LayerRef& ref : self.layer_refs()) {
    LayerNodes nodes;
    if (separate) {
      const ad::Tape::Id spatial =
          tape.leaf(ref.params->adjacency, true, ref.name + ".spatial");
      param_ids_.push_back(spatial);
      nodes.adjacency = tape.hadamard(spatial, mask_id);
      nodes.temporal = tape.leaf(ref.params->temporal, true, ref.name + ".temporal");
      param_ids_.push_back(nodes.temporal);
    } else {
      const ad::Tape::Id adjacency =
          tape.leaf(ref.params->adjacency, true, ref.name + ".adjacency");
      param_ids_.push_back(adjacency);
      nodes.adjacency = tape.hadamard(adjacency, mask_id);
    }
    nodes.weight = tape.leaf(ref.params->weight, true, ref.name + ".weight");
    param_ids_.push_back(nodes.weight);
    layers_.push_back(nodes);
  }
}

const TapeModel::LayerNodes& TapeModel::layer(int stage, int index) const {
  const int per_stage = 3 + 1 + 2 * model_->config_.blocks_per_refiner + 1;
  return layers_[static_cast<std::size_t>(stage) * per_stage + index];
}

ad::Tape::Id TapeModel::conv(const LayerNodes& layer, ad::Tape::Id x,
                             bool relu) const {
  ad::Tape& t = *tape_;
  ad::Tape::Id aggregated;
  if (model_->config_.graph_mode == GraphMode::separate) {
    aggregated = t.temporal_matmul(layer.temporal, t.spatial_matmul(layer.adjacency, x));
  } else {
    aggregated = t.matmul(layer.adjacency, x);
  }
  const ad::Tape::Id out = t.matmul(aggregated, layer.weight);
  return relu ? t.relu(out) : out;
}

ad::Tape::Id TapeModel::transitional_module(int stage, ad::Tape::Id node_features,
                                            const std::vector<int>& select_rows) const {
  ad::Tape& t = *tape_;
  ad::Tape::Id h = conv(layer(stage, 0), node_features, true);
  h = conv(layer(stage, 1), h, true);
  const LayerNodes& last = layer(stage, 2);
  if (model_->config_.graph_mode == GraphMode::separate) {
    // The factored product has no free row form; run it in full and gather.
    return t.select_rows(conv(last, h, false), select_rows);
  }
  // Pose-wise form of the final layer: only the requested adjacency rows
  // participate, so the network emits exactly the requested poses.
  const ad::Tape::Id picked_rows = t.select_rows(last.adjacency, select_rows);
  return t.matmul(t.matmul(picked_rows, h), last.weight);
}

ad::Tape::Id TapeModel::refiner_module(int stage, ad::Tape::Id history_nodes,
                                       ad::Tape::Id approx_nodes) const {
  ad::Tape& t = *tape_;
  const ModelConfig& cfg = model_->config_;
  const int joints = model_->skeleton_.joint_count();

  const ad::Tape::Id x = t.concat_rows(history_nodes, approx_nodes);
  const int base = 3;
  ad::Tape::Id h = conv(layer(stage, base), x, true);
  for (int b = 0; b < cfg.blocks_per_refiner; ++b) {
    ad::Tape::Id y = conv(layer(stage, base + 1 + 2 * b), h, true);
    y = conv(layer(stage, base + 2 + 2 * b), y, false);
    h = t.relu(t.add(y, h));
  }
  const ad::Tape::Id decoded =
      conv(layer(stage, base + 1 + 2 * cfg.blocks_per_refiner), h, false);

  std::vector<int> future_rows(static_cast<std::size_t>(cfg.horizon) * joints);
  const int offset = cfg.history * joints;
  for (std::size_t r = 0; r < future_rows.size(); ++r) {
    future_rows[r] = offset + static_cast<int>(r);
  }
  // Residual correction on the future window only.
  return t.add(approx_nodes, t.select_rows(decoded, future_rows));
}

std::vector<TapeModel::StageNodes> TapeModel::forward(
    const MotionSequence& history, const Segmentation& future_seg) const {
  ad::Tape& t = *tape_;
  const ModelConfig& cfg = model_->config_;
  const int joints = model_->skeleton_.joint_count();
  if (history.frames() != cfg.history || history.joints() != joints ||
      history.dims() != cfg.dims) {
    throw ShapeError("forward: history shape (" + std::to_string(history.frames()) +
                     ", " + std::to_string(history.joints()) + ", " +
                     std::to_string(history.dims()) + ") does not match config");
  }
  const std::vector<int> targets = model_->target_frames(future_seg);

  std::vector<int> pose_rows;
  pose_rows.reserve(targets.size() * joints);
  for (int tf : targets) {
    for (int j = 0; j < joints; ++j) {
      pose_rows.push_back((cfg.history + tf) * joints + j);
    }
  }

  const ad::Tape::Id hist = t.leaf(history.data(), false, "history");
  const ad::Tape::Id interp =
      t.leaf(interpolation_matrix(future_seg, joints), false, "interp");

  // Stage 1 seeds the future with the last observed pose.
  const Eigen::MatrixXd seed0 = seed_input(history, nullptr, cfg.history, cfg.horizon)
                                    .bottomRows(static_cast<Eigen::Index>(cfg.horizon) * joints);
  ad::Tape::Id future = t.leaf(seed0, false, "seed");

  std::vector<StageNodes> out;
  out.reserve(cfg.stages);
  for (int s = 0; s < cfg.stages; ++s) {
    const ad::Tape::Id x = t.concat_rows(hist, future);
    const ad::Tape::Id poses = transitional_module(s, x, pose_rows);
    const ad::Tape::Id approx = t.matmul(interp, poses);
    const ad::Tape::Id refined = refiner_module(s, hist, approx);
    out.push_back({poses, approx, refined});
    future = refined;
  }
  return out;
}

// ---- Model forward/predict and single-stage wrappers ----

ForwardResult Model::forward(const MotionSequence& history) const {
  const Segmentation future_seg = future_segmentation(history);
  ad::Tape tape(true);
  TapeModel bound(*this, tape);
  const std::vector<TapeModel::StageNodes> nodes = bound.forward(history, future_seg);

  const int joints = skeleton_.joint_count();
  const std::vector<int> targets = target_frames(future_seg);
  ForwardResult result;
  result.reserve(nodes.size());
  for (const TapeModel::StageNodes& stage : nodes) {
    StageOutput out{
        targets,
        {},
        MotionSequence::from_matrix(tape.value(stage.approx), joints, history.fps()),
        MotionSequence::from_matrix(tape.value(stage.refined), joints, history.fps())};
    const Eigen::MatrixXd& poses = tape.value(stage.transitional_poses);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      out.predicted_transitionals.push_back(
          poses.middleRows(static_cast<Eigen::Index>(k) * joints, joints));
    }
    result.push_back(std::move(out));
  }
  return result;
}

MotionSequence Model::predict(const MotionSequence& history) const {
  return forward(history).back().refined_sequence;
}

std::vector<Pose> Model::predict_transitionals(int stage,
                                               const Eigen::MatrixXd& node_features,
                                               const std::vector<int>& target_frames) const {
  if (stage < 0 || stage >= config_.stages) {
    throw IndexError("stage " + std::to_string(stage) + " out of range");
  }
  const int joints = skeleton_.joint_count();
  if (node_features.rows() !=
          static_cast<Eigen::Index>(config_.total_frames()) * joints ||
      node_features.cols() != config_.dims) {
    throw ShapeError("predict_transitionals: node features must be (F*J, D)");
  }
  std::vector<int> rows;
  rows.reserve(target_frames.size() * joints);
  for (int tf : target_frames) {
    if (tf < 0 || tf >= config_.horizon) {
      throw IndexError("target frame " + std::to_string(tf) +
                       " outside the future window [0, " +
                       std::to_string(config_.horizon - 1) + "]");
    }
    for (int j = 0; j < joints; ++j) rows.push_back((config_.history + tf) * joints + j);
  }

  ad::Tape tape;
  TapeModel bound(*this, tape);
  const ad::Tape::Id x = tape.leaf(node_features, false, "features");
  const ad::Tape::Id poses = bound.transitional_module(stage, x, rows);
  std::vector<Pose> out;
  out.reserve(target_frames.size());
  for (std::size_t k = 0; k < target_frames.size(); ++k) {
    out.push_back(tape.value(poses).middleRows(static_cast<Eigen::Index>(k) * joints,
                                               joints));
  }
  return out;
}

MotionSequence Model::refine(int stage, const MotionSequence& history,
                             const MotionSequence& approx) const {
  if (stage < 0 || stage >= config_.stages) {
    throw IndexError("stage " + std::to_string(stage) + " out of range");
  }
  if (approx.frames() != config_.horizon || history.frames() != config_.history ||
      approx.joints() != skeleton_.joint_count() ||
      history.joints() != skeleton_.joint_count()) {
    throw ShapeError("refine: history/approx shapes do not match config");
  }
  ad::Tape tape;
  TapeModel bound(*this, tape);
  const ad::Tape::Id hist = tape.leaf(history.data(), false, "history");
  const ad::Tape::Id appr = tape.leaf(approx.data(), false, "approx");
  const ad::Tape::Id refined = bound.refiner_module(stage, hist, appr);
  return MotionSequence::from_matrix(tape.value(refined), skeleton_.joint_count(),
                                     approx.fps());
}

// ---- checkpoint io ----

namespace {

constexpr char kCheckpointMagic[] = "SNPCKPT1";

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
void get_or_throw(std::istream& in, T& value, const char* what) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) {
    throw LengthError(std::string("checkpoint truncated reading ") + what);
  }
  std::memcpy(&value, bytes, sizeof(T));
}

}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  nlohmann::json meta{{"config", model_config_to_json(config_)},
                      {"skeleton", skeleton_to_json(skeleton_)}};
  if (shared_history_) {
    meta["shared_history_transitions"] = shared_history_->transitions;
    meta["shared_future_transitions"] = shared_future_->transitions;
  }
  const std::string meta_str = meta.dump();

  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  put(out, static_cast<std::uint32_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  auto& self = const_cast<Model&>(*this);
  const std::vector<ParamRef> params = self.parameters();
  put(out, static_cast<std::uint32_t>(params.size()));
  for (const ParamRef& p : params) {
    put(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put(out, static_cast<std::uint32_t>(p.value->rows()));
    put(out, static_cast<std::uint32_t>(p.value->cols()));
    for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
        put(out, (*p.value)(r, c));
      }
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  char magic[sizeof(kCheckpointMagic) - 1];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
  }
  std::uint32_t meta_len = 0;
  get_or_throw(in, meta_len, "config length");
  std::string meta_str(meta_len, '\0');
  if (!in.read(meta_str.data(), meta_len)) {
    throw LengthError("checkpoint truncated reading config");
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }

  Model model(skeleton_from_json(meta.at("skeleton")),
              model_config_from_json(meta.at("config")), 0);
  if (meta.contains("shared_history_transitions")) {
    Segmentation hist_seg;
    hist_seg.first_frame = 0;
    hist_seg.last_frame = model.config_.history - 1;
    hist_seg.transitions =
        meta.at("shared_history_transitions").get<std::vector<int>>();
    hist_seg.validate();
    Segmentation future_seg;
    future_seg.first_frame = 0;
    future_seg.last_frame = model.config_.horizon - 1;
    future_seg.transitions =
        meta.at("shared_future_transitions").get<std::vector<int>>();
    future_seg.validate();
    model.shared_history_ = std::move(hist_seg);
    model.shared_future_ = std::move(future_seg);
  }

  std::uint32_t count = 0;
  get_or_throw(in, count, "tensor count");
  const std::vector<ParamRef> params = model.parameters();
  if (count != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) +
                      " tensors, expected " + std::to_string(params.size()));
  }
  for (const ParamRef& p : params) {
    std::uint32_t name_len = 0;
    get_or_throw(in, name_len, "tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw LengthError("checkpoint truncated reading tensor name");
    }
    if (name != p.name) {
      throw FormatError("checkpoint tensor '" + name + "' does not match expected '" +
                        p.name + "'");
    }
    std::uint32_t rows = 0, cols = 0;
    get_or_throw(in, rows, "tensor rows");
    get_or_throw(in, cols, "tensor cols");
    if (rows != static_cast<std::uint32_t>(p.value->rows()) ||
        cols != static_cast<std::uint32_t>(p.value->cols())) {
      throw ShapeError("checkpoint tensor '" + name + "' has shape " +
                       std::to_string(rows) + "x" + std::to_string(cols) +
                       ", expected " + std::to_string(p.value->rows()) + "x" +
                       std::to_string(p.value->cols()));
    }
    for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
        get_or_throw(in, (*p.value)(r, c), "tensor values");
      }
    }
    if (!p.value->allFinite()) {
      throw ValueError("checkpoint tensor '" + name + "' has non-finite values");
    }
    if (p.mask != nullptr) {
      // Values outside the mask must be exactly zero at all times.
      for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
          if ((*p.mask)(r, c) == 0.0 && (*p.value)(r, c) != 0.0) {
            throw ValueError("checkpoint tensor '" + name +
                             "' has nonzero values outside its mask");
          }
        }
      }
    }
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw LengthError("checkpoint has trailing bytes");
  }
  return model;
}

}  // namespace s2m
