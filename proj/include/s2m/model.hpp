#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2m/autodiff.hpp"
#include "s2m/graph.hpp"
#include "s2m/reconstruct.hpp"
#include "s2m/segment.hpp"
#include "s2m/skeleton.hpp"

namespace s2m {

struct ModelConfig {
  int stages = 2;
  int snippets = 4;
  int blocks_per_refiner = 3;
  int hidden_dim = 128;
  int history = 10;
  int horizon = 25;
  int dims = 3;
  SchemeMode scheme = SchemeMode::non_shared;
  GraphMode graph_mode = GraphMode::unified;
  bool same_joint_temporal = true;

  int total_frames() const { return history + horizon; }
  SegmentationScheme segmentation_scheme() const { return {scheme, snippets}; }
  void validate() const;
};

// Trainable matrices of one graph convolutional layer. unified/spatial_only
// layers carry a (F*J)^2 node adjacency; separate layers carry the factored
// (J, J) spatial and (F, F) temporal matrices instead.
struct LayerParams {
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd temporal;  // separate mode only
  Eigen::MatrixXd weight;    // (d_in, d_out)
};

struct RefinerParams {
  LayerParams encoder;                             // dims -> hidden
  std::vector<std::array<LayerParams, 2>> blocks;  // hidden -> hidden, residual
  LayerParams decoder;                             // hidden -> dims, zero-init
};

struct StageParams {
  std::array<LayerParams, 3> transitional;  // dims->hidden, hidden->hidden, hidden->dims
  RefinerParams refiner;
};

struct StageOutput {
  std::vector<int> target_frames;             // future coords, [0, T_1, .., T-1]
  std::vector<Pose> predicted_transitionals;  // S+1 poses
  MotionSequence approx_sequence;             // horizon frames
  MotionSequence refined_sequence;            // horizon frames
};

using ForwardResult = std::vector<StageOutput>;

// Node features for one stage: true history in the first H frame slots, the
// future slots filled by the previous stage's refinement, or by replicating
// the last observed pose when there is no previous stage.
Eigen::MatrixXd seed_input(const MotionSequence& history,
                           const MotionSequence* prev_refined, int history_len,
                           int horizon);

std::string to_string(GraphMode mode);
std::string to_string(SchemeMode mode);
GraphMode graph_mode_from_string(const std::string& s);
SchemeMode scheme_mode_from_string(const std::string& s);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json skeleton_to_json(const Skeleton& skeleton);
Skeleton skeleton_from_json(const nlohmann::json& j);

class Model {
 public:
  Model(Skeleton skeleton, ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Skeleton& skeleton() const { return skeleton_; }
  const GraphMasks& masks() const { return masks_; }
  const std::vector<StageParams>& stage_params() const { return stages_; }
  std::vector<StageParams>& stage_params() { return stages_; }

  // Trainable scalar count; masked adjacency entries outside the mask do not
  // count. Depends only on the configuration and skeleton, never on data.
  std::size_t parameter_count() const;

  struct ParamRef {
    std::string name;
    Eigen::MatrixXd* value = nullptr;
    const Eigen::MatrixXd* mask = nullptr;  // null for unmasked tensors
  };
  std::vector<ParamRef> parameters();

  // Shared scheme: per-sample history segmentations averaged over the corpus,
  // then projected once into the future window.
  void fit_shared_segmentation(const std::vector<MotionSequence>& histories);
  const std::optional<Segmentation>& shared_history_segmentation() const {
    return shared_history_;
  }
  const std::optional<Segmentation>& shared_future_segmentation() const {
    return shared_future_;
  }

  // Future-window segmentation for one sample under the configured scheme.
  Segmentation future_segmentation(const MotionSequence& history) const;
  std::vector<int> target_frames(const Segmentation& future_seg) const;

  ForwardResult forward(const MotionSequence& history) const;
  MotionSequence predict(const MotionSequence& history) const;

  // Single-stage building blocks, exposed for direct testing.
  std::vector<Pose> predict_transitionals(int stage,
                                          const Eigen::MatrixXd& node_features,
                                          const std::vector<int>& target_frames) const;
  MotionSequence refine(int stage, const MotionSequence& history,
                        const MotionSequence& approx) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  friend class TapeModel;
  Skeleton skeleton_;
  ModelConfig config_;
  GraphMasks masks_;
  std::vector<StageParams> stages_;
  std::optional<Segmentation> shared_history_;
  std::optional<Segmentation> shared_future_;

  struct LayerRef {
    std::string name;
    LayerParams* params = nullptr;
    int in_dim = 0;
    int out_dim = 0;
  };
  std::vector<LayerRef> layer_refs();
  int layers_per_stage() const;
};

// Binds a model's parameters to tape leaves once per tape; forward graphs for
// any number of samples then share those leaves, so one backward pass yields
// batch-accumulated parameter gradients.
class TapeModel {
 public:
  TapeModel(const Model& model, ad::Tape& tape);

  struct StageNodes {
    ad::Tape::Id transitional_poses;  // ((S+1)*J, D)
    ad::Tape::Id approx;              // (T*J, D)
    ad::Tape::Id refined;             // (T*J, D)
  };

  std::vector<StageNodes> forward(const MotionSequence& history,
                                  const Segmentation& future_seg) const;

  // Aligned with Model::parameters().
  const std::vector<ad::Tape::Id>& param_ids() const { return param_ids_; }

  ad::Tape::Id transitional_module(int stage, ad::Tape::Id node_features,
                                   const std::vector<int>& select_rows) const;
  ad::Tape::Id refiner_module(int stage, ad::Tape::Id history_nodes,
                              ad::Tape::Id approx_nodes) const;

 private:
  struct LayerNodes {
    ad::Tape::Id adjacency = -1;  // masked node adjacency (or spatial factor)
    ad::Tape::Id temporal = -1;   // separate mode only
    ad::Tape::Id weight = -1;
  };

  ad::Tape::Id conv(const LayerNodes& layer, ad::Tape::Id x, bool relu) const;
  const LayerNodes& layer(int stage, int index) const;

  const Model* model_;
  ad::Tape* tape_;
  std::vector<ad::Tape::Id> param_ids_;
  std::vector<LayerNodes> layers_;
};

}  // namespace s2m
