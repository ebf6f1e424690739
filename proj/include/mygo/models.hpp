#pragma once
#include <filesystem>
#include <vector>

#include "mygo/data.hpp"
#include "mygo/rng.hpp"
#include "mygo/tensor.hpp"

namespace mygo {

struct ArchConfig {
  size_t feature_dim = 128;
  size_t embed_dim = 64;  // nlp token embedding width
  size_t conv1_channels = 16;
  size_t conv2_channels = 32;
  size_t image_hw = 28;
  size_t vocab_size = 0;  // nlp only
};

struct HeadState {
  int32_t task_id = 0;
  Tensor weight;  // [feature_dim, n_classes]
  Tensor bias;    // [n_classes]
};

// Shared feature extractor plus a growing, ordered set of per-task linear
// heads. Copying a Model deep-copies every parameter, so models behave as
// values; handed-out parameter tensors alias the model's own storage.
class Model {
 public:
  Model() = default;
  Model(const Model& other) { *this = other; }
  Model& operator=(const Model& other);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  static Model init(Modality modality, const ArchConfig& cfg, Rng& rng);

  Modality modality() const { return modality_; }
  const ArchConfig& arch() const { return arch_; }
  size_t feature_dim() const { return arch_.feature_dim; }
  size_t head_count() const { return heads_.size(); }
  bool has_head(int32_t task_id) const;
  size_t head_classes(int32_t task_id) const;
  std::vector<int32_t> head_task_ids() const;
  int32_t newest_task_id() const;
  size_t total_head_outputs() const;

  void add_head(int32_t task_id, size_t n_classes, Rng& rng);
  void reinit_head(int32_t task_id, Rng& rng);
  HeadState snapshot_head(int32_t task_id) const;
  void install_head(const HeadState& state);

  // [N, feature_dim] features; participates in the active tape if any.
  Tensor forward_features(const Batch& batch) const;
  Tensor forward_head(int32_t task_id, const Tensor& features) const;
  // Concatenation of every head's logits in task order.
  Tensor forward_all_heads(const Tensor& features) const;
  // nlp only: runs the post-pooling trunk and all heads on pooled embedding
  // vectors (the injection point for feature-space dreams).
  Tensor forward_from_features(const Tensor& pooled) const;
  // nlp only: the embedding+mean stage by itself.
  Tensor pooled_embedding(const Batch& batch) const;

  std::vector<Tensor> extractor_params() const;  // includes embedding table
  std::vector<Tensor> trunk_params() const;      // extractor minus embedding
  std::vector<Tensor> head_params(int32_t task_id) const;
  std::vector<Tensor> all_head_params() const;
  std::vector<Tensor> all_params() const;
  void set_extractor_trainable(bool on);
  void set_trainable(bool on);

  uint64_t extractor_hash() const;
  size_t param_count() const;

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  struct HeadSlot {
    int32_t task_id = 0;
    size_t n_classes = 0;
    Tensor weight, bias;
  };
  const HeadSlot& head(int32_t task_id) const;
  HeadSlot& head(int32_t task_id);

  Modality modality_ = Modality::cv;
  ArchConfig arch_;
  // cv extractor
  Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  // nlp extractor
  Tensor embed_;
  // shared trunk tail
  Tensor fc_w_, fc_b_;
  std::vector<HeadSlot> heads_;
};

// Frozen copy of the student with the wake-trained newest head installed;
// never updated during sleep.
struct Teacher {
  Model model;
};

Teacher make_teacher(const Model& student, const HeadState& wake_head);

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull);

}  // namespace mygo
