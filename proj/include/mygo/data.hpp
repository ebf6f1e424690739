#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mygo/rng.hpp"
#include "mygo/tensor.hpp"

namespace mygo {

enum class Modality { cv, nlp };

struct Example {
  std::vector<double> pixels;   // cv: 784 values in [-1, 1]
  std::vector<int32_t> tokens;  // nlp: encoded token ids
  int32_t label = 0;            // global class id
};

struct Dataset {
  Modality modality = Modality::cv;
  std::vector<Example> examples;
  int32_t class_count = 0;
  std::vector<std::vector<size_t>> per_class;  // indices by global label

  void rebuild_index();
};

// One task of the sequential benchmark: its global classes in order, the
// train/test subsets restricted to them, and the implied local labels
// (position within `classes`).
struct TaskSpec {
  int task_id = 0;  // 1-based
  std::vector<int32_t> classes;
  std::vector<Example> train;
  std::vector<Example> test;

  int32_t local_label(int32_t global) const;
  int32_t global_label(int32_t local) const { return classes.at(local); }
};

// Token ids dense in [0, size); id 0 is reserved for unknown/rare tokens.
class Vocab {
 public:
  Vocab() { id_to_token_.push_back("<unk>"); }
  int32_t lookup(const std::string& token) const;
  size_t size() const { return id_to_token_.size(); }
  const std::string& token(int32_t id) const { return id_to_token_.at(id); }
  void add(const std::string& token);  // build-time only

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int32_t> token_to_id_;
};

// IDX ingestion (big-endian magic 0x803 images / 0x801 labels); pixels are
// rescaled to [-1, 1] via x/127.5 - 1.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

struct TextRow {
  int32_t label;  // 0-based
  std::string text;
};
struct TextCorpus {
  std::vector<TextRow> rows;
  int32_t class_count = 0;
  size_t skipped_rows = 0;
};
// CSV rows are label,title,description with labels 1..4; title and
// description are concatenated. Malformed rows are skipped and counted.
TextCorpus load_text_csv(const std::filesystem::path& path);

// Lowercase, split on non-alphanumeric runs.
std::vector<std::string> tokenize(const std::string& text);
// Tokens ordered by (frequency desc, token asc); below min_freq maps to 0.
Vocab build_vocab(const std::vector<std::string>& texts, int min_freq);
std::vector<int32_t> encode(const Vocab& vocab, const std::string& text);
Dataset encode_corpus(const TextCorpus& corpus, const Vocab& vocab);

std::vector<TaskSpec> split_tasks(const Dataset& train, const Dataset& test,
                                  int classes_per_task);
// Uniform without replacement, per class; deterministic under the rng seed.
Dataset subsample(const Dataset& dataset, size_t per_class, Rng& rng);

struct Batch {
  Modality modality = Modality::cv;
  Tensor images;                 // cv: [N,1,28,28]
  std::vector<int32_t> tokens;   // nlp: concatenated token ids
  std::vector<size_t> offsets;   // nlp: N+1 document offsets
  std::vector<int32_t> labels;   // local labels
  size_t size = 0;
};

Batch make_batch(const std::vector<Example>& examples,
                 const std::vector<size_t>& indices, Modality modality,
                 const TaskSpec& task);
// Same but keeping the examples' global labels (GAN training on raw classes).
Batch make_batch_global(const std::vector<Example>& examples,
                        const std::vector<size_t>& indices, Modality modality);

// Epoch index batches after a Fisher-Yates shuffle.
std::vector<std::vector<size_t>> batch_indices(size_t count, size_t batch_size,
                                               Rng& rng, bool drop_last);

}  // namespace mygo
