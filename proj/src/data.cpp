#include "mygo/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace mygo {

namespace {

uint32_t read_be32(std::istream& is, const std::string& what) {
  uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("truncated IDX header reading " + what);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) |
         (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

}  // namespace

void Dataset::rebuild_index() {
  per_class.assign(static_cast<size_t>(class_count), {});
  for (size_t i = 0; i < examples.size(); ++i) {
    const int32_t l = examples[i].label;
    if (l < 0 || l >= class_count)
      throw std::runtime_error("label " + std::to_string(l) +
                               " outside [0, " + std::to_string(class_count) +
                               ")");
    per_class[static_cast<size_t>(l)].push_back(i);
  }
}

int32_t TaskSpec::local_label(int32_t global) const {
  for (size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == global) return static_cast<int32_t>(i);
  throw std::out_of_range("class " + std::to_string(global) +
                          " not in task " + std::to_string(task_id));
}

int32_t Vocab::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? 0 : it->second;
}

void Vocab::add(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int32_t>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs)
    throw std::runtime_error("cannot open images file: " + images_path.string());
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs)
    throw std::runtime_error("cannot open labels file: " + labels_path.string());

  const uint32_t img_magic = read_be32(imgs, "image magic");
  if (img_magic != 0x00000803u)
    throw std::runtime_error("bad IDX image magic in " + images_path.string());
  const uint32_t lab_magic = read_be32(labs, "label magic");
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("bad IDX label magic in " + labels_path.string());

  const uint32_t n_images = read_be32(imgs, "image count");
  const uint32_t rows = read_be32(imgs, "rows");
  const uint32_t cols = read_be32(imgs, "cols");
  const uint32_t n_labels = read_be32(labs, "label count");
  if (n_images != n_labels)
    throw std::runtime_error("IDX count mismatch: " + std::to_string(n_images) +
                             " images vs " + std::to_string(n_labels) +
                             " labels");
  if (rows == 0 || cols == 0) throw std::runtime_error("IDX zero extents");

  const size_t pixels = static_cast<size_t>(rows) * cols;
  Dataset ds;
  ds.modality = Modality::cv;
  ds.examples.resize(n_images);
  std::vector<uint8_t> buf(pixels);
  for (uint32_t i = 0; i < n_images; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(pixels));
    if (!imgs)
      throw std::runtime_error("truncated IDX image data at example " +
                               std::to_string(i));
    Example& ex = ds.examples[i];
    ex.pixels.resize(pixels);
    for (size_t p = 0; p < pixels; ++p)
      ex.pixels[p] = static_cast<double>(buf[p]) / 127.5 - 1.0;
    uint8_t lab;
    labs.read(reinterpret_cast<char*>(&lab), 1);
    if (!labs)
      throw std::runtime_error("truncated IDX label data at example " +
                               std::to_string(i));
    ex.label = lab;
  }
  int32_t max_label = -1;
  for (const Example& ex : ds.examples) max_label = std::max(max_label, ex.label);
  ds.class_count = max_label + 1;
  ds.rebuild_index();
  return ds;
}

namespace {

// One CSV record with RFC-4180-style quoting; returns false at end of input.
bool read_csv_record(std::istream& is, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = is.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (is.peek() == '"') {
          field.push_back('"');
          is.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      // swallow, handles CRLF
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

TextCorpus load_text_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open csv file: " + path.string());
  TextCorpus corpus;
  std::vector<std::string> fields;
  while (read_csv_record(is, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() < 3) {
      ++corpus.skipped_rows;
      continue;
    }
    int label;
    try {
      size_t used = 0;
      label = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      ++corpus.skipped_rows;
      continue;
    }
    if (label < 1 || label > 4) {
      ++corpus.skipped_rows;
      continue;
    }
    TextRow row;
    row.label = label - 1;
    row.text = fields[1] + " " + fields[2];
    corpus.rows.push_back(std::move(row));
  }
  if (corpus.rows.empty())
    throw std::runtime_error("empty text corpus: " + path.string());
  int32_t max_label = 0;
  for (const TextRow& r : corpus.rows) max_label = std::max(max_label, r.label);
  corpus.class_count = max_label + 1;
  return corpus;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Vocab build_vocab(const std::vector<std::string>& texts, int min_freq) {
  std::map<std::string, int64_t> freq;  // ordered map keeps ties deterministic
  for (const std::string& t : texts)
    for (const std::string& tok : tokenize(t)) ++freq[tok];
  std::vector<std::pair<std::string, int64_t>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, count] : entries)
    if (count >= min_freq) v.add(tok);
  return v;
}

std::vector<int32_t> encode(const Vocab& vocab, const std::string& text) {
  std::vector<int32_t> ids;
  for (const std::string& tok : tokenize(text)) ids.push_back(vocab.lookup(tok));
  return ids;
}

Dataset encode_corpus(const TextCorpus& corpus, const Vocab& vocab) {
  Dataset ds;
  ds.modality = Modality::nlp;
  ds.class_count = corpus.class_count;
  ds.examples.reserve(corpus.rows.size());
  for (const TextRow& row : corpus.rows) {
    Example ex;
    ex.label = row.label;
    ex.tokens = encode(vocab, row.text);
    if (ex.tokens.empty()) ex.tokens.push_back(0);
    ds.examples.push_back(std::move(ex));
  }
  ds.rebuild_index();
  return ds;
}

std::vector<TaskSpec> split_tasks(const Dataset& train, const Dataset& test,
                                  int classes_per_task) {
  if (classes_per_task <= 0) throw std::invalid_argument("classes_per_task");
  if (train.class_count != test.class_count)
    throw std::invalid_argument("train/test class counts differ");
  if (train.class_count % classes_per_task != 0)
    throw std::invalid_argument(
        std::to_string(train.class_count) + " classes not divisible into " +
        std::to_string(classes_per_task) + "-class tasks");
  const int n_tasks = train.class_count / classes_per_task;
  std::vector<TaskSpec> tasks(static_cast<size_t>(n_tasks));
  for (int t = 0; t < n_tasks; ++t) {
    TaskSpec& task = tasks[static_cast<size_t>(t)];
    task.task_id = t + 1;
    for (int c = 0; c < classes_per_task; ++c)
      task.classes.push_back(t * classes_per_task + c);
    for (const Example& ex : train.examples)
      if (std::find(task.classes.begin(), task.classes.end(), ex.label) !=
          task.classes.end())
        task.train.push_back(ex);
    for (const Example& ex : test.examples)
      if (std::find(task.classes.begin(), task.classes.end(), ex.label) !=
          task.classes.end())
        task.test.push_back(ex);
  }
  return tasks;
}

Dataset subsample(const Dataset& dataset, size_t per_class, Rng& rng) {
  Dataset out;
  out.modality = dataset.modality;
  out.class_count = dataset.class_count;
  for (int32_t c = 0; c < dataset.class_count; ++c) {
    const auto& idx = dataset.per_class[static_cast<size_t>(c)];
    if (idx.size() < per_class)
      throw std::runtime_error("class " + std::to_string(c) + " has only " +
                               std::to_string(idx.size()) + " examples, " +
                               std::to_string(per_class) + " requested");
    std::vector<size_t> order = rng.permutation(idx.size());
    for (size_t i = 0; i < per_class; ++i)
      out.examples.push_back(dataset.examples[idx[order[i]]]);
  }
  out.rebuild_index();
  return out;
}

namespace {

Batch assemble_batch(const std::vector<Example>& examples,
                     const std::vector<size_t>& indices, Modality modality) {
  Batch b;
  b.modality = modality;
  b.size = indices.size();
  if (modality == Modality::cv) {
    std::vector<double> flat;
    flat.reserve(indices.size() * 784);
    for (size_t i : indices) {
      const auto& px = examples[i].pixels;
      flat.insert(flat.end(), px.begin(), px.end());
    }
    const size_t hw = indices.empty()
                          ? 28
                          : static_cast<size_t>(std::sqrt(
                                static_cast<double>(examples[indices[0]].pixels.size())));
    b.images = Tensor::from({indices.size(), 1, hw, hw}, std::move(flat));
  } else {
    b.offsets.push_back(0);
    for (size_t i : indices) {
      const auto& toks = examples[i].tokens;
      b.tokens.insert(b.tokens.end(), toks.begin(), toks.end());
      b.offsets.push_back(b.tokens.size());
    }
  }
  return b;
}

}  // namespace

Batch make_batch(const std::vector<Example>& examples,
                 const std::vector<size_t>& indices, Modality modality,
                 const TaskSpec& task) {
  Batch b = assemble_batch(examples, indices, modality);
  b.labels.reserve(indices.size());
  for (size_t i : indices) b.labels.push_back(task.local_label(examples[i].label));
  return b;
}

Batch make_batch_global(const std::vector<Example>& examples,
                        const std::vector<size_t>& indices, Modality modality) {
  Batch b = assemble_batch(examples, indices, modality);
  b.labels.reserve(indices.size());
  for (size_t i : indices) b.labels.push_back(examples[i].label);
  return b;
}

std::vector<std::vector<size_t>> batch_indices(size_t count, size_t batch_size,
                                               Rng& rng, bool drop_last) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<size_t> order = rng.permutation(count);
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < count; start += batch_size) {
    const size_t end = std::min(count, start + batch_size);
    if (drop_last && end - start < batch_size) break;
    batches.emplace_back(order.begin() + static_cast<ptrdiff_t>(start),
                         order.begin() + static_cast<ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace mygo
