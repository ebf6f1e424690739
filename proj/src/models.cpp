#include "mygo/models.hpp"

#include <cmath>
#include <stdexcept>

#include "mygo/serialize.hpp"

namespace mygo {

namespace {

Tensor he_normal(std::vector<size_t> shape, size_t fan_in, Rng& rng) {
  return Tensor::randn(std::move(shape), rng,
                       std::sqrt(2.0 / static_cast<double>(fan_in)), true);
}

}  // namespace

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const auto* b = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  return h;
}

Model& Model::operator=(const Model& other) {
  if (this == &other) return *this;
  modality_ = other.modality_;
  arch_ = other.arch_;
  conv1_w_ = other.conv1_w_.clone();
  conv1_b_ = other.conv1_b_.clone();
  conv2_w_ = other.conv2_w_.clone();
  conv2_b_ = other.conv2_b_.clone();
  embed_ = other.embed_.clone();
  fc_w_ = other.fc_w_.clone();
  fc_b_ = other.fc_b_.clone();
  heads_.clear();
  for (const HeadSlot& h : other.heads_)
    heads_.push_back(
        {h.task_id, h.n_classes, h.weight.clone(), h.bias.clone()});
  return *this;
}

Model Model::init(Modality modality, const ArchConfig& cfg, Rng& rng) {
  Model m;
  m.modality_ = modality;
  m.arch_ = cfg;
  if (cfg.feature_dim == 0) throw std::invalid_argument("feature_dim");
  if (modality == Modality::cv) {
    if (cfg.image_hw % 4 != 0)
      throw std::invalid_argument("image_hw must be divisible by 4");
    const size_t c1 = cfg.conv1_channels, c2 = cfg.conv2_channels;
    if (c1 == 0 || c2 == 0) throw std::invalid_argument("conv widths");
    m.conv1_w_ = he_normal({c1, 1, 3, 3}, 9, rng);
    m.conv1_b_ = Tensor::zeros({c1}, true);
    m.conv2_w_ = he_normal({c2, c1, 3, 3}, c1 * 9, rng);
    m.conv2_b_ = Tensor::zeros({c2}, true);
    const size_t flat = c2 * (cfg.image_hw / 4) * (cfg.image_hw / 4);
    m.fc_w_ = he_normal({flat, cfg.feature_dim}, flat, rng);
    m.fc_b_ = Tensor::zeros({cfg.feature_dim}, true);
  } else {
    if (cfg.vocab_size == 0) throw std::invalid_argument("vocab_size");
    if (cfg.embed_dim == 0) throw std::invalid_argument("embed_dim");
    m.embed_ = Tensor::randn({cfg.vocab_size, cfg.embed_dim}, rng, 0.1, true);
    m.fc_w_ = he_normal({cfg.embed_dim, cfg.feature_dim}, cfg.embed_dim, rng);
    m.fc_b_ = Tensor::zeros({cfg.feature_dim}, true);
  }
  return m;
}

bool Model::has_head(int32_t task_id) const {
  for (const HeadSlot& h : heads_)
    if (h.task_id == task_id) return true;
  return false;
}

size_t Model::head_classes(int32_t task_id) const {
  return head(task_id).n_classes;
}

std::vector<int32_t> Model::head_task_ids() const {
  std::vector<int32_t> ids;
  ids.reserve(heads_.size());
  for (const HeadSlot& h : heads_) ids.push_back(h.task_id);
  return ids;
}

int32_t Model::newest_task_id() const {
  if (heads_.empty()) throw std::logic_error("model has no heads");
  return heads_.back().task_id;
}

size_t Model::total_head_outputs() const {
  size_t n = 0;
  for (const HeadSlot& h : heads_) n += h.n_classes;
  return n;
}

const Model::HeadSlot& Model::head(int32_t task_id) const {
  for (const HeadSlot& h : heads_)
    if (h.task_id == task_id) return h;
  throw std::out_of_range("unknown task head " + std::to_string(task_id));
}

Model::HeadSlot& Model::head(int32_t task_id) {
  for (HeadSlot& h : heads_)
    if (h.task_id == task_id) return h;
  throw std::out_of_range("unknown task head " + std::to_string(task_id));
}

void Model::add_head(int32_t task_id, size_t n_classes, Rng& rng) {
  if (has_head(task_id))
    throw std::invalid_argument("duplicate task head " + std::to_string(task_id));
  if (n_classes == 0) throw std::invalid_argument("n_classes");
  HeadSlot h;
  h.task_id = task_id;
  h.n_classes = n_classes;
  h.weight = Tensor::randn({arch_.feature_dim, n_classes}, rng, 0.02, true);
  h.bias = Tensor::zeros({n_classes}, true);
  heads_.push_back(std::move(h));
}

void Model::reinit_head(int32_t task_id, Rng& rng) {
  HeadSlot& h = head(task_id);
  Tensor w = Tensor::randn({arch_.feature_dim, h.n_classes}, rng, 0.02, true);
  std::copy(w.data().begin(), w.data().end(), h.weight.data().begin());
  std::fill(h.bias.data().begin(), h.bias.data().end(), 0.0);
}

HeadState Model::snapshot_head(int32_t task_id) const {
  const HeadSlot& h = head(task_id);
  return {task_id, h.weight.detached(), h.bias.detached()};
}

void Model::install_head(const HeadState& state) {
  HeadSlot& h = head(state.task_id);
  if (state.weight.shape() != h.weight.shape() ||
      state.bias.shape() != h.bias.shape())
    throw std::invalid_argument("head state shape mismatch for task " +
                                std::to_string(state.task_id));
  std::copy(state.weight.data().begin(), state.weight.data().end(),
            h.weight.data().begin());
  std::copy(state.bias.data().begin(), state.bias.data().end(),
            h.bias.data().begin());
}

Tensor Model::forward_features(const Batch& batch) const {
  if (batch.modality != modality_)
    throw std::invalid_argument("batch modality does not match model");
  if (modality_ == Modality::cv) {
    const Tensor& x = batch.images;
    if (x.rank() != 4 || x.shape()[1] != 1 || x.shape()[2] != arch_.image_hw ||
        x.shape()[3] != arch_.image_hw)
      throw std::invalid_argument("cv batch must be [N,1,hw,hw]");
    Tensor h = relu(add_channel_bias(conv2d(x, conv1_w_, 1, 1), conv1_b_));
    h = max_pool2(h);
    h = relu(add_channel_bias(conv2d(h, conv2_w_, 1, 1), conv2_b_));
    h = max_pool2(h);
    const size_t flat = fc_w_.shape()[0];
    h = reshape(h, {h.shape()[0], flat});
    return relu(add_bias(matmul(h, fc_w_), fc_b_));
  }
  return forward_trunk_tail(pooled_embedding(batch));
}

Tensor Model::pooled_embedding(const Batch& batch) const {
  if (modality_ != Modality::nlp)
    throw std::logic_error("pooled_embedding is nlp-only");
  if (batch.modality != Modality::nlp)
    throw std::invalid_argument("batch modality does not match model");
  return embedding_mean(embed_, batch.tokens, batch.offsets);
}

Tensor Model::forward_head(int32_t task_id, const Tensor& features) const {
  const HeadSlot& h = head(task_id);
  return add_bias(matmul(features, h.weight), h.bias);
}

Tensor Model::forward_all_heads(const Tensor& features) const {
  if (heads_.empty()) throw std::logic_error("model has no heads");
  std::vector<Tensor> parts;
  parts.reserve(heads_.size());
  for (const HeadSlot& h : heads_)
    parts.push_back(add_bias(matmul(features, h.weight), h.bias));
  return concat_cols(parts);
}

Tensor Model::forward_from_features(const Tensor& pooled) const {
  if (modality_ != Modality::nlp)
    throw std::logic_error("forward_from_features applies to nlp models only");
  if (pooled.rank() != 2 || pooled.shape()[1] != arch_.embed_dim)
    throw std::invalid_argument("expected [N," +
                                std::to_string(arch_.embed_dim) +
                                "] feature batch");
  return forward_all_heads(forward_trunk_tail(pooled));
}

std::vector<Tensor> Model::extractor_params() const {
  std::vector<Tensor> p;
  if (modality_ == Modality::cv)
    p = {conv1_w_, conv1_b_, conv2_w_, conv2_b_, fc_w_, fc_b_};
  else
    p = {embed_, fc_w_, fc_b_};
  return p;
}

std::vector<Tensor> Model::trunk_params() const {
  if (modality_ == Modality::cv) return extractor_params();
  return {fc_w_, fc_b_};
}

std::vector<Tensor> Model::head_params(int32_t task_id) const {
  const HeadSlot& h = head(task_id);
  return {h.weight, h.bias};
}

std::vector<Tensor> Model::all_head_params() const {
  std::vector<Tensor> p;
  for (const HeadSlot& h : heads_) {
    p.push_back(h.weight);
    p.push_back(h.bias);
  }
  return p;
}

std::vector<Tensor> Model::all_params() const {
  std::vector<Tensor> p = extractor_params();
  for (const Tensor& t : all_head_params()) p.push_back(t);
  return p;
}

void Model::set_extractor_trainable(bool on) {
  for (Tensor t : extractor_params()) t.set_requires_grad(on);
}

void Model::set_trainable(bool on) {
  for (Tensor t : all_params()) t.set_requires_grad(on);
}

uint64_t Model::extractor_hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const Tensor& t : extractor_params())
    h = fnv1a(t.data().data(), t.size() * sizeof(double), h);
  return h;
}

size_t Model::param_count() const {
  size_t n = 0;
  for (const Tensor& t : all_params()) n += t.size();
  return n;
}

namespace {

// Internal trunk tail shared by the nlp paths; defined as a member below.

}  // namespace

Tensor Model::forward_trunk_tail(const Tensor& pooled) const {
  return relu(add_bias(matmul(pooled, fc_w_), fc_b_));
}

// ---- persistence ----

void Model::save(const std::filesystem::path& path) const {
  ByteWriter w;
  write_container_header(w, ContainerKind::model);
  w.u8(modality_ == Modality::cv ? 0 : 1);
  w.u32(static_cast<uint32_t>(arch_.feature_dim));
  w.u32(static_cast<uint32_t>(arch_.embed_dim));
  w.u32(static_cast<uint32_t>(arch_.conv1_channels));
  w.u32(static_cast<uint32_t>(arch_.conv2_channels));
  w.u32(static_cast<uint32_t>(arch_.image_hw));
  w.u32(static_cast<uint32_t>(arch_.vocab_size));
  w.u32(static_cast<uint32_t>(heads_.size()));
  for (const HeadSlot& h : heads_) {
    w.i32(h.task_id);
    w.u32(static_cast<uint32_t>(h.n_classes));
  }
  std::vector<NamedTensor> ts;
  if (modality_ == Modality::cv) {
    ts.push_back({"conv1.w", conv1_w_});
    ts.push_back({"conv1.b", conv1_b_});
    ts.push_back({"conv2.w", conv2_w_});
    ts.push_back({"conv2.b", conv2_b_});
  } else {
    ts.push_back({"embed.table", embed_});
  }
  ts.push_back({"fc.w", fc_w_});
  ts.push_back({"fc.b", fc_b_});
  for (const HeadSlot& h : heads_) {
    const std::string prefix = "head." + std::to_string(h.task_id);
    ts.push_back({prefix + ".w", h.weight});
    ts.push_back({prefix + ".b", h.bias});
  }
  write_named_tensors(w, ts);
  write_file(path, w);
}

Model Model::load(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  if (read_container_header(r) != ContainerKind::model)
    throw std::runtime_error("not a model container: " + path.string());
  Model m;
  m.modality_ = r.u8() == 0 ? Modality::cv : Modality::nlp;
  m.arch_.feature_dim = r.u32();
  m.arch_.embed_dim = r.u32();
  m.arch_.conv1_channels = r.u32();
  m.arch_.conv2_channels = r.u32();
  m.arch_.image_hw = r.u32();
  m.arch_.vocab_size = r.u32();
  const uint32_t n_heads = r.u32();
  std::vector<std::pair<int32_t, uint32_t>> head_meta(n_heads);
  for (auto& [id, nc] : head_meta) {
    id = r.i32();
    nc = r.u32();
  }
  std::vector<NamedTensor> ts = read_named_tensors(r);
  auto take = [&ts, &path](const std::string& name) -> Tensor {
    for (NamedTensor& nt : ts)
      if (nt.name == name) {
        Tensor t = nt.tensor;
        t.set_requires_grad(true);
        return t;
      }
    throw std::runtime_error("missing tensor '" + name + "' in " +
                             path.string());
  };
  if (m.modality_ == Modality::cv) {
    m.conv1_w_ = take("conv1.w");
    m.conv1_b_ = take("conv1.b");
    m.conv2_w_ = take("conv2.w");
    m.conv2_b_ = take("conv2.b");
  } else {
    m.embed_ = take("embed.table");
  }
  m.fc_w_ = take("fc.w");
  m.fc_b_ = take("fc.b");
  for (const auto& [id, nc] : head_meta) {
    const std::string prefix = "head." + std::to_string(id);
    HeadSlot h;
    h.task_id = id;
    h.n_classes = nc;
    h.weight = take(prefix + ".w");
    h.bias = take(prefix + ".b");
    m.heads_.push_back(std::move(h));
  }
  return m;
}

Teacher make_teacher(const Model& student, const HeadState& wake_head) {
  if (!student.has_head(wake_head.task_id))
    throw std::invalid_argument("teacher head for unknown task " +
                                std::to_string(wake_head.task_id));
  if (student.newest_task_id() != wake_head.task_id)
    throw std::invalid_argument("wake head must belong to the newest task");
  Teacher t{student};
  t.model.install_head(wake_head);
  t.model.set_trainable(false);
  return t;
}

}  // namespace mygo
