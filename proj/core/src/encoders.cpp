#include "wran/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "wran/error.hpp"

namespace wran {
namespace {

constexpr double kEmbeddingInit = 0.05;

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

void SentenceInstance::validate() const {
  if (tokens.empty()) throw ContractError("sentence must contain at least one token");
  const std::size_t n = tokens.size();
  for (const Span* s : {&head, &tail}) {
    if (s->begin >= s->end || s->end > n) {
      throw ContractError("entity span [" + std::to_string(s->begin) + "," +
                          std::to_string(s->end) + ") outside sentence of length " +
                          std::to_string(n));
    }
  }
  if (head.begin < tail.end && tail.begin < head.end) {
    throw ContractError("head and tail spans overlap");
  }
}

void EncoderConfig::validate() const {
  if (kernel % 2 == 0) throw ContractError("kernel size must be odd");
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("dropout must be in [0, 1)");
  if (arch == Architecture::kTriple) {
    if (num_entities == 0 || num_relations == 0 || embed_dim == 0 || hidden == 0) {
      throw ContractError("triple encoder needs entity/relation catalogs and widths");
    }
    return;
  }
  if (channels == 0) throw ContractError("channels must be at least 1");
  if (vocab_size == 0 || word_dim == 0) throw ContractError("sentence encoder needs a vocabulary");
  if (max_len == 0) throw ContractError("max_len must be positive");
}

std::size_t EncoderConfig::feature_width() const {
  switch (arch) {
    case Architecture::kCnn: return channels;
    case Architecture::kPcnn: return 3 * channels;
    case Architecture::kTriple: return hidden;
  }
  return 0;
}

std::size_t position_bucket(std::ptrdiff_t offset, std::size_t max_len) {
  const auto m = static_cast<std::ptrdiff_t>(max_len);
  return static_cast<std::size_t>(std::clamp(offset, -m, m) + m);
}

InstanceEncoder::InstanceEncoder(EncoderConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  cfg_.validate();
}

void InstanceEncoder::init(ParamStore& params, Rng& rng) const {
  if (cfg_.arch == Architecture::kTriple) {
    params.add_uniform(name("entity"), {cfg_.num_entities, cfg_.embed_dim}, kEmbeddingInit, rng);
    params.add_uniform(name("relation"), {cfg_.num_relations, cfg_.embed_dim}, kEmbeddingInit, rng);
    const std::size_t in = 3 * cfg_.embed_dim + cfg_.structural_dim;
    params.add_uniform(name("hidden_w"), {in, cfg_.hidden}, glorot(in, cfg_.hidden), rng);
    params.add_zeros(name("hidden_b"), {1, cfg_.hidden});
    return;
  }
  params.add_uniform(name("word"), {cfg_.vocab_size, cfg_.word_dim}, kEmbeddingInit, rng);
  if (cfg_.pos_dim > 0) {
    params.add_uniform(name("pos_head"), {cfg_.position_buckets(), cfg_.pos_dim}, kEmbeddingInit, rng);
    params.add_uniform(name("pos_tail"), {cfg_.position_buckets(), cfg_.pos_dim}, kEmbeddingInit, rng);
  }
  const std::size_t fan_in = cfg_.kernel * cfg_.row_width();
  params.add_uniform(name("conv_w"), {fan_in, cfg_.channels}, glorot(fan_in, cfg_.channels), rng);
  params.add_zeros(name("conv_b"), {1, cfg_.channels});
}

std::vector<std::string> InstanceEncoder::param_names() const {
  if (cfg_.arch == Architecture::kTriple) {
    return {name("entity"), name("relation"), name("hidden_w"), name("hidden_b")};
  }
  std::vector<std::string> out = {name("word")};
  if (cfg_.pos_dim > 0) {
    out.push_back(name("pos_head"));
    out.push_back(name("pos_tail"));
  }
  out.push_back(name("conv_w"));
  out.push_back(name("conv_b"));
  return out;
}

Var InstanceEncoder::activate(Tape& tape, Var x) const {
  return cfg_.activation == Activation::kTanh ? tape.tanh(x) : tape.relu(x);
}

Var InstanceEncoder::embed_sentence(Tape& tape, ParamStore& params, const SentenceInstance& inst,
                                    const EncodeOptions& opt) const {
  inst.validate();
  for (std::size_t id : inst.tokens) {
    if (id >= cfg_.vocab_size) {
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(cfg_.vocab_size));
    }
  }
  const std::size_t len = std::min(inst.tokens.size(), cfg_.max_len);
  const std::span<const std::size_t> ids(inst.tokens.data(), len);
  Var words = tape.embedding(tape.param(params, name("word"), opt.trainable), ids);
  if (cfg_.pos_dim == 0) return words;
  std::vector<std::size_t> head_pos(len);
  std::vector<std::size_t> tail_pos(len);
  for (std::size_t i = 0; i < len; ++i) {
    const auto t = static_cast<std::ptrdiff_t>(i);
    head_pos[i] = position_bucket(t - static_cast<std::ptrdiff_t>(inst.head.begin), cfg_.max_len);
    tail_pos[i] = position_bucket(t - static_cast<std::ptrdiff_t>(inst.tail.begin), cfg_.max_len);
  }
  Var ph = tape.embedding(tape.param(params, name("pos_head"), opt.trainable), head_pos);
  Var pt = tape.embedding(tape.param(params, name("pos_tail"), opt.trainable), tail_pos);
  return tape.concat_cols(std::vector<Var>{words, ph, pt});
}

Var InstanceEncoder::cnn_encode(Tape& tape, ParamStore& params, Var matrix,
                                const EncodeOptions& opt) const {
  if (tape.value(matrix).cols() != cfg_.row_width()) {
    throw ShapeError("cnn_encode: input width " + std::to_string(tape.value(matrix).cols()) +
                     " does not match configured " + std::to_string(cfg_.row_width()));
  }
  Var conv = tape.conv1d(matrix, tape.param(params, name("conv_w"), opt.trainable),
                         tape.param(params, name("conv_b"), opt.trainable), cfg_.kernel);
  Var out = activate(tape, tape.max_pool(conv));
  return opt.dropout_rng ? tape.dropout(out, cfg_.dropout, *opt.dropout_rng) : out;
}

Var InstanceEncoder::pcnn_encode(Tape& tape, ParamStore& params, Var matrix, std::size_t head_pos,
                                 std::size_t tail_pos, const EncodeOptions& opt) const {
  if (tape.value(matrix).cols() != cfg_.row_width()) {
    throw ShapeError("pcnn_encode: input width " + std::to_string(tape.value(matrix).cols()) +
                     " does not match configured " + std::to_string(cfg_.row_width()));
  }
  Var conv = tape.conv1d(matrix, tape.param(params, name("conv_w"), opt.trainable),
                         tape.param(params, name("conv_b"), opt.trainable), cfg_.kernel);
  Var out = activate(tape, tape.piecewise_max_pool(conv, std::min(head_pos, tail_pos),
                                                    std::max(head_pos, tail_pos)));
  return opt.dropout_rng ? tape.dropout(out, cfg_.dropout, *opt.dropout_rng) : out;
}

Var InstanceEncoder::encode_triple(Tape& tape, ParamStore& params, const TripleInstance& triple,
                                   const EncodeOptions& opt) const {
  if (cfg_.arch != Architecture::kTriple) throw ContractError("encoder is not a triple encoder");
  if (triple.head >= cfg_.num_entities || triple.tail >= cfg_.num_entities) {
    throw ShapeError("entity id out of range");
  }
  if (triple.relation >= cfg_.num_relations) throw ShapeError("relation id out of range");
  Var ents = tape.param(params, name("entity"), opt.trainable);
  const std::size_t h = triple.head;
  const std::size_t t = triple.tail;
  const std::size_t r = triple.relation;
  std::vector<Var> parts = {
      tape.embedding(ents, std::span(&h, 1)),
      tape.embedding(tape.param(params, name("relation"), opt.trainable), std::span(&r, 1)),
      tape.embedding(ents, std::span(&t, 1)),
  };
  if (cfg_.structural_dim > 0) {
    if (!triple.structural_input || triple.structural_input->size() != cfg_.structural_dim) {
      throw ShapeError("triple structural input missing or of wrong width");
    }
    parts.push_back(tape.constant(Tensor::row(*triple.structural_input)));
  }
  Var x = tape.concat_cols(parts);
  Var out = activate(tape, tape.affine(x, tape.param(params, name("hidden_w"), opt.trainable),
                                       tape.param(params, name("hidden_b"), opt.trainable)));
  return opt.dropout_rng ? tape.dropout(out, cfg_.dropout, *opt.dropout_rng) : out;
}

Var InstanceEncoder::encode(Tape& tape, ParamStore& params, const SentenceInstance& inst,
                            const EncodeOptions& opt) const {
  Var matrix = embed_sentence(tape, params, inst, opt);
  switch (cfg_.arch) {
    case Architecture::kCnn: return cnn_encode(tape, params, matrix, opt);
    case Architecture::kPcnn: {
      const std::size_t last = tape.value(matrix).rows() - 1;
      return pcnn_encode(tape, params, matrix, std::min(inst.head.end - 1, last),
                         std::min(inst.tail.end - 1, last), opt);
    }
    case Architecture::kTriple: break;
  }
  throw ContractError("triple encoder cannot encode a sentence");
}

Var InstanceEncoder::encode(Tape& tape, ParamStore& params, const TripleInstance& inst,
                            const EncodeOptions& opt) const {
  return encode_triple(tape, params, inst, opt);
}

RelationClassifier::RelationClassifier(std::size_t input_width, std::size_t num_classes,
                                       std::string prefix)
    : input_width_(input_width), num_classes_(num_classes), prefix_(std::move(prefix)) {
  if (num_classes_ < 2) throw ContractError("classifier needs at least two classes");
}

void RelationClassifier::init(ParamStore& params, Rng& rng) const {
  params.add_uniform(prefix_ + "w", {input_width_, num_classes_}, glorot(input_width_, num_classes_),
                     rng);
  params.add_zeros(prefix_ + "b", {1, num_classes_});
}

std::vector<std::string> RelationClassifier::param_names() const {
  return {prefix_ + "w", prefix_ + "b"};
}

Var RelationClassifier::logits(Tape& tape, ParamStore& params, Var features, bool trainable) const {
  if (tape.value(features).cols() != input_width_) {
    throw ShapeError("classifier expects width " + std::to_string(input_width_) + ", got " +
                     std::to_string(tape.value(features).cols()));
  }
  return tape.affine(features, tape.param(params, prefix_ + "w", trainable),
                     tape.param(params, prefix_ + "b", trainable));
}

Var RelationClassifier::classify(Tape& tape, ParamStore& params, Var features, bool trainable) const {
  return tape.softmax(logits(tape, params, features, trainable));
}

Tensor RelationClassifier::probabilities(ParamStore& params, const Tensor& features) const {
  Tape tape;
  return tape.value(classify(tape, params, tape.constant(features), false));
}

Var source_loss(Tape& tape, ParamStore& params, const RelationClassifier& classifier, Var features,
                std::span<const std::size_t> labels, bool mask_na) {
  if (labels.size() != tape.value(features).rows()) {
    throw ShapeError("source_loss: one label per feature row required");
  }
  std::vector<std::size_t> rows;
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mask_na && labels[i] == kNaRelation) continue;
    rows.push_back(i);
    gold.push_back(labels[i]);
  }
  if (rows.empty()) return tape.constant(Tensor::scalar(0.0));
  Var kept = rows.size() == labels.size() ? features : tape.gather_rows(features, rows);
  Var logp = tape.log_softmax(classifier.logits(tape, params, kept));
  return tape.scale(tape.mean(tape.pick(logp, gold)), -1.0);
}

std::vector<std::size_t> labels_of(std::span<const SentenceInstance> batch) {
  std::vector<std::size_t> out;
  out.reserve(batch.size());
  for (const auto& inst : batch) {
    if (!inst.relation) throw ContractError("unlabeled sentence in a labeled batch");
    out.push_back(*inst.relation);
  }
  return out;
}

std::vector<std::size_t> labels_of(std::span<const TripleInstance> batch) {
  std::vector<std::size_t> out;
  out.reserve(batch.size());
  for (const auto& inst : batch) {
    if (!inst.label) throw ContractError("unlabeled triple in a labeled batch");
    out.push_back(*inst.label ? 1 : 0);
  }
  return out;
}

}  // namespace wran
