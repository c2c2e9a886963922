#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wran/param_store.hpp"
#include "wran/random.hpp"
#include "wran/tape.hpp"

namespace wran {

// Relation id reserved for "no relation".
inline constexpr std::size_t kNaRelation = 0;

// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct SentenceInstance {
  std::vector<std::size_t> tokens;
  Span head;
  Span tail;
  std::optional<std::size_t> relation;

  // Throws ContractError when spans are empty, overlap, or leave the sentence.
  void validate() const;
  friend bool operator==(const SentenceInstance&, const SentenceInstance&) = default;
};

struct TripleInstance {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
  std::optional<std::vector<double>> structural_input;
  std::optional<bool> label;  // true = positive triple
  friend bool operator==(const TripleInstance&, const TripleInstance&) = default;
};

enum class Architecture { kCnn, kPcnn, kTriple };
enum class Activation { kTanh, kRelu };

struct EncoderConfig {
  Architecture arch = Architecture::kPcnn;
  std::size_t word_dim = 300;
  std::size_t pos_dim = 5;
  std::size_t kernel = 3;
  std::size_t channels = 230;
  std::size_t max_len = 100;
  double dropout = 0.5;
  Activation activation = Activation::kTanh;
  std::size_t vocab_size = 0;

  // Triple encoder sizes.
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t embed_dim = 16;
  std::size_t structural_dim = 0;  // width of TripleInstance::structural_input
  std::size_t hidden = 64;

  void validate() const;
  std::size_t feature_width() const;
  std::size_t row_width() const { return word_dim + 2 * pos_dim; }
  std::size_t position_buckets() const { return 2 * max_len + 1; }
};

// Relative offset (token - anchor) clipped to [-max_len, max_len] and shifted
// into [0, 2 * max_len].
std::size_t position_bucket(std::ptrdiff_t offset, std::size_t max_len);

// Options for one forward pass through an encoder.
struct EncodeOptions {
  bool trainable = true;    // accumulate gradients into encoder parameters
  Rng* dropout_rng = nullptr;  // dropout applied only when set
};

// Instance encoder F(x; theta). Parameters live in a ParamStore under
// `prefix`, so F_s and F_t are simply two prefixes over the same layout.
class InstanceEncoder {
 public:
  InstanceEncoder(EncoderConfig cfg, std::string prefix);

  const EncoderConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t feature_width() const { return cfg_.feature_width(); }

  void init(ParamStore& params, Rng& rng) const;
  std::vector<std::string> param_names() const;

  // L x (word_dim + 2 * pos_dim).
  Var embed_sentence(Tape& tape, ParamStore& params, const SentenceInstance& inst,
                     const EncodeOptions& opt = {}) const;
  // 1 x channels.
  Var cnn_encode(Tape& tape, ParamStore& params, Var matrix, const EncodeOptions& opt = {}) const;
  // 1 x 3 * channels. head_pos / tail_pos are the entity end positions.
  Var pcnn_encode(Tape& tape, ParamStore& params, Var matrix, std::size_t head_pos,
                  std::size_t tail_pos, const EncodeOptions& opt = {}) const;
  // 1 x hidden.
  Var encode_triple(Tape& tape, ParamStore& params, const TripleInstance& triple,
                    const EncodeOptions& opt = {}) const;

  Var encode(Tape& tape, ParamStore& params, const SentenceInstance& inst,
             const EncodeOptions& opt = {}) const;
  Var encode(Tape& tape, ParamStore& params, const TripleInstance& inst,
             const EncodeOptions& opt = {}) const;

  // Stacks per-instance features: n x feature_width.
  template <typename Instance>
  Var encode_batch(Tape& tape, ParamStore& params, std::span<const Instance> batch,
                   const EncodeOptions& opt = {}) const {
    std::vector<Var> rows;
    rows.reserve(batch.size());
    for (const auto& inst : batch) rows.push_back(encode(tape, params, inst, opt));
    return tape.stack_rows(rows);
  }

  // Inference-mode features (no dropout, no gradients): n x feature_width.
  template <typename Instance>
  Tensor features(ParamStore& params, std::span<const Instance> batch) const {
    Tensor out = Tensor::matrix(batch.size(), feature_width());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Tape tape;
      const Tensor& f = tape.value(encode(tape, params, batch[i], {.trainable = false}));
      std::copy(f.data().begin(), f.data().end(), out.data().begin() + i * feature_width());
    }
    return out;
  }

 private:
  Var activate(Tape& tape, Var x) const;
  std::string name(const char* part) const { return prefix_ + part; }

  EncoderConfig cfg_;
  std::string prefix_;
};

// Source relation classifier C: softmax(affine(f)).
class RelationClassifier {
 public:
  RelationClassifier(std::size_t input_width, std::size_t num_classes, std::string prefix);

  std::size_t input_width() const { return input_width_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::string& prefix() const { return prefix_; }

  void init(ParamStore& params, Rng& rng) const;
  std::vector<std::string> param_names() const;

  Var logits(Tape& tape, ParamStore& params, Var features, bool trainable = true) const;
  // Row-wise class probabilities.
  Var classify(Tape& tape, ParamStore& params, Var features, bool trainable = true) const;
  // Inference helper over a feature matrix.
  Tensor probabilities(ParamStore& params, const Tensor& features) const;

 private:
  std::size_t input_width_;
  std::size_t num_classes_;
  std::string prefix_;
};

// Mean cross-entropy over `labels`. Rows whose label is NA are excluded when
// `mask_na` is set; a batch with no remaining rows yields the constant 0.
Var source_loss(Tape& tape, ParamStore& params, const RelationClassifier& classifier,
                Var features, std::span<const std::size_t> labels, bool mask_na = true);

// Labels of a batch; throws ContractError when an instance is unlabeled.
std::vector<std::size_t> labels_of(std::span<const SentenceInstance> batch);
std::vector<std::size_t> labels_of(std::span<const TripleInstance> batch);

}  // namespace wran
