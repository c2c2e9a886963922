#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wran/adversary.hpp"
#include "wran/encoders.hpp"
#include "wran/keyvalue.hpp"
#include "wran/param_store.hpp"
#include "wran/semantic_transfer.hpp"
#include "wran/weighting.hpp"

namespace wran {

// Phi(p) = 2u / (1 + exp(-a p)) - u. Throws ContractError for p outside [0, 1].
double schedule_phi(double p, double u, double a);

// Zeroes (and cuts the gradient of) every row of an n x 1 loss column whose
// label is NA.
Var mask_na_loss(Tape& tape, Var per_instance, std::span<const std::size_t> labels);
// Mean of the non-NA rows of an n x 1 loss column; constant 0 when none remain.
Var masked_mean(Tape& tape, Var per_instance, std::span<const std::size_t> labels);

struct TrainConfig {
  double learning_rate = 1e-3;
  double target_lr = 1e-3;  // F_t step size in stages 3-4; discriminators use learning_rate
  std::size_t batch_size = 128;
  std::size_t epochs_source = 30;
  std::size_t epochs_weights = 10;  // stage 3 adversarial pre-training of F_t and D_a
  std::size_t epochs_adapt = 10;
  double u = 0.1;
  double schedule_alpha = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double sm_coeff = 0.1;
  double zeta = 0.7;
  double dropout = 0.5;
  std::size_t gate_steps = 50;
  double gate_lr = 1e-3;
  bool per_class_alpha = false;
  std::size_t fine_tune_epochs = 10;

  void validate() const;
  KeyValues to_keyvalues() const;
  static TrainConfig from_keyvalues(const KeyValues& kv, const std::string& prefix = "");
};

// Which weight components stage 4 consumes. All flags set is the full model;
// clearing both relation and instance gives unit weights (plain adversarial
// adaptation).
struct WeightingOptions {
  bool relation = true;
  bool instance = true;
  bool gate = true;
  double fixed_alpha = 0.5;  // used when gate is off

  std::string name() const;
};

// Per-source-instance weights for stage 4 derived from a frozen table.
std::vector<double> effective_weights(const WeightTable& table, const WeightingOptions& opt,
                                      std::span<const std::size_t> source_labels);

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  // Applies one update to each named parameter from its accumulated gradient.
  void step(ParamStore& params, std::span<const std::string> names);
  double learning_rate() const { return lr_; }

 private:
  struct Moments {
    Tensor m, v;
    std::size_t t = 0;
  };
  double lr_, beta1_, beta2_, eps_;
  std::map<std::string, Moments> moments_;
};

// Completed-stage marker; each stage requires its predecessor.
enum class Stage { kNone = 0, kPretrained = 1, kRelationWeights = 2, kInstanceWeights = 3, kAdapted = 4, kDone = 5 };
const char* stage_name(Stage s);

// Parameter prefixes inside the single store.
inline constexpr const char* kSourceEncoder = "fs.";
inline constexpr const char* kClassifier = "c.";
inline constexpr const char* kTargetEncoder = "ft.";
inline constexpr const char* kAuxDiscriminator = "da.";
inline constexpr const char* kRelDiscriminator = "dr.";
inline constexpr const char* kGate = "gate.";
inline constexpr const char* kTargetHead = "ct.";

struct TrainState {
  Stage stage = Stage::kNone;
  ParamStore params;
  WeightTable weights;
  CentroidBank bank;
  double progress = 0.0;
  std::size_t step = 0;
  std::vector<double> lambdas;   // lambda used at each stage-4 step
  double source_accuracy = 0.0;  // stage-1 training accuracy
  bool has_target_head = false;
};

// Staged trainer for one instance type (sentences or triples). Labels are
// relation ids for sentences (NA masked) and 0/1 for triples.
template <typename Instance>
class Trainer {
 public:
  Trainer(EncoderConfig encoder, std::size_t num_classes, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const EncoderConfig& encoder_config() const { return enc_; }
  std::size_t num_classes() const { return num_classes_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }
  Stage stage() const { return state_.stage; }

  const InstanceEncoder& source_encoder() const { return fs_; }
  const InstanceEncoder& target_encoder() const { return ft_; }
  const RelationClassifier& classifier() const { return c_; }

  // Stage 1: trains F_s and C; returns the training accuracy.
  double stage1_pretrain_source(std::span<const Instance> source);
  // Stage 2: relation weights from C(F_s(x)) over the target data.
  const std::vector<double>& stage2_relation_weights(std::span<const Instance> target);
  // Stage 3: adversarial pre-training of F_t (copied from F_s) against D_a,
  // instance weights, gate training, fused weights; freezes the table.
  const WeightTable& stage3_instance_weights(std::span<const Instance> source,
                                             std::span<const Instance> target);
  // Stage 4: re-initializes F_t from F_s and adapts it against D_r with the
  // weighted loss, lambda following schedule_phi.
  void stage4_adversarial_adapt(std::span<const Instance> source, std::span<const Instance> target,
                                const WeightingOptions& opt = {});
  // Supervised adaptation: continues training F_t with a fresh head on
  // labeled target data. Requires stage 4.
  void fine_tune(std::span<const Instance> labeled_target);
  void finish();

  // Class probabilities of C(F_s(x)).
  Tensor predict_source_only(std::span<const Instance> data);
  // Class probabilities of the adapted model (fine-tuned head when present).
  Tensor predict(std::span<const Instance> data);

  // Restores a trainer from stored parameters and stage marker.
  void restore(TrainState state);

  // Called after every stage-4 epoch with the epoch index (monitoring only).
  void on_adapt_epoch(std::function<void(std::size_t)> fn) { on_epoch_ = std::move(fn); }

 private:
  void require(Stage s, const char* op) const;
  Tensor source_features(std::span<const Instance> data);
  std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) const;
  void adversarial_loop(std::span<const Instance> source, std::span<const Instance> target,
                        const Discriminator& d, std::span<const double> weights, std::size_t epochs,
                        bool record, bool semantic, std::uint64_t salt);

  EncoderConfig enc_;
  std::size_t num_classes_;
  TrainConfig cfg_;
  bool mask_na_;
  InstanceEncoder fs_, ft_;
  RelationClassifier c_, ct_;
  Discriminator da_, dr_;
  TrainState state_;
  Tensor source_cache_;
  std::function<void(std::size_t)> on_epoch_;
};

extern template class Trainer<SentenceInstance>;
extern template class Trainer<TripleInstance>;

// Checkpoint: "WRANCKPT" magic, u64 record count, then per record u64 name
// length, name bytes, u64 rank, u64 extents, raw little-endian doubles.
void write_params(std::ostream& out, const ParamStore& params);
ParamStore read_params(std::istream& in);
void save_params(const std::string& path, const ParamStore& params);
ParamStore load_params(const std::string& path);

// Run manifest: key=value lines (config echo, stage log, final metrics).
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) { kv_.set(key, value); }
  void set_real(const std::string& key, double value);
  void merge(const KeyValues& kv, const std::string& prefix);
  void stage_done(const std::string& stage);
  const KeyValues& values() const { return kv_; }
  void save(const std::string& path) const;

 private:
  KeyValues kv_;
  std::size_t stages_ = 0;
};

}  // namespace wran
