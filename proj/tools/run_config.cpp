#include "run_config.hpp"

#include <cstdlib>

#include "wran/error.hpp"
#include "wran/format.hpp"

namespace wran::cli {
namespace {

const char* arch_name(Architecture a) {
  switch (a) {
    case Architecture::kCnn: return "cnn";
    case Architecture::kPcnn: return "pcnn";
    case Architecture::kTriple: return "triple";
  }
  return "?";
}

Architecture parse_arch(const std::string& s) {
  if (s == "cnn") return Architecture::kCnn;
  if (s == "pcnn") return Architecture::kPcnn;
  if (s == "triple") return Architecture::kTriple;
  throw ContractError("unknown encoder.arch '" + s + "' (cnn, pcnn, triple)");
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ContractError("unknown encoder.activation '" + s + "' (tanh, relu)");
}

EncoderConfig default_encoder(Mode m) {
  EncoderConfig e;
  if (m == Mode::kRe) {
    e.arch = Architecture::kPcnn;
    e.word_dim = 16;
    e.pos_dim = 2;
    e.kernel = 3;
    e.channels = 16;
  } else {
    e.arch = Architecture::kTriple;
    e.embed_dim = 8;
    e.hidden = 32;
  }
  return e;
}

void apply_assignment(KeyValues& kv, const std::string& a) {
  const auto eq = a.find('=');
  if (eq == std::string::npos || eq == 0) throw ContractError("override '" + a + "' is not key=value");
  kv.set(a.substr(0, eq), a.substr(eq + 1));
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::kRe ? "re" : "kgc"; }

KeyValues encoder_to_keyvalues(const EncoderConfig& e) {
  KeyValues kv;
  kv.set("arch", arch_name(e.arch));
  kv.set("word_dim", std::to_string(e.word_dim));
  kv.set("pos_dim", std::to_string(e.pos_dim));
  kv.set("kernel", std::to_string(e.kernel));
  kv.set("channels", std::to_string(e.channels));
  kv.set("max_len", std::to_string(e.max_len));
  kv.set("activation", e.activation == Activation::kTanh ? "tanh" : "relu");
  kv.set("vocab_size", std::to_string(e.vocab_size));
  kv.set("num_entities", std::to_string(e.num_entities));
  kv.set("num_relations", std::to_string(e.num_relations));
  kv.set("embed_dim", std::to_string(e.embed_dim));
  kv.set("structural_dim", std::to_string(e.structural_dim));
  kv.set("hidden", std::to_string(e.hidden));
  return kv;
}

EncoderConfig encoder_from_keyvalues(const KeyValues& kv, const std::string& p, EncoderConfig e) {
  if (auto a = kv.get(p + "arch")) e.arch = parse_arch(*a);
  if (auto a = kv.get(p + "activation")) e.activation = parse_activation(*a);
  e.word_dim = kv.get_size(p + "word_dim", e.word_dim);
  e.pos_dim = kv.get_size(p + "pos_dim", e.pos_dim);
  e.kernel = kv.get_size(p + "kernel", e.kernel);
  e.channels = kv.get_size(p + "channels", e.channels);
  e.max_len = kv.get_size(p + "max_len", e.max_len);
  e.vocab_size = kv.get_size(p + "vocab_size", e.vocab_size);
  e.num_entities = kv.get_size(p + "num_entities", e.num_entities);
  e.num_relations = kv.get_size(p + "num_relations", e.num_relations);
  e.embed_dim = kv.get_size(p + "embed_dim", e.embed_dim);
  e.structural_dim = kv.get_size(p + "structural_dim", e.structural_dim);
  e.hidden = kv.get_size(p + "hidden", e.hidden);
  return e;
}

RunConfig load_run_config(const Overrides& o) {
  RunConfig c;
  if (o.config_path) c.values = KeyValues::load(*o.config_path);
  if (const char* dir = std::getenv("WRAN_OUT_DIR"); dir && *dir) c.values.set("run.out_dir", dir);
  if (const char* seed = std::getenv("WRAN_SEED"); seed && *seed) c.values.set("run.seed", seed);
  for (const auto& a : o.assignments) apply_assignment(c.values, a);
  if (o.out_dir) c.values.set("run.out_dir", *o.out_dir);
  if (o.seed) c.values.set("run.seed", std::to_string(*o.seed));

  const auto& kv = c.values;
  const std::string mode = kv.get_string("run.mode", "re");
  if (mode == "re") c.mode = Mode::kRe;
  else if (mode == "kgc") c.mode = Mode::kKgc;
  else throw ContractError("run.mode must be 're' or 'kgc', got '" + mode + "'");
  if (!kv.contains("run.seed")) throw ContractError("a seed is required (run.seed, WRAN_SEED or --seed)");
  c.seed = kv.get_u64("run.seed", 0);
  c.out_dir = kv.get_string("run.out_dir", ".");
  c.test_fraction = kv.get_real("run.test_fraction", c.test_fraction);
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    throw ContractError("run.test_fraction must lie in (0, 1)");

  c.corpus = CorpusSpec::from_keyvalues(kv, "corpus.");
  c.corpus.seed = c.seed;
  c.kg = KgSpec::from_keyvalues(kv, "kg.");
  c.kg.seed = c.seed;
  c.train = TrainConfig::from_keyvalues(kv, "train.");
  c.train.seed = c.seed;
  c.train.validate();
  c.encoder = encoder_from_keyvalues(kv, "encoder.", default_encoder(c.mode));
  c.top_k = kv.get_list("eval.top_k", c.top_k);
  c.hits = kv.get_list("eval.hits", c.hits);

  auto& t = c.theory;
  t.samples = kv.get_size("theory.samples", t.samples);
  t.hidden = kv.get_size("theory.hidden", t.hidden);
  t.steps = kv.get_size("theory.steps", t.steps);
  t.learning_rate = kv.get_real("theory.learning_rate", t.learning_rate);
  t.central_lo = kv.get_real("theory.central_lo", t.central_lo);
  t.central_hi = kv.get_real("theory.central_hi", t.central_hi);
  t.central_points = kv.get_size("theory.central_points", t.central_points);
  t.seed = c.seed;
  return c;
}

EncoderConfig sized_encoder(const RunConfig& cfg) {
  EncoderConfig e = cfg.encoder;
  if (cfg.mode == Mode::kRe) {
    if (e.arch == Architecture::kTriple) throw ContractError("relation extraction needs a cnn or pcnn encoder");
    e.vocab_size = cfg.corpus.vocab_size;
    e.max_len = cfg.corpus.max_len;
  } else {
    if (e.arch != Architecture::kTriple) throw ContractError("kgc mode needs the triple encoder");
    e.num_entities = cfg.kg.num_entities;
    e.num_relations = cfg.kg.num_relations;
    e.structural_dim = 3 * cfg.kg.structural_dim;
  }
  e.dropout = cfg.train.dropout;
  e.validate();
  return e;
}

std::size_t num_classes(const RunConfig& cfg) {
  return cfg.mode == Mode::kRe ? cfg.corpus.num_relations + 1 : 2;
}

}  // namespace wran::cli
