#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wran/encoders.hpp"
#include "wran/keyvalue.hpp"
#include "wran/tensor.hpp"

namespace wran {

// Synthetic relation-extraction corpus. Relations are numbered 1..num_relations
// (0 is NA). Every sentence follows
//
//   [noise prefix] head [filler] trigger [filler] tail [noise suffix]
//
// Vocabulary layout, in id order:
//   entity groups      2 * ceil(R / 2) groups of entities_per_group tokens;
//                      relations 2k+1 and 2k+2 share head group 2k and tail
//                      group 2k+1, so paired relations differ only in cues
//   source triggers    one per relation
//   target synonyms    one per relation, used in the target domain with
//                      probability trigger_swap_rate
//   context tokens     contexts_per_relation per relation, sprinkled into
//                      filler slots with probability context_rate (both domains)
//   shared fillers     filler_tokens ids drawn by both domains
//   target fillers     filler_tokens ids drawn only by the target domain
// A target filler slot is shifted with probability filler_shift; a shifted slot
// reuses a context token with probability polysemy_rate (a source cue word used
// generically in the target) and draws a target filler otherwise. Reused cue
// words come from the outlier relations when there are any, from all relations
// otherwise.
// Remaining ids up to vocab_size are never emitted.
struct CorpusSpec {
  std::size_t vocab_size = 400;
  std::size_t num_relations = 8;
  std::vector<std::size_t> outlier_relations;  // present in source only
  std::size_t source_samples = 250;            // per relation
  std::size_t target_samples = 250;            // per target relation
  double filler_shift = 0.5;
  double polysemy_rate = 0.3;
  double trigger_swap_rate = 0.6;
  double context_rate = 0.3;
  double na_fraction = 0.0;
  std::size_t entities_per_group = 10;
  std::size_t contexts_per_relation = 2;
  std::size_t filler_tokens = 40;
  std::size_t max_len = 16;
  std::uint64_t seed = 1;

  // Throws ContractError for invalid fields, Error when the vocabulary is too
  // small for the requested structure.
  void validate() const;
  std::size_t required_vocab() const;
  std::vector<std::size_t> target_relations() const;

  KeyValues to_keyvalues() const;
  static CorpusSpec from_keyvalues(const KeyValues& kv, const std::string& prefix = "");
};

struct Corpus {
  std::vector<SentenceInstance> source;
  std::vector<SentenceInstance> target;
};

Corpus gen_corpus(const CorpusSpec& spec);

// Planted-geometry knowledge graph. Entities fall into num_groups equal groups
// with one base vector per group; relation r links head group A_r to tail group
// B_r (distinct ordered pairs) and carries offset base[B_r] - base[A_r]. With
// zero noise every positive triple satisfies tail = head + offset exactly.
// Negatives replace the head or tail with an entity outside the required group.
// With mirror_low_resource, the k-th low-resource relation reuses the group
// pair of the k-th high-resource relation (its offset vector is drawn
// separately), so structure learned on rich relations carries over.
// low_resource_drift adds a random vector of that norm to each low-resource
// relation's offset, modelling poorly estimated structural embeddings for rare
// relations.
struct KgSpec {
  std::size_t num_entities = 50;
  std::size_t num_relations = 10;
  std::size_t num_groups = 5;
  std::size_t triples_per_relation = 40;
  std::vector<std::size_t> low_resource_relations = {7, 8, 9};
  std::size_t low_resource_triples = 10;
  std::size_t negative_ratio = 1;
  std::size_t structural_dim = 8;
  double noise = 0.1;
  bool mirror_low_resource = true;
  double low_resource_drift = 4.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool is_low_resource(std::size_t relation) const;
  KeyValues to_keyvalues() const;
  static KgSpec from_keyvalues(const KeyValues& kv, const std::string& prefix = "");
};

struct KnowledgeGraph {
  std::vector<TripleInstance> triples;   // structural_input = [s_h, s_r, s_t]
  Tensor entity_vectors;                 // num_entities x structural_dim
  Tensor relation_vectors;               // num_relations x structural_dim
  std::vector<std::size_t> entity_group;
  std::vector<std::pair<std::size_t, std::size_t>> relation_groups;  // (A_r, B_r)
};

KnowledgeGraph gen_kg(const KgSpec& spec);

// Attaches [s_h, s_r, s_t] to each triple.
void attach_structural(std::vector<TripleInstance>& triples, const Tensor& entity_vectors,
                       const Tensor& relation_vectors);

// Keeps instances whose relation is in `keep`. The remap table sends each kept
// relation id to a dense id (NA stays 0); labels in `instances` are unchanged.
struct PartialSplit {
  std::vector<SentenceInstance> instances;
  std::map<std::size_t, std::size_t> remap;
};
PartialSplit make_partial_split(std::span<const SentenceInstance> dataset,
                                std::span<const std::size_t> keep);

// Deterministic split: every instance lands in exactly one side, `fraction` of
// the instances (rounded down) on the second.
template <typename Instance>
struct Split {
  std::vector<Instance> first;
  std::vector<Instance> second;
};
Split<SentenceInstance> split_instances(std::span<const SentenceInstance> data, double fraction,
                                        std::uint64_t seed);
Split<TripleInstance> split_instances(std::span<const TripleInstance> data, double fraction,
                                      std::uint64_t seed);

// One sentence per line: tokens <TAB> head span <TAB> tail span <TAB> relation,
// spans as "begin end", relation "-" when unlabeled.
void write_sentences(std::ostream& out, std::span<const SentenceInstance> data);
std::vector<SentenceInstance> read_sentences(std::istream& in);
// head <TAB> relation <TAB> tail <TAB> label (1, 0 or "-").
void write_triples(std::ostream& out, std::span<const TripleInstance> data);
std::vector<TripleInstance> read_triples(std::istream& in);
// "entity <id> v..." and "relation <id> v..." lines.
void write_structural(std::ostream& out, const Tensor& entity_vectors, const Tensor& relation_vectors);
std::pair<Tensor, Tensor> read_structural(std::istream& in);

void save_sentences(const std::string& path, std::span<const SentenceInstance> data);
std::vector<SentenceInstance> load_sentences(const std::string& path);
void save_triples(const std::string& path, std::span<const TripleInstance> data);
std::vector<TripleInstance> load_triples(const std::string& path);

}  // namespace wran
