#include "wran/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "wran/error.hpp"
#include "wran/format.hpp"
#include "wran/random.hpp"

namespace wran {
namespace {

constexpr std::size_t kLongestSentence = 13;  // 2 + 1 + 3 + 1 + 3 + 1 + 2

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

struct Layout {
  std::size_t groups = 0;
  std::size_t entities = 0;  // first entity id is 0
  std::size_t triggers = 0;
  std::size_t synonyms = 0;
  std::size_t contexts = 0;
  std::size_t shared_fillers = 0;
  std::size_t target_fillers = 0;
  std::size_t end = 0;

  explicit Layout(const CorpusSpec& s) {
    groups = 2 * ((s.num_relations + 1) / 2);
    entities = 0;
    triggers = groups * s.entities_per_group;
    synonyms = triggers + s.num_relations;
    contexts = synonyms + s.num_relations;
    shared_fillers = contexts + s.num_relations * s.contexts_per_relation;
    target_fillers = shared_fillers + s.filler_tokens;
    end = target_fillers + s.filler_tokens;
  }
};

class SentenceMaker {
 public:
  SentenceMaker(const CorpusSpec& spec, bool target, Rng rng)
      : spec_(spec), layout_(spec), target_(target), rng_(rng) {}

  SentenceInstance relation_sentence(std::size_t r) {
    const std::size_t pair = (r - 1) / 2;
    SentenceInstance s;
    noise(s.tokens);
    const std::size_t h = s.tokens.size();
    s.tokens.push_back(entity(2 * pair));
    filler_run(s.tokens, r);
    const bool swap = target_ && rng_.bernoulli(spec_.trigger_swap_rate);
    s.tokens.push_back((swap ? layout_.synonyms : layout_.triggers) + (r - 1));
    filler_run(s.tokens, r);
    const std::size_t t = s.tokens.size();
    s.tokens.push_back(entity(2 * pair + 1));
    noise(s.tokens);
    s.head = {h, h + 1};
    s.tail = {t, t + 1};
    s.relation = r;
    return s;
  }

  SentenceInstance na_sentence() {
    SentenceInstance s;
    noise(s.tokens);
    const std::size_t hg = rng_.below(layout_.groups);
    std::size_t tg = rng_.below(layout_.groups - 1);
    if (tg >= hg) ++tg;
    const std::size_t h = s.tokens.size();
    s.tokens.push_back(entity(hg));
    const std::size_t gap = 3 + rng_.below(5);
    for (std::size_t i = 0; i < gap; ++i) s.tokens.push_back(filler());
    const std::size_t t = s.tokens.size();
    s.tokens.push_back(entity(tg));
    noise(s.tokens);
    s.head = {h, h + 1};
    s.tail = {t, t + 1};
    s.relation = kNaRelation;
    return s;
  }

 private:
  std::size_t entity(std::size_t group) {
    return layout_.entities + group * spec_.entities_per_group + rng_.below(spec_.entities_per_group);
  }

  std::size_t filler() {
    if (target_ && rng_.bernoulli(spec_.filler_shift)) {
      if (spec_.contexts_per_relation > 0 && rng_.bernoulli(spec_.polysemy_rate)) {
        const std::size_t r = spec_.outlier_relations.empty()
                                  ? 1 + rng_.below(spec_.num_relations)
                                  : spec_.outlier_relations[rng_.below(spec_.outlier_relations.size())];
        return layout_.contexts + (r - 1) * spec_.contexts_per_relation + rng_.below(spec_.contexts_per_relation);
      }
      return layout_.target_fillers + rng_.below(spec_.filler_tokens);
    }
    return layout_.shared_fillers + rng_.below(spec_.filler_tokens);
  }

  void noise(std::vector<std::size_t>& out) {
    const std::size_t n = rng_.below(3);
    for (std::size_t i = 0; i < n; ++i) out.push_back(filler());
  }

  void filler_run(std::vector<std::size_t>& out, std::size_t r) {
    const std::size_t n = 1 + rng_.below(3);
    for (std::size_t i = 0; i < n; ++i) {
      if (spec_.contexts_per_relation > 0 && rng_.bernoulli(spec_.context_rate)) {
        out.push_back(layout_.contexts + (r - 1) * spec_.contexts_per_relation +
                      rng_.below(spec_.contexts_per_relation));
      } else {
        out.push_back(filler());
      }
    }
  }

  const CorpusSpec& spec_;
  Layout layout_;
  bool target_;
  Rng rng_;
};

std::vector<SentenceInstance> make_domain(const CorpusSpec& spec, bool target,
                                          std::span<const std::size_t> relations,
                                          std::size_t per_relation, Rng rng) {
  SentenceMaker maker(spec, target, rng.fork(1));
  std::vector<SentenceInstance> out;
  for (std::size_t r : relations)
    for (std::size_t i = 0; i < per_relation; ++i) out.push_back(maker.relation_sentence(r));
  const auto labelled = static_cast<double>(out.size());
  const auto na_count =
      static_cast<std::size_t>(std::llround(labelled * spec.na_fraction / (1.0 - spec.na_fraction)));
  for (std::size_t i = 0; i < na_count; ++i) out.push_back(maker.na_sentence());
  Rng order = rng.fork(2);
  shuffle(out, order);
  return out;
}

std::string spec_key(const std::string& prefix, const char* key) { return prefix + key; }

}  // namespace

std::size_t CorpusSpec::required_vocab() const { return Layout(*this).end; }

void CorpusSpec::validate() const {
  if (num_relations == 0) throw ContractError("corpus needs at least one relation");
  if (entities_per_group == 0 || filler_tokens == 0)
    throw ContractError("entity groups and filler pool must be nonempty");
  if (source_samples == 0) throw ContractError("source_samples must be positive");
  for (double p : {filler_shift, polysemy_rate, trigger_swap_rate, context_rate})
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("rates must lie in [0, 1]");
  if (!(na_fraction >= 0.0 && na_fraction < 1.0)) throw ContractError("na_fraction must lie in [0, 1)");
  if (max_len < kLongestSentence)
    throw ContractError("max_len must be at least " + std::to_string(kLongestSentence));
  std::set<std::size_t> seen;
  for (std::size_t r : outlier_relations) {
    if (r == kNaRelation || r > num_relations)
      throw ContractError("outlier relation " + std::to_string(r) + " is not a source relation");
    if (!seen.insert(r).second) throw ContractError("duplicate outlier relation");
  }
  if (outlier_relations.size() >= num_relations)
    throw ContractError("target domain needs at least one shared relation");
  if (vocab_size < required_vocab())
    throw Error("vocab_size " + std::to_string(vocab_size) + " too small; structure needs " +
                std::to_string(required_vocab()));
}

std::vector<std::size_t> CorpusSpec::target_relations() const {
  std::vector<std::size_t> out;
  for (std::size_t r = 1; r <= num_relations; ++r)
    if (std::find(outlier_relations.begin(), outlier_relations.end(), r) == outlier_relations.end())
      out.push_back(r);
  return out;
}

KeyValues CorpusSpec::to_keyvalues() const {
  KeyValues kv;
  kv.set("vocab_size", std::to_string(vocab_size));
  kv.set("num_relations", std::to_string(num_relations));
  kv.set("outlier_relations", join_list(outlier_relations));
  kv.set("source_samples", std::to_string(source_samples));
  kv.set("target_samples", std::to_string(target_samples));
  kv.set("filler_shift", format_real(filler_shift));
  kv.set("polysemy_rate", format_real(polysemy_rate));
  kv.set("trigger_swap_rate", format_real(trigger_swap_rate));
  kv.set("context_rate", format_real(context_rate));
  kv.set("na_fraction", format_real(na_fraction));
  kv.set("entities_per_group", std::to_string(entities_per_group));
  kv.set("contexts_per_relation", std::to_string(contexts_per_relation));
  kv.set("filler_tokens", std::to_string(filler_tokens));
  kv.set("max_len", std::to_string(max_len));
  kv.set("seed", std::to_string(seed));
  return kv;
}

CorpusSpec CorpusSpec::from_keyvalues(const KeyValues& kv, const std::string& p) {
  CorpusSpec s;
  s.vocab_size = kv.get_size(spec_key(p, "vocab_size"), s.vocab_size);
  s.num_relations = kv.get_size(spec_key(p, "num_relations"), s.num_relations);
  s.outlier_relations = kv.get_list(spec_key(p, "outlier_relations"), s.outlier_relations);
  s.source_samples = kv.get_size(spec_key(p, "source_samples"), s.source_samples);
  s.target_samples = kv.get_size(spec_key(p, "target_samples"), s.target_samples);
  s.filler_shift = kv.get_real(spec_key(p, "filler_shift"), s.filler_shift);
  s.polysemy_rate = kv.get_real(spec_key(p, "polysemy_rate"), s.polysemy_rate);
  s.trigger_swap_rate = kv.get_real(spec_key(p, "trigger_swap_rate"), s.trigger_swap_rate);
  s.context_rate = kv.get_real(spec_key(p, "context_rate"), s.context_rate);
  s.na_fraction = kv.get_real(spec_key(p, "na_fraction"), s.na_fraction);
  s.entities_per_group = kv.get_size(spec_key(p, "entities_per_group"), s.entities_per_group);
  s.contexts_per_relation = kv.get_size(spec_key(p, "contexts_per_relation"), s.contexts_per_relation);
  s.filler_tokens = kv.get_size(spec_key(p, "filler_tokens"), s.filler_tokens);
  s.max_len = kv.get_size(spec_key(p, "max_len"), s.max_len);
  s.seed = kv.get_u64(spec_key(p, "seed"), s.seed);
  return s;
}

Corpus gen_corpus(const CorpusSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  std::vector<std::size_t> all(spec.num_relations);
  std::iota(all.begin(), all.end(), std::size_t{1});
  Corpus c;
  c.source = make_domain(spec, false, all, spec.source_samples, root.fork(1));
  c.target = make_domain(spec, true, spec.target_relations(), spec.target_samples, root.fork(2));
  return c;
}

void KgSpec::validate() const {
  if (num_relations == 0 || num_groups < 2) throw ContractError("need relations and at least two groups");
  if (num_entities < num_groups) throw Error("entity pool smaller than the number of groups");
  if (num_groups * (num_groups - 1) < num_relations)
    throw Error("not enough distinct group pairs for every relation");
  if (low_resource_triples == 0 || triples_per_relation == 0)
    throw ContractError("triple counts must be positive");
  if (structural_dim == 0) throw ContractError("structural_dim must be positive");
  if (!(noise >= 0.0)) throw ContractError("noise must be nonnegative");
  if (!(low_resource_drift >= 0.0)) throw ContractError("low_resource_drift must be nonnegative");
  std::set<std::size_t> seen;
  for (std::size_t r : low_resource_relations) {
    if (r >= num_relations) throw ContractError("low-resource relation out of range");
    if (!seen.insert(r).second) throw ContractError("duplicate low-resource relation");
  }
  if (mirror_low_resource && 2 * low_resource_relations.size() > num_relations)
    throw ContractError("mirroring needs at least as many high-resource as low-resource relations");
  const std::size_t smallest = num_entities / num_groups;
  const std::size_t most = std::max(triples_per_relation, low_resource_triples);
  if (smallest * smallest < most) throw Error("entity pool too small for the requested triple count");
}

bool KgSpec::is_low_resource(std::size_t relation) const {
  return std::find(low_resource_relations.begin(), low_resource_relations.end(), relation) !=
         low_resource_relations.end();
}

KeyValues KgSpec::to_keyvalues() const {
  KeyValues kv;
  kv.set("num_entities", std::to_string(num_entities));
  kv.set("num_relations", std::to_string(num_relations));
  kv.set("num_groups", std::to_string(num_groups));
  kv.set("triples_per_relation", std::to_string(triples_per_relation));
  kv.set("low_resource_relations", join_list(low_resource_relations));
  kv.set("low_resource_triples", std::to_string(low_resource_triples));
  kv.set("negative_ratio", std::to_string(negative_ratio));
  kv.set("structural_dim", std::to_string(structural_dim));
  kv.set("noise", format_real(noise));
  kv.set("mirror_low_resource", mirror_low_resource ? "true" : "false");
  kv.set("low_resource_drift", format_real(low_resource_drift));
  kv.set("seed", std::to_string(seed));
  return kv;
}

KgSpec KgSpec::from_keyvalues(const KeyValues& kv, const std::string& p) {
  KgSpec s;
  s.num_entities = kv.get_size(spec_key(p, "num_entities"), s.num_entities);
  s.num_relations = kv.get_size(spec_key(p, "num_relations"), s.num_relations);
  s.num_groups = kv.get_size(spec_key(p, "num_groups"), s.num_groups);
  s.triples_per_relation = kv.get_size(spec_key(p, "triples_per_relation"), s.triples_per_relation);
  s.low_resource_relations = kv.get_list(spec_key(p, "low_resource_relations"), s.low_resource_relations);
  s.low_resource_triples = kv.get_size(spec_key(p, "low_resource_triples"), s.low_resource_triples);
  s.negative_ratio = kv.get_size(spec_key(p, "negative_ratio"), s.negative_ratio);
  s.structural_dim = kv.get_size(spec_key(p, "structural_dim"), s.structural_dim);
  s.noise = kv.get_real(spec_key(p, "noise"), s.noise);
  s.mirror_low_resource = kv.get_bool(spec_key(p, "mirror_low_resource"), s.mirror_low_resource);
  s.low_resource_drift = kv.get_real(spec_key(p, "low_resource_drift"), s.low_resource_drift);
  s.seed = kv.get_u64(spec_key(p, "seed"), s.seed);
  return s;
}

KnowledgeGraph gen_kg(const KgSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng geo = root.fork(1);
  Rng pick = root.fork(2);
  const std::size_t d = spec.structural_dim;

  KnowledgeGraph kg;
  std::vector<std::vector<std::size_t>> members(spec.num_groups);
  for (std::size_t e = 0; e < spec.num_entities; ++e) {
    kg.entity_group.push_back(e % spec.num_groups);
    members[e % spec.num_groups].push_back(e);
  }
  Tensor base = Tensor::matrix(spec.num_groups, d);
  for (double& v : base.data()) v = geo.normal();
  kg.entity_vectors = Tensor::matrix(spec.num_entities, d);
  for (std::size_t e = 0; e < spec.num_entities; ++e)
    for (std::size_t k = 0; k < d; ++k)
      kg.entity_vectors.at(e, k) = base.at(kg.entity_group[e], k) + spec.noise * geo.normal();

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < spec.num_groups; ++a)
    for (std::size_t b = 0; b < spec.num_groups; ++b)
      if (a != b) pairs.emplace_back(a, b);
  shuffle(pairs, pick);
  if (spec.mirror_low_resource) {
    std::vector<std::size_t> rich;
    for (std::size_t r = 0; r < spec.num_relations; ++r)
      if (!spec.is_low_resource(r)) rich.push_back(r);
    kg.relation_groups.resize(spec.num_relations);
    for (std::size_t k = 0; k < rich.size(); ++k) kg.relation_groups[rich[k]] = pairs[k];
    for (std::size_t k = 0; k < spec.low_resource_relations.size(); ++k)
      kg.relation_groups[spec.low_resource_relations[k]] = pairs[k];
  } else {
    kg.relation_groups.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(spec.num_relations));
  }
  kg.relation_vectors = Tensor::matrix(spec.num_relations, d);
  for (std::size_t r = 0; r < spec.num_relations; ++r) {
    const auto [a, b] = kg.relation_groups[r];
    for (std::size_t k = 0; k < d; ++k)
      kg.relation_vectors.at(r, k) = base.at(b, k) - base.at(a, k) + spec.noise * geo.normal();
  }
  if (spec.low_resource_drift > 0.0) {
    Rng drift = root.fork(3);
    for (std::size_t r : spec.low_resource_relations) {
      std::vector<double> v(d);
      double norm = 0.0;
      for (double& x : v) {
        x = drift.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < d; ++k) kg.relation_vectors.at(r, k) += spec.low_resource_drift * v[k] / norm;
    }
  }

  auto outside = [&](std::size_t group) {
    std::size_t e;
    do e = pick.below(spec.num_entities);
    while (kg.entity_group[e] == group);
    return e;
  };

  for (std::size_t r = 0; r < spec.num_relations; ++r) {
    const bool low = spec.is_low_resource(r);
    const std::size_t count = low ? spec.low_resource_triples : spec.triples_per_relation;
    const auto [a, b] = kg.relation_groups[r];
    std::vector<std::pair<std::size_t, std::size_t>> cand;
    for (std::size_t h : members[a])
      for (std::size_t t : members[b]) cand.emplace_back(h, t);
    shuffle(cand, pick);
    for (std::size_t i = 0; i < count; ++i) {
      const auto [h, t] = cand[i];
      kg.triples.push_back({h, r, t, std::nullopt, true});
      for (std::size_t n = 0; n < spec.negative_ratio; ++n) {
        if (pick.bernoulli(0.5))
          kg.triples.push_back({outside(a), r, t, std::nullopt, false});
        else
          kg.triples.push_back({h, r, outside(b), std::nullopt, false});
      }
    }
  }
  attach_structural(kg.triples, kg.entity_vectors, kg.relation_vectors);
  return kg;
}

void attach_structural(std::vector<TripleInstance>& triples, const Tensor& entity_vectors,
                       const Tensor& relation_vectors) {
  const std::size_t d = entity_vectors.cols();
  if (relation_vectors.cols() != d) throw ShapeError("entity and relation vectors differ in width");
  for (auto& t : triples) {
    if (t.head >= entity_vectors.rows() || t.tail >= entity_vectors.rows() ||
        t.relation >= relation_vectors.rows())
      throw ContractError("triple references an id without a structural vector");
    std::vector<double> s;
    s.reserve(3 * d);
    for (auto src : {entity_vectors.row_view(t.head), relation_vectors.row_view(t.relation),
                     entity_vectors.row_view(t.tail)})
      s.insert(s.end(), src.begin(), src.end());
    t.structural_input = std::move(s);
  }
}

PartialSplit make_partial_split(std::span<const SentenceInstance> dataset,
                                std::span<const std::size_t> keep) {
  if (keep.empty()) throw ContractError("keep set is empty");
  std::set<std::size_t> kept(keep.begin(), keep.end());
  PartialSplit out;
  out.remap[kNaRelation] = kNaRelation;
  std::size_t next = 1;
  for (std::size_t r : kept)
    if (r != kNaRelation) out.remap[r] = next++;
  for (const auto& inst : dataset)
    if (inst.relation && kept.count(*inst.relation)) out.instances.push_back(inst);
  if (out.instances.empty()) throw ContractError("partial split removed every instance");
  return out;
}

namespace {

template <typename Instance>
Split<Instance> split_impl(std::span<const Instance> data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ContractError("split fraction must lie in [0, 1]");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order, rng);
  const auto second = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.size())));
  std::vector<bool> in_second(data.size(), false);
  for (std::size_t i = 0; i < second; ++i) in_second[order[i]] = true;
  Split<Instance> out;
  for (std::size_t i = 0; i < data.size(); ++i) (in_second[i] ? out.second : out.first).push_back(data[i]);
  return out;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& text, std::size_t line) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(parse_index(tok, line));
  return out;
}

Span parse_span(const std::string& text, std::size_t line) {
  const auto v = parse_indices(text, line);
  if (v.size() != 2) throw ParseError("span needs two indices", line);
  return {v[0], v[1]};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

Split<SentenceInstance> split_instances(std::span<const SentenceInstance> data, double fraction,
                                        std::uint64_t seed) {
  return split_impl(data, fraction, seed);
}

Split<TripleInstance> split_instances(std::span<const TripleInstance> data, double fraction,
                                      std::uint64_t seed) {
  return split_impl(data, fraction, seed);
}

void write_sentences(std::ostream& out, std::span<const SentenceInstance> data) {
  for (const auto& s : data) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) out << (i ? " " : "") << s.tokens[i];
    out << '\t' << s.head.begin << ' ' << s.head.end << '\t' << s.tail.begin << ' ' << s.tail.end << '\t';
    if (s.relation)
      out << *s.relation;
    else
      out << '-';
    out << '\n';
  }
}

std::vector<SentenceInstance> read_sentences(std::istream& in) {
  std::vector<SentenceInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 4) throw ParseError("expected 4 tab-separated fields", lineno);
    SentenceInstance s;
    s.tokens = parse_indices(f[0], lineno);
    s.head = parse_span(f[1], lineno);
    s.tail = parse_span(f[2], lineno);
    if (f[3] != "-") s.relation = parse_index(f[3], lineno);
    try {
      s.validate();
    } catch (const ContractError& e) {
      throw ParseError(e.what(), lineno);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_triples(std::ostream& out, std::span<const TripleInstance> data) {
  for (const auto& t : data) {
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\t';
    if (t.label)
      out << (*t.label ? '1' : '0');
    else
      out << '-';
    out << '\n';
  }
}

std::vector<TripleInstance> read_triples(std::istream& in) {
  std::vector<TripleInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 4) throw ParseError("expected 4 tab-separated fields", lineno);
    TripleInstance t;
    t.head = parse_index(f[0], lineno);
    t.relation = parse_index(f[1], lineno);
    t.tail = parse_index(f[2], lineno);
    if (f[3] == "1")
      t.label = true;
    else if (f[3] == "0")
      t.label = false;
    else if (f[3] != "-")
      throw ParseError("label must be 1, 0 or -", lineno);
    out.push_back(std::move(t));
  }
  return out;
}

void write_structural(std::ostream& out, const Tensor& entity_vectors, const Tensor& relation_vectors) {
  auto dump = [&](const char* kind, const Tensor& t) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      out << kind << ' ' << r;
      for (double v : t.row_view(r)) out << ' ' << format_real(v);
      out << '\n';
    }
  };
  dump("entity", entity_vectors);
  dump("relation", relation_vectors);
}

std::pair<Tensor, Tensor> read_structural(std::istream& in) {
  std::vector<std::vector<double>> ent, rel;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind, id;
    ls >> kind >> id;
    auto& dst = kind == "entity" ? ent : kind == "relation" ? rel : throw ParseError("unknown record " + kind, lineno);
    if (parse_index(id, lineno) != dst.size()) throw ParseError("ids must be dense and ordered", lineno);
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) v.push_back(parse_real(tok, lineno));
    if (v.empty()) throw ParseError("vector is empty", lineno);
    if (width == 0) width = v.size();
    if (v.size() != width) throw ParseError("inconsistent vector width", lineno);
    dst.push_back(std::move(v));
  }
  auto pack = [&](const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Tensor();
    Tensor t = Tensor::matrix(rows.size(), width);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), t.data().begin() + r * width);
    return t;
  };
  return {pack(ent), pack(rel)};
}

void save_sentences(const std::string& path, std::span<const SentenceInstance> data) {
  auto out = open_out(path);
  write_sentences(out, data);
}

std::vector<SentenceInstance> load_sentences(const std::string& path) {
  auto in = open_in(path);
  return read_sentences(in);
}

void save_triples(const std::string& path, std::span<const TripleInstance> data) {
  auto out = open_out(path);
  write_triples(out, data);
}

std::vector<TripleInstance> load_triples(const std::string& path) {
  auto in = open_in(path);
  return read_triples(in);
}

}  // namespace wran
