#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "wran/datagen.hpp"
#include "wran/error.hpp"

using namespace wran;

TEST_CASE("corpus generation is a pure function of spec and seed") {
  CorpusSpec s;
  s.outlier_relations = {2, 4, 6};
  const Corpus a = gen_corpus(s), b = gen_corpus(s);
  CHECK(a.source == b.source);
  CHECK(a.target == b.target);
  std::ostringstream wa, wb;
  write_sentences(wa, a.source);
  write_sentences(wb, b.source);
  CHECK(wa.str() == wb.str());

  s.seed = 2;
  CHECK(!(gen_corpus(s).source == a.source));
}

TEST_CASE("counts and the partial label space") {
  CorpusSpec s;
  s.num_relations = 8;
  s.source_samples = 250;
  s.outlier_relations = {2, 4, 6};
  const Corpus c = gen_corpus(s);
  CHECK(c.source.size() == 2000);
  CHECK(c.target.size() == 5 * 250);
  std::set<std::size_t> src, tgt;
  for (const auto& x : c.source) src.insert(*x.relation);
  for (const auto& x : c.target) tgt.insert(*x.relation);
  for (std::size_t r : s.outlier_relations) {
    CHECK(src.count(r) == 1);
    CHECK(tgt.count(r) == 0);
  }
  for (std::size_t r : tgt) CHECK(src.count(r) == 1);
  for (const auto& x : c.source) x.validate();
}

TEST_CASE("NA sentences carry no trigger") {
  CorpusSpec s;
  s.na_fraction = 0.2;
  const Corpus c = gen_corpus(s);
  const std::size_t na = std::count_if(c.source.begin(), c.source.end(),
                                       [](const auto& x) { return *x.relation == kNaRelation; });
  CHECK(na > 0);
}

TEST_CASE("corpus spec validation") {
  CorpusSpec s;
  s.outlier_relations = {9};
  CHECK_THROWS_AS(s.validate(), ContractError);
  s.outlier_relations = {};
  s.polysemy_rate = 1.5;
  CHECK_THROWS_AS(s.validate(), ContractError);
  s.polysemy_rate = 0.3;
  s.vocab_size = 20;
  CHECK_THROWS(s.validate());
}

TEST_CASE("spec key=value round trip") {
  CorpusSpec s;
  s.outlier_relations = {1, 3};
  s.filler_shift = 0.123456789;
  const CorpusSpec back = CorpusSpec::from_keyvalues(s.to_keyvalues());
  CHECK(back.outlier_relations == s.outlier_relations);
  CHECK(back.filler_shift == s.filler_shift);
  CHECK(back.to_keyvalues().entries() == s.to_keyvalues().entries());

  KgSpec k;
  k.low_resource_drift = 0.0;
  k.mirror_low_resource = false;
  const KgSpec kb = KgSpec::from_keyvalues(k.to_keyvalues());
  CHECK(kb.to_keyvalues().entries() == k.to_keyvalues().entries());
}

TEST_CASE("planted knowledge graph geometry") {
  KgSpec s;
  s.noise = 0.0;
  s.low_resource_drift = 0.0;
  const KnowledgeGraph kg = gen_kg(s);
  std::size_t pos = 0, neg = 0;
  for (const auto& t : kg.triples) {
    if (*t.label) {
      ++pos;
      for (std::size_t k = 0; k < s.structural_dim; ++k) {
        const double h = kg.entity_vectors.at(t.head, k), r = kg.relation_vectors.at(t.relation, k);
        CHECK(kg.entity_vectors.at(t.tail, k) == doctest::Approx(h + r).epsilon(1e-12));
      }
    } else {
      ++neg;
    }
  }
  CHECK(pos == 7 * s.triples_per_relation + 3 * s.low_resource_triples);
  CHECK(neg == pos);  // negative ratio 1

  const KnowledgeGraph again = gen_kg(s);
  CHECK(again.triples == kg.triples);
}

TEST_CASE("mirrored low-resource relations reuse rich group pairs") {
  KgSpec s;
  const KnowledgeGraph kg = gen_kg(s);
  std::vector<std::size_t> rich;
  for (std::size_t r = 0; r < s.num_relations; ++r)
    if (!s.is_low_resource(r)) rich.push_back(r);
  for (std::size_t k = 0; k < s.low_resource_relations.size(); ++k)
    CHECK(kg.relation_groups[s.low_resource_relations[k]] == kg.relation_groups[rich[k]]);

  KgSpec dup = s;
  dup.low_resource_relations = {7, 7};
  CHECK_THROWS_AS(dup.validate(), ContractError);
}

TEST_CASE("drift moves low-resource relation vectors by its norm only") {
  KgSpec s;
  s.low_resource_drift = 0.0;
  const KnowledgeGraph a = gen_kg(s);
  s.low_resource_drift = 2.5;
  const KnowledgeGraph b = gen_kg(s);
  CHECK(a.entity_vectors == b.entity_vectors);
  for (std::size_t r = 0; r < s.num_relations; ++r) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < s.structural_dim; ++k)
      d2 += std::pow(a.relation_vectors.at(r, k) - b.relation_vectors.at(r, k), 2);
    CHECK(std::sqrt(d2) == doctest::Approx(s.is_low_resource(r) ? 2.5 : 0.0).epsilon(1e-12));
  }
}

TEST_CASE("partial split") {
  CorpusSpec s;
  s.num_relations = 4;
  s.source_samples = 20;
  const Corpus c = gen_corpus(s);
  const std::vector<std::size_t> all = {0, 1, 2, 3, 4};
  CHECK(make_partial_split(c.source, all).instances == c.source);
  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(make_partial_split(c.source, none), ContractError);

  CorpusSpec big;
  big.vocab_size = 2000;
  big.num_relations = 60;
  big.source_samples = 5;
  const Corpus bc = gen_corpus(big);
  std::vector<std::size_t> keep;
  for (std::size_t r = 1; r <= 30; ++r) keep.push_back(r);
  const auto p = make_partial_split(bc.source, keep);
  std::set<std::size_t> seen;
  for (const auto& x : p.instances) seen.insert(p.remap.at(*x.relation));
  CHECK(seen.size() == 30);
}

TEST_CASE("split_instances partitions deterministically") {
  CorpusSpec s;
  s.source_samples = 25;
  const Corpus c = gen_corpus(s);
  const auto a = split_instances(std::span<const SentenceInstance>(c.source), 0.3, 9);
  const auto b = split_instances(std::span<const SentenceInstance>(c.source), 0.3, 9);
  CHECK(a.first == b.first);
  CHECK(a.second.size() == static_cast<std::size_t>(std::floor(0.3 * c.source.size())));
  CHECK(a.first.size() + a.second.size() == c.source.size());
}

TEST_CASE("dataset text round trips") {
  CorpusSpec s;
  s.source_samples = 10;
  s.na_fraction = 0.1;
  Corpus c = gen_corpus(s);
  c.source[3].relation.reset();
  std::stringstream ss;
  write_sentences(ss, c.source);
  CHECK(read_sentences(ss) == c.source);

  KgSpec k;
  KnowledgeGraph kg = gen_kg(k);
  kg.triples[0].label.reset();
  std::stringstream ts;
  write_triples(ts, kg.triples);
  auto back = read_triples(ts);
  CHECK(back.size() == kg.triples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].head == kg.triples[i].head);
    CHECK(back[i].relation == kg.triples[i].relation);
    CHECK(back[i].tail == kg.triples[i].tail);
    CHECK(back[i].label == kg.triples[i].label);
  }

  std::stringstream vs;
  write_structural(vs, kg.entity_vectors, kg.relation_vectors);
  const auto [e, r] = read_structural(vs);
  CHECK(e == kg.entity_vectors);
  CHECK(r == kg.relation_vectors);

  std::stringstream empty;
  CHECK(read_sentences(empty).empty());
}

TEST_CASE("malformed lines report their line number") {
  std::stringstream bad("1 2 3\t0 1\t2 3\t1\n4 5 6\t2 x\t0 1\t1\n");
  try {
    read_sentences(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::stringstream tbad("0\t1\t2\t1\n0\t1\n");
  CHECK_THROWS_AS(read_triples(tbad), ParseError);
}
