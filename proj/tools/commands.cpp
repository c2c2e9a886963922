#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <tuple>

#include "wran/error.hpp"
#include "wran/evalkit.hpp"
#include "wran/format.hpp"

namespace wran::cli {
namespace fs = std::filesystem;
namespace {

constexpr const char* kInfo = "data.ini";
constexpr const char* kSource = "source.txt";
constexpr const char* kTargetTrain = "target_train.txt";
constexpr const char* kTargetTest = "target_test.txt";
constexpr const char* kStructural = "structural.txt";

std::string in_dir(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

std::string or_default(std::string path, const RunConfig& cfg, const char* name) {
  return path.empty() ? in_dir(cfg.out_dir, name) : path;
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw Error(std::string(what) + " not found: " + path);
}

Manifest start_manifest(const RunConfig& cfg, const std::string& command) {
  Manifest m;
  m.set("command", command);
  m.set("mode", mode_name(cfg.mode));
  m.set("seed", std::to_string(cfg.seed));
  m.merge(cfg.values, "config.");
  return m;
}

// ---- data directories ------------------------------------------------------

struct DataInfo {
  Mode mode;
  CorpusSpec corpus;
  KgSpec kg;
};

DataInfo read_info(const std::string& dir) {
  const std::string path = in_dir(dir, kInfo);
  require_file(path, "data description");
  const KeyValues kv = KeyValues::load(path);
  DataInfo d;
  const std::string mode = kv.get_string("mode", "");
  if (mode == "re") d.mode = Mode::kRe;
  else if (mode == "kgc") d.mode = Mode::kKgc;
  else throw Error(path + ": unknown mode '" + mode + "'");
  d.corpus = CorpusSpec::from_keyvalues(kv, "corpus.");
  d.kg = KgSpec::from_keyvalues(kv, "kg.");
  return d;
}

// The data directory fixes the mode and the vocabulary / entity sizes.
RunConfig with_data(const RunConfig& cfg, const std::string& dir) {
  const DataInfo info = read_info(dir);
  if (cfg.values.contains("run.mode") && cfg.mode != info.mode)
    throw ContractError(std::string("config mode '") + mode_name(cfg.mode) + "' does not match data mode '" +
                        mode_name(info.mode) + "'");
  RunConfig c = cfg;
  c.mode = info.mode;
  c.corpus = info.corpus;
  c.kg = info.kg;
  if (!cfg.values.contains("encoder.arch")) c.encoder.arch = info.mode == Mode::kRe ? Architecture::kPcnn : Architecture::kTriple;
  return c;
}

template <typename Instance>
struct Data {
  std::vector<Instance> source, target_train, target_test;
  Tensor entity_vectors, relation_vectors;  // triples only
};

template <typename Instance>
Data<Instance> load_data(const std::string& dir);

template <>
Data<SentenceInstance> load_data(const std::string& dir) {
  Data<SentenceInstance> d;
  for (auto [name, dst] : {std::pair{kSource, &d.source}, std::pair{kTargetTrain, &d.target_train},
                           std::pair{kTargetTest, &d.target_test}}) {
    require_file(in_dir(dir, name), "dataset");
    *dst = load_sentences(in_dir(dir, name));
  }
  return d;
}

template <>
Data<TripleInstance> load_data(const std::string& dir) {
  Data<TripleInstance> d;
  const std::string spath = in_dir(dir, kStructural);
  require_file(spath, "structural vectors");
  std::ifstream sin(spath);
  std::tie(d.entity_vectors, d.relation_vectors) = read_structural(sin);
  for (auto [name, dst] : {std::pair{kSource, &d.source}, std::pair{kTargetTrain, &d.target_train},
                           std::pair{kTargetTest, &d.target_test}}) {
    require_file(in_dir(dir, name), "dataset");
    *dst = load_triples(in_dir(dir, name));
    attach_structural(*dst, d.entity_vectors, d.relation_vectors);
  }
  return d;
}

// ---- checkpoints -----------------------------------------------------------
// <path> holds the parameters, <path>.state the stage record and encoder
// shape, <path>.weights the weight table once stage 2 has run.

struct Bundle {
  Mode mode = Mode::kRe;
  EncoderConfig encoder;
  std::size_t classes = 0;
  TrainState state;
};

void save_bundle(const std::string& path, const Bundle& b) {
  ensure_parent(path);
  save_params(path, b.state.params);
  KeyValues kv;
  kv.set("mode", mode_name(b.mode));
  kv.set("classes", std::to_string(b.classes));
  kv.set("stage", std::to_string(static_cast<int>(b.state.stage)));
  kv.set("stage_name", stage_name(b.state.stage));
  kv.set("source_accuracy", format_real(b.state.source_accuracy));
  kv.set("has_target_head", b.state.has_target_head ? "true" : "false");
  kv.set("step", std::to_string(b.state.step));
  kv.set("progress", format_real(b.state.progress));
  const KeyValues enc = encoder_to_keyvalues(b.encoder);
  for (const auto& [k, v] : enc.entries()) kv.set("encoder." + k, v);
  std::ofstream out(path + ".state");
  if (!out) throw Error("cannot write " + path + ".state");
  kv.write(out);
  if (b.state.weights.has_relation_weights()) b.state.weights.save(path + ".weights");
}

Bundle load_bundle(const std::string& path) {
  require_file(path, "checkpoint");
  require_file(path + ".state", "checkpoint state");
  const KeyValues kv = KeyValues::load(path + ".state");
  Bundle b;
  b.mode = kv.get_string("mode", "re") == "kgc" ? Mode::kKgc : Mode::kRe;
  b.classes = kv.get_size("classes", 0);
  const std::size_t stage = kv.get_size("stage", 0);
  if (stage > static_cast<std::size_t>(Stage::kDone)) throw Error(path + ".state: bad stage " + std::to_string(stage));
  b.state.stage = static_cast<Stage>(stage);
  b.state.source_accuracy = kv.get_real("source_accuracy", 0.0);
  b.state.has_target_head = kv.get_bool("has_target_head", false);
  b.state.step = kv.get_size("step", 0);
  b.state.progress = kv.get_real("progress", 0.0);
  b.encoder = encoder_from_keyvalues(kv, "encoder.", EncoderConfig{});
  b.state.params = load_params(path);
  if (fs::exists(path + ".weights")) b.state.weights = WeightTable::load(path + ".weights");
  return b;
}

template <typename Instance>
Trainer<Instance> restore_trainer(const Bundle& b, const TrainConfig& train) {
  Trainer<Instance> t(b.encoder, b.classes, train);
  t.restore(b.state);
  return t;
}

Bundle bundle_of(Mode mode, std::size_t classes, const EncoderConfig& enc, const TrainState& s) {
  return {mode, enc, classes, s};
}

void check_mode(const Bundle& b, const RunConfig& cfg) {
  if (b.mode != cfg.mode)
    throw ContractError(std::string("checkpoint was trained in mode '") + mode_name(b.mode) + "', data is '" +
                        mode_name(cfg.mode) + "'");
}

// ---- stage drivers ---------------------------------------------------------

template <typename Instance>
double pretrain(const RunConfig& cfg, const std::string& data_dir, const std::string& out) {
  const auto data = load_data<Instance>(data_dir);
  const EncoderConfig enc = sized_encoder(cfg);
  Trainer<Instance> t(enc, num_classes(cfg), cfg.train);
  const double acc = t.stage1_pretrain_source(data.source);
  save_bundle(out, bundle_of(cfg.mode, num_classes(cfg), t.encoder_config(), t.state()));
  return acc;
}

template <typename Instance>
WeightTable weights(const RunConfig& cfg, const Bundle& b, const std::string& data_dir, const std::string& out_ckpt) {
  const auto data = load_data<Instance>(data_dir);
  auto t = restore_trainer<Instance>(b, cfg.train);
  t.stage2_relation_weights(data.target_train);
  const WeightTable table = t.stage3_instance_weights(data.source, data.target_train);
  save_bundle(out_ckpt, bundle_of(cfg.mode, b.classes, b.encoder, t.state()));
  return table;
}

template <typename Instance>
void adapt(const RunConfig& cfg, Bundle b, const std::string& data_dir, const std::string& out,
           const WeightingOptions& opt, double fine_tune_frac, TrainConfig train, Manifest& m) {
  const auto data = load_data<Instance>(data_dir);
  auto t = restore_trainer<Instance>(b, train);
  t.stage4_adversarial_adapt(data.source, data.target_train, opt);
  if (!t.state().lambdas.empty()) m.set_real("lambda.final", t.state().lambdas.back());
  if (fine_tune_frac > 0.0) {
    const auto split = split_instances(std::span<const Instance>(data.target_train), fine_tune_frac, cfg.seed + 2000);
    for (const auto& inst : split.second) {
      if constexpr (std::is_same_v<Instance, SentenceInstance>) {
        if (!inst.relation) throw ContractError("fine-tuning needs labeled target instances");
      } else {
        if (!inst.label) throw ContractError("fine-tuning needs labeled target triples");
      }
    }
    if (split.second.empty()) throw ContractError("fine-tune fraction selects no target instances");
    t.fine_tune(split.second);
    m.set("fine_tune.instances", std::to_string(split.second.size()));
  }
  save_bundle(out, bundle_of(cfg.mode, b.classes, b.encoder, t.state()));
}

Tensor scored(auto& trainer, const auto& data) {
  return trainer.stage() >= Stage::kAdapted ? trainer.predict(data) : trainer.predict_source_only(data);
}

std::vector<Metric> eval_re(const RunConfig& cfg, const Bundle& b, const std::string& data_dir,
                            const std::string& out) {
  const auto data = load_data<SentenceInstance>(data_dir);
  auto t = restore_trainer<SentenceInstance>(b, cfg.train);
  const Tensor probs = scored(t, std::span<const SentenceInstance>(data.target_test));
  const auto gold = labels_of(std::span<const SentenceInstance>(data.target_test));
  const auto preds = make_predictions(probs, gold);
  const F1Score f = f1_micro(preds, true);
  std::vector<Metric> m = {{"instances", static_cast<double>(preds.size())},
                           {"f1", f.f1},
                           {"precision", f.precision},
                           {"recall", f.recall}};
  std::size_t non_na = 0;
  for (const auto& p : preds) non_na += p.predicted != kNaRelation;
  for (std::size_t k : cfg.top_k)
    if (k > 0 && k <= non_na) m.push_back({"p_at_" + std::to_string(k), precision_at_k(preds, k)});
  const auto curve = pr_curve(preds);
  const std::string pr_path = fs::path(out).replace_extension(".pr.csv").string();
  std::ofstream pr(pr_path);
  if (!pr) throw Error("cannot write " + pr_path);
  write_pr_curve(pr, curve);
  return m;
}

std::vector<Metric> eval_kgc(const RunConfig& cfg, const Bundle& b, const std::string& data_dir) {
  const auto data = load_data<TripleInstance>(data_dir);
  auto t = restore_trainer<TripleInstance>(b, cfg.train);
  auto positive_scores = [&](const std::vector<TripleInstance>& triples) {
    const Tensor probs = scored(t, std::span<const TripleInstance>(triples));
    std::vector<double> s(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) s[r] = probs.at(r, 1);
    return s;
  };
  const auto& test = data.target_test;
  const auto labels = labels_of(std::span<const TripleInstance>(test));
  std::vector<Metric> m = {{"instances", static_cast<double>(test.size())},
                           {"triple_accuracy", triple_accuracy(positive_scores(test), labels)}};

  // Tail prediction for every positive test triple, filtered by all known positives.
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> known;
  for (const auto* set : {&data.source, &data.target_train, &data.target_test})
    for (const auto& x : *set)
      if (x.label.value_or(false)) known.emplace(x.head, x.relation, x.tail);
  const std::size_t entities = data.entity_vectors.rows();
  std::vector<RankingQuery> queries;
  for (const auto& x : test) {
    if (!x.label.value_or(false)) continue;
    std::vector<TripleInstance> cand;
    RankingQuery q;
    q.gold = x.tail;
    for (std::size_t e = 0; e < entities; ++e) {
      cand.push_back({x.head, x.relation, e, std::nullopt, std::nullopt});
      if (e != x.tail && known.count({x.head, x.relation, e})) q.known_true.push_back(e);
    }
    attach_structural(cand, data.entity_vectors, data.relation_vectors);
    q.ranked = rank_candidates(positive_scores(cand));
    queries.push_back(std::move(q));
  }
  if (!queries.empty()) {
    const auto r = mrr_mr_hits(queries, cfg.hits, true);
    m.push_back({"mrr", r.mrr});
    m.push_back({"mr", r.mr});
    for (const auto& [n, v] : r.hits) m.push_back({"hits_at_" + std::to_string(n), v});
  }
  return m;
}

void save_metrics(const std::string& path, const std::vector<Metric>& metrics) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_metrics(out, metrics);
}

}  // namespace

std::string cmd_gen(const RunConfig& cfg, std::string out_dir) {
  if (out_dir.empty()) out_dir = cfg.out_dir;
  fs::create_directories(out_dir);
  Manifest m = start_manifest(cfg, "gen");
  KeyValues info;
  info.set("mode", mode_name(cfg.mode));
  if (cfg.mode == Mode::kRe) {
    const Corpus corpus = gen_corpus(cfg.corpus);
    const auto split = split_instances(std::span<const SentenceInstance>(corpus.target), cfg.test_fraction,
                                       cfg.seed + 1000);
    save_sentences(in_dir(out_dir, kSource), corpus.source);
    save_sentences(in_dir(out_dir, kTargetTrain), split.first);
    save_sentences(in_dir(out_dir, kTargetTest), split.second);
    const KeyValues spec = cfg.corpus.to_keyvalues();
    for (const auto& [k, v] : spec.entries()) info.set("corpus." + k, v);
    m.set("count.source", std::to_string(corpus.source.size()));
    m.set("count.target_train", std::to_string(split.first.size()));
    m.set("count.target_test", std::to_string(split.second.size()));
  } else {
    const KnowledgeGraph kg = gen_kg(cfg.kg);
    std::vector<TripleInstance> source, target;
    for (const auto& t : kg.triples) (cfg.kg.is_low_resource(t.relation) ? target : source).push_back(t);
    // Low-resource triples are adapted on and scored transductively.
    save_triples(in_dir(out_dir, kSource), source);
    save_triples(in_dir(out_dir, kTargetTrain), target);
    save_triples(in_dir(out_dir, kTargetTest), target);
    std::ofstream sout(in_dir(out_dir, kStructural));
    write_structural(sout, kg.entity_vectors, kg.relation_vectors);
    const KeyValues spec = cfg.kg.to_keyvalues();
    for (const auto& [k, v] : spec.entries()) info.set("kg." + k, v);
    m.set("count.source", std::to_string(source.size()));
    m.set("count.target", std::to_string(target.size()));
  }
  std::ofstream iout(in_dir(out_dir, kInfo));
  info.write(iout);
  m.stage_done("gen");
  m.save(in_dir(out_dir, "manifest.txt"));
  return out_dir;
}

std::string cmd_pretrain(const RunConfig& base, const std::string& data_dir, std::string out) {
  const RunConfig cfg = with_data(base, data_dir);
  out = or_default(std::move(out), cfg, "pretrained.ckpt");
  Manifest m = start_manifest(cfg, "pretrain");
  m.set("input.data", data_dir);
  const double acc = cfg.mode == Mode::kRe ? pretrain<SentenceInstance>(cfg, data_dir, out)
                                           : pretrain<TripleInstance>(cfg, data_dir, out);
  m.set_real("source_accuracy", acc);
  m.set("output.checkpoint", out);
  m.stage_done("pretrain");
  m.save(out + ".manifest");
  return out;
}

std::string cmd_weights(const RunConfig& base, const std::string& ckpt, const std::string& data_dir,
                        std::string out_weights, std::string out_ckpt) {
  const RunConfig cfg = with_data(base, data_dir);
  out_weights = or_default(std::move(out_weights), cfg, "weights.txt");
  out_ckpt = or_default(std::move(out_ckpt), cfg, "weighted.ckpt");
  const Bundle b = load_bundle(ckpt);
  check_mode(b, cfg);
  Manifest m = start_manifest(cfg, "weights");
  m.set("input.checkpoint", ckpt);
  m.set("input.data", data_dir);
  const WeightTable table = cfg.mode == Mode::kRe ? weights<SentenceInstance>(cfg, b, data_dir, out_ckpt)
                                                  : weights<TripleInstance>(cfg, b, data_dir, out_ckpt);
  ensure_parent(out_weights);
  table.save(out_weights);
  m.set_real("alpha", table.alpha());
  m.set("output.weights", out_weights);
  m.set("output.checkpoint", out_ckpt);
  m.stage_done("weights");
  m.save(out_weights + ".manifest");
  return out_weights;
}

std::string cmd_adapt(const RunConfig& base, const std::string& ckpt, const std::string& weights_path,
                      const std::string& data_dir, std::string out, const AdaptFlags& flags) {
  const RunConfig cfg = with_data(base, data_dir);
  out = or_default(std::move(out), cfg, "adapted.ckpt");
  Bundle b = load_bundle(ckpt);
  check_mode(b, cfg);
  require_file(weights_path, "weight table");
  b.state.weights = WeightTable::load(weights_path);
  if (!(flags.fine_tune_frac >= 0.0 && flags.fine_tune_frac <= 1.0))
    throw ContractError("--fine-tune-frac must lie in [0, 1]");

  WeightingOptions opt;
  opt.relation = !flags.no_relation;
  opt.instance = !flags.no_instance;
  opt.gate = !flags.no_gate;
  opt.fixed_alpha = flags.fixed_alpha;
  if (!(opt.fixed_alpha >= 0.0 && opt.fixed_alpha <= 1.0)) throw ContractError("--fixed-alpha must lie in [0, 1]");
  TrainConfig train = cfg.train;
  if (flags.sm_coeff) train.sm_coeff = *flags.sm_coeff;
  train.validate();

  Manifest m = start_manifest(cfg, "adapt");
  m.set("input.checkpoint", ckpt);
  m.set("input.weights", weights_path);
  m.set("input.data", data_dir);
  m.set("weighting", opt.name());
  m.set_real("fixed_alpha", opt.fixed_alpha);
  m.set_real("sm_coeff", train.sm_coeff);
  m.set_real("fine_tune_frac", flags.fine_tune_frac);
  if (cfg.mode == Mode::kRe)
    adapt<SentenceInstance>(cfg, std::move(b), data_dir, out, opt, flags.fine_tune_frac, train, m);
  else
    adapt<TripleInstance>(cfg, std::move(b), data_dir, out, opt, flags.fine_tune_frac, train, m);
  m.set("output.checkpoint", out);
  m.stage_done("adapt");
  m.save(out + ".manifest");
  return out;
}

std::string cmd_eval(const RunConfig& base, const std::string& ckpt, const std::string& data_dir, std::string out) {
  const RunConfig cfg = with_data(base, data_dir);
  out = or_default(std::move(out), cfg, "metrics.csv");
  const Bundle b = load_bundle(ckpt);
  check_mode(b, cfg);
  ensure_parent(out);
  const auto metrics = cfg.mode == Mode::kRe ? eval_re(cfg, b, data_dir, out) : eval_kgc(cfg, b, data_dir);
  save_metrics(out, metrics);
  Manifest m = start_manifest(cfg, "eval");
  m.set("input.checkpoint", ckpt);
  m.set("input.data", data_dir);
  m.set("checkpoint.stage", stage_name(b.state.stage));
  for (const auto& x : metrics) m.set_real("metric." + x.name, x.value);
  m.set("output.metrics", out);
  m.stage_done("eval");
  m.save(out + ".manifest");
  for (const auto& x : metrics) std::cout << x.name << ' ' << format_real(x.value) << '\n';
  return out;
}

std::string cmd_theory(const RunConfig& cfg, std::string out_dir) {
  if (out_dir.empty()) out_dir = cfg.out_dir;
  fs::create_directories(out_dir);
  const Grid grid;
  struct Case {
    std::string name;
    WeightField w;
    Density1D ps, pt;
  };
  const auto ps_w = Density1D::gaussian(0.0, 2.0);
  const std::vector<Case> cases = {
      {"equal", WeightField::constant(), Density1D::gaussian(0.0, 1.0), Density1D::gaussian(0.0, 1.0)},
      {"shifted", WeightField::constant(), Density1D::gaussian(-1.0, 1.0), Density1D::gaussian(1.0, 1.0)},
      {"tilted", WeightField([](double x) { return 1.0 + 0.5 * std::tanh(x); }), Density1D::gaussian(0.0, 1.0),
       Density1D::gaussian(0.5, 1.5)},
      {"uniform_vs_gaussian", WeightField::constant(), Density1D::uniform(-1.0, 1.0), Density1D::gaussian(0.0, 1.0)},
      {"mixture", WeightField::constant(),
       Density1D::mixture({{0.3, Density1D::gaussian(-2.0, 0.5)}, {0.7, Density1D::gaussian(1.0, 1.0)}}),
       Density1D::gaussian(0.0, 1.5)},
      {"disjoint", WeightField::constant(), Density1D::uniform(-3.0, -1.0), Density1D::uniform(1.0, 3.0)},
      {"bump", WeightField([](double x) { return std::exp(-x * x / 8.0); }).normalized(ps_w, grid), ps_w,
       Density1D::gaussian(0.0, 1.0)},
  };
  std::vector<Metric> metrics;
  double worst = 0.0;
  for (const auto& c : cases) {
    const WeightField w = c.w.normalized(c.ps, grid);
    const double value = minimax_value(w, c.ps, c.pt, grid);
    const double identity = minimax_identity(w, c.ps, c.pt, grid);
    worst = std::max(worst, std::abs(value - identity));
    metrics.push_back({"minimax." + c.name, value});
    metrics.push_back({"identity_gap." + c.name, std::abs(value - identity)});
  }
  metrics.push_back({"identity_gap.max", worst});

  struct Empirical {
    std::string name;
    Density1D ps, pt;
  };
  const std::vector<Empirical> runs = {
      {"separated", Density1D::gaussian(-1.5, 1.0), Density1D::gaussian(1.5, 1.0)},
      {"identical", Density1D::gaussian(0.0, 1.0), Density1D::gaussian(0.0, 1.0)},
  };
  std::ofstream report(in_dir(out_dir, "theory_report.txt"));
  for (const auto& r : runs) {
    const auto rep = empirical_check(WeightField::constant(), r.ps, r.pt, cfg.theory, grid);
    metrics.push_back({"empirical." + r.name + ".max_abs_error", rep.max_abs_error});
    metrics.push_back({"empirical." + r.name + ".loss_gap", rep.loss_gap});
    metrics.push_back({"empirical." + r.name + ".converged", rep.converged ? 1.0 : 0.0});
    report << "[" << r.name << "]\n";
    write_report(report, rep);
    std::ofstream curve(in_dir(out_dir, ("curve_" + r.name + ".csv").c_str()));
    write_curve_csv(curve, rep);
  }
  const std::string out = in_dir(out_dir, "theory_metrics.csv");
  save_metrics(out, metrics);
  Manifest m = start_manifest(cfg, "theory");
  m.set("output.metrics", out);
  m.stage_done("theory");
  m.save(out + ".manifest");
  for (const auto& x : metrics) std::cout << x.name << ' ' << format_real(x.value) << '\n';
  return out;
}

}  // namespace wran::cli
