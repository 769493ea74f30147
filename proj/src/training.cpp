#include "deid/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "deid/corpus_io.hpp"
#include "deid/error.hpp"
#include "deid/evaluation.hpp"
#include "deid/text.hpp"

namespace deid {

namespace {

constexpr std::uint64_t kStageStream = 0x57A6E;
constexpr std::uint64_t kMergeStream = 1;
constexpr std::uint64_t kEpochStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::uint64_t kSplitStream = 1000;

} // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::in_domain: return "in_domain";
    case Strategy::sequential: return "sequential";
    case Strategy::fine_tuning: return "fine_tuning";
    case Strategy::concurrent: return "concurrent";
  }
  return "in_domain";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "in_domain") return Strategy::in_domain;
  if (name == "sequential") return Strategy::sequential;
  if (name == "fine_tuning") return Strategy::fine_tuning;
  if (name == "concurrent") return Strategy::concurrent;
  throw Error("unknown strategy '" + name + "' (expected in_domain, sequential, fine_tuning or concurrent)");
}

TrainingPlan plan_from_json(const ojson& j, const std::string& base_dir) {
  if (!j.is_object()) throw Error("plan must be a JSON object");
  TrainingPlan plan;
  bool have_seed = false;
  std::uint64_t seed = 0;
  for (const auto& [key, v] : j.items()) {
    if (key == "strategy") {
      if (!v.is_string()) throw Error("plan field 'strategy' must be a string");
      plan.strategy = parse_strategy(v.get<std::string>());
    } else if (key == "head") {
      if (v.is_string()) plan.head.kind = parse_head(v.get<std::string>());
      else apply_json(plan.head, v);
    } else if (key == "config") {
      apply_json(plan.config, v);
    } else if (key == "seed") {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw Error("plan field 'seed' must be a non-negative integer");
      seed = v.get<std::uint64_t>();
      have_seed = true;
    } else if (key == "word_vectors") {
      if (!v.is_string()) throw Error("plan field 'word_vectors' must be a string");
      plan.word_vectors = v.get<std::string>();
    } else if (key == "stages") {
      if (!v.is_array()) throw Error("plan field 'stages' must be a list of corpus lists");
      for (const auto& stage : v) {
        std::vector<std::string> paths;
        if (stage.is_string()) paths.push_back(stage.get<std::string>());
        else if (stage.is_array())
          for (const auto& p : stage) {
            if (!p.is_string()) throw Error("plan stage entries must be corpus paths");
            paths.push_back(p.get<std::string>());
          }
        else throw Error("each plan stage must be a corpus path or a list of paths");
        plan.stages.push_back(std::move(paths));
      }
    } else {
      throw Error("unknown plan field '" + key + "'");
    }
  }
  if (have_seed) plan.config.seed = seed;
  if (!base_dir.empty()) {
    auto resolve = [&](std::string& p) {
      if (!p.empty() && std::filesystem::path(p).is_relative()) p = (std::filesystem::path(base_dir) / p).string();
    };
    for (auto& stage : plan.stages)
      for (auto& p : stage) resolve(p);
    resolve(plan.word_vectors);
  }
  plan.config.validate();
  return plan;
}

ojson plan_to_json(const TrainingPlan& plan) {
  ojson j = {{"strategy", to_string(plan.strategy)},
             {"head", to_json(plan.head)},
             {"seed", plan.config.seed},
             {"config", to_json(plan.config)},
             {"stages", plan.stages}};
  if (!plan.word_vectors.empty()) j["word_vectors"] = plan.word_vectors;
  return j;
}

TrainingPlan load_plan(const std::string& path) {
  try {
    return plan_from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw Error(path + ": " + msg);
  }
}

void validate_plan(Strategy strategy, const std::vector<std::vector<std::string>>& stages, const HeadConfig& head) {
  if (stages.empty()) throw Error("plan has no stages");
  std::vector<std::string> domains;
  for (const auto& stage : stages) {
    if (stage.empty()) throw Error("plan has an empty stage");
    std::set<std::string> seen;
    for (const auto& name : stage) {
      if (!seen.insert(name).second) throw Error("corpus '" + name + "' appears twice in one stage");
      if (std::find(domains.begin(), domains.end(), name) == domains.end()) domains.push_back(name);
    }
  }
  const auto name = to_string(strategy);
  switch (strategy) {
    case Strategy::in_domain:
      if (stages.size() != 1 || stages[0].size() != 1) throw Error("in_domain plans have exactly one corpus");
      break;
    case Strategy::sequential:
    case Strategy::fine_tuning:
      if (stages.size() < 2) throw Error(name + " plans need at least two stages");
      for (const auto& s : stages)
        if (s.size() != 1) throw Error(name + " plans take one corpus per stage");
      break;
    case Strategy::concurrent:
      if (stages.size() != 1 || stages[0].size() < 2)
        throw Error("concurrent plans have exactly one stage with at least two corpora");
      break;
  }
  if (head.kind != HeadKind::plain && domains.size() < 2)
    throw Error(to_string(head.kind) + " head requires at least two distinct domains in the training data");
  head.validate(int(std::max<std::size_t>(domains.size(), 2)));
}

std::string format_log_line(const EpochLog& e, bool with_time) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%d\t%.6f\t%.6f\t%d", e.stage, e.epoch, e.train_loss, e.dev_f1,
                e.since_improvement);
  std::string line = buf;
  if (with_time) {
    std::snprintf(buf, sizeof buf, "\t%.3f", e.seconds);
    line += buf;
  }
  return line;
}

WordVectors load_word_vectors(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open word vectors");
  WordVectors out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> v;
    std::string x;
    while (fields >> x) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(x, &used));
        if (used != x.size()) throw std::invalid_argument(x);
      } catch (const std::exception&) {
        throw Error(path + ": line " + std::to_string(n) + ": '" + x + "' is not a number");
      }
    }
    if (int(v.size()) != dim)
      throw Error(path + ": line " + std::to_string(n) + ": expected " + std::to_string(dim) + " values, found " +
                  std::to_string(v.size()));
    out[to_lower(utf8_decode(token))] = std::move(v);
  }
  return out;
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = unsigned(std::max<std::size_t>(1, std::min<std::size_t>(jobs, n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (unsigned j = 0; j < jobs; ++j) {
    workers.emplace_back([&, j] {
      try {
        for (std::size_t i = n * j / jobs; i < n * (j + 1) / jobs; ++i) fn(i);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Document> predict_documents(const Model& model, const std::vector<Document>& docs, unsigned jobs) {
  if (!model.tagger) throw Error("model has no tagger");
  std::vector<Document> out(docs.size());
  parallel_for(docs.size(), jobs, [&](std::size_t i) {
    Document d = docs[i];
    d.annotations.clear();
    std::vector<Annotation> found;
    for (const auto& s : segment(d)) {
      auto tags = model.tagger->predict(model.vocab.encode(s));
      for (auto& a : decode_bio(tags, s, d.text)) found.push_back(std::move(a));
    }
    d.annotations = std::move(found);
    validate_annotations(d);
    out[i] = std::move(d);
  });
  return out;
}

std::pair<std::vector<Document>, std::vector<Document>> dev_split(const std::vector<Document>& docs, double fraction,
                                                                  std::uint64_t seed, const std::string& name) {
  const std::size_t n = docs.size();
  const auto n_dev = std::size_t(std::llround(fraction * double(n)));
  if (fraction <= 0.0 || n == 0) throw Error("dev split of corpus '" + name + "' is empty");
  const std::size_t dev = std::max<std::size_t>(1, n_dev);
  if (dev >= n)
    throw Error("corpus '" + name + "' has too few documents (" + std::to_string(n) +
                ") for a training and a dev split");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<char> is_dev(n, 0);
  for (std::size_t i = 0; i < dev; ++i) is_dev[order[i]] = 1;
  std::pair<std::vector<Document>, std::vector<Document>> out;
  for (std::size_t i = 0; i < n; ++i) (is_dev[i] ? out.second : out.first).push_back(docs[i]);
  return out;
}

Model init_model(const std::vector<Stage>& stages, const TrainingConfig& config, const HeadConfig& head,
                 const TrainOptions& options) {
  config.validate();
  Model model;
  std::vector<const std::vector<Document>*> corpora;
  for (const auto& stage : stages)
    for (const auto& c : stage) {
      if (c.docs.empty()) throw Error("corpus '" + c.name + "' is empty");
      corpora.push_back(&c.docs);
      if (std::find(model.domains.begin(), model.domains.end(), c.name) == model.domains.end())
        model.domains.push_back(c.name);
    }
  for (const auto* extra : options.vocab_extra)
    if (!extra->empty()) corpora.push_back(extra);
  model.vocab = build_vocab(corpora);
  ModelShape shape{int(model.vocab.chars.size()), int(model.vocab.words.size()), LabelSet::num_tags(),
                   int(std::max<std::size_t>(1, model.domains.size()))};
  model.tagger.emplace(config, head, shape, config.seed);
  if (options.word_vectors) {
    auto table = model.tagger->params().get("embed.word").mat();
    for (std::size_t id = 2; id < model.vocab.words.size(); ++id) {
      auto it = options.word_vectors->find(model.vocab.words.entry(int(id)));
      if (it == options.word_vectors->end()) continue;
      if (int(it->second.size()) != config.word_emb_dim) throw Error("word vector dimension mismatch");
      table.col(Eigen::Index(id)) = Eigen::Map<const Eigen::VectorXd>(it->second.data(), Eigen::Index(it->second.size()));
    }
  }
  return model;
}

double train_epoch(Tagger& tagger, const Vocabulary& words, const std::vector<EncodedSentence>& sentences,
                   Rng& order_rng, Rng& dropout_rng) {
  const TrainingConfig& cfg = tagger.config();
  auto& store = tagger.params();
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  order_rng.shuffle(order);
  double total = 0.0;
  for (auto i : order) {
    EncodedSentence s = sentences[i];
    if (cfg.unk_replace > 0.0)
      for (auto& w : s.words)
        if (w > Vocabulary::kUnk && words.count(w) == 1 && order_rng.coin(cfg.unk_replace)) w = Vocabulary::kUnk;
    total += tagger.loss(s, &dropout_rng, true);
    store.clip_grad_norm(cfg.clip_norm);
    sgd_step(store, cfg.lr);
  }
  return total;
}

StageSummary train_stage(Model& model, const Stage& stage, int stage_index, const TrainOptions& options,
                         std::vector<EpochLog>* log) {
  if (!model.tagger) throw Error("model has no tagger");
  if (stage.empty()) throw Error("stage has no corpora");
  Tagger& tagger = *model.tagger;
  const TrainingConfig& cfg = tagger.config();
  const std::uint64_t stage_seed =
      derive_seed(derive_seed(options.seed.value_or(cfg.seed), kStageStream), std::uint64_t(stage_index));

  std::vector<Document> train_docs, dev_docs;
  std::vector<int> train_domain;
  for (std::size_t ci = 0; ci < stage.size(); ++ci) {
    const auto& c = stage[ci];
    auto it = std::find(model.domains.begin(), model.domains.end(), c.name);
    int domain = int(it - model.domains.begin());
    if (it == model.domains.end()) {
      if (tagger.head().kind != HeadKind::plain)
        throw Error("corpus '" + c.name + "' is not one of the model's domains");
      model.domains.push_back(c.name);
    }
    if (tagger.head().kind != HeadKind::plain && domain >= tagger.shape().n_domains)
      throw Error("domain id out of range for corpus '" + c.name + "'");
    auto [tr, dv] = dev_split(c.docs, cfg.dev_fraction, derive_seed(stage_seed, kSplitStream + ci), c.name);
    for (auto& d : tr) {
      train_docs.push_back(std::move(d));
      train_domain.push_back(domain);
    }
    for (auto& d : dv) dev_docs.push_back(std::move(d));
  }

  // Interleave merged corpora.
  std::vector<std::size_t> doc_order(train_docs.size());
  for (std::size_t i = 0; i < doc_order.size(); ++i) doc_order[i] = i;
  if (stage.size() > 1) {
    Rng merge(derive_seed(stage_seed, kMergeStream));
    merge.shuffle(doc_order);
  }
  std::vector<EncodedSentence> sentences;
  for (auto i : doc_order)
    for (const auto& s : segment(train_docs[i])) {
      auto enc = model.vocab.encode(s, &train_docs[i].annotations);
      enc.domain = train_domain[i];
      if (!enc.words.empty()) sentences.push_back(std::move(enc));
    }
  if (sentences.empty()) throw Error("stage " + std::to_string(stage_index) + " has no training sentences");

  auto& store = tagger.params();
  Rng dropout(derive_seed(stage_seed, kDropoutStream));
  StageSummary summary;
  summary.best_dev_f1 = -1.0;
  ParamSnapshot best = store.snapshot();
  int since = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng epoch_rng(derive_seed(derive_seed(stage_seed, kEpochStream), std::uint64_t(epoch)));
    const double total = train_epoch(tagger, model.vocab.words, sentences, epoch_rng, dropout);
    const double f1 = evaluate(dev_docs, predict_documents(model, dev_docs, options.jobs)).overall.f1();
    if (f1 > summary.best_dev_f1) {
      summary.best_dev_f1 = f1;
      summary.best_epoch = epoch;
      best = store.snapshot();
      since = 0;
    } else {
      ++since;
    }
    summary.epochs = epoch;
    EpochLog entry{stage_index, epoch, total, f1, since,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    if (log) log->push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);
    if (since > cfg.patience) break;
  }
  store.restore(best);
  return summary;
}

TrainResult execute_stages(const std::vector<Stage>& stages, const TrainingConfig& config, const HeadConfig& head,
                           const TrainOptions& options) {
  TrainResult result{init_model(stages, config, head, options), {}, {}};
  for (std::size_t i = 0; i < stages.size(); ++i)
    result.stages.push_back(train_stage(result.model, stages[i], int(i) + 1, options, &result.log));
  ojson summaries = ojson::array();
  for (const auto& s : result.stages)
    summaries.push_back({{"epochs", s.epochs}, {"best_epoch", s.best_epoch}, {"best_dev_f1", s.best_dev_f1}});
  result.model.info["stage_results"] = summaries;
  return result;
}

TrainResult run_plan(Strategy strategy, const std::vector<Stage>& stages, const TrainingConfig& config,
                     const HeadConfig& head, const TrainOptions& options) {
  std::vector<std::vector<std::string>> names;
  for (const auto& stage : stages) {
    names.emplace_back();
    for (const auto& c : stage) names.back().push_back(c.name);
  }
  validate_plan(strategy, names, head);
  ojson info = {{"strategy", to_string(strategy)}, {"seed", config.seed}, {"stages", names}};
  if (strategy == Strategy::fine_tuning) info["in_domain_stage"] = stages.size();
  auto result = execute_stages(stages, config, head, options);
  for (auto& [k, v] : result.model.info.items()) info[k] = v;
  result.model.info = std::move(info);
  return result;
}

std::vector<NamedCorpus> load_stage(const std::vector<std::string>& paths) {
  std::vector<NamedCorpus> out;
  for (const auto& p : paths) out.push_back({std::filesystem::path(p).stem().string(), load_corpus(p)});
  return out;
}

TrainResult run_plan_file(const TrainingPlan& plan, const TrainOptions& options) {
  std::vector<Stage> stages;
  std::map<std::string, std::string> path_of;
  for (const auto& paths : plan.stages) {
    for (const auto& p : paths) {
      const auto name = std::filesystem::path(p).stem().string();
      auto [it, fresh] = path_of.emplace(name, std::filesystem::weakly_canonical(p).string());
      if (!fresh && it->second != std::filesystem::weakly_canonical(p).string())
        throw Error("corpora '" + it->second + "' and '" + p + "' share the domain name '" + name + "'");
    }
  }
  std::vector<std::vector<std::string>> names;
  for (const auto& paths : plan.stages) {
    names.emplace_back();
    for (const auto& p : paths) names.back().push_back(std::filesystem::path(p).stem().string());
  }
  validate_plan(plan.strategy, names, plan.head);
  for (const auto& paths : plan.stages) stages.push_back(load_stage(paths));
  TrainOptions opts = options;
  WordVectors vectors;
  if (!plan.word_vectors.empty()) {
    vectors = load_word_vectors(plan.word_vectors, plan.config.word_emb_dim);
    opts.word_vectors = &vectors;
  }
  return run_plan(plan.strategy, stages, plan.config, plan.head, opts);
}

} // namespace deid
