// deid: generate, harmonize, train, predict, evaluate, significance,
// learning-curve and sweep-order subcommands.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "deid/checkpoint.hpp"
#include "deid/corpus_io.hpp"
#include "deid/error.hpp"
#include "deid/evaluation.hpp"
#include "deid/harmonize.hpp"
#include "deid/learning_curve.hpp"
#include "deid/synthetic.hpp"
#include "deid/training.hpp"

namespace fs = std::filesystem;
using namespace deid;

namespace {

enum class Level { error = 0, info = 1, debug = 2 };

Level log_level() {
  const char* env = std::getenv("DEID_LOG_LEVEL");
  if (!env || !*env) return Level::info;
  const std::string v = env;
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  throw Error("DEID_LOG_LEVEL must be error, info or debug (got '" + v + "')");
}

void log(Level level, const std::string& msg) {
  static const Level current = log_level();
  if (level <= current) std::cerr << msg << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot write");
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(T(v));
    } catch (const std::exception&) {
      throw Error(std::string("invalid ") + what + " '" + item + "'");
    }
  }
  return out;
}

struct Common {
  std::uint64_t seed = 42;
  bool seed_given = false;
  unsigned jobs = 1;
  std::string config_path;
  std::vector<std::string> overrides;
};

// Plan config, then --config, then --set, then an explicit --seed.
void apply_common(TrainingPlan& plan, const Common& c) {
  if (!c.config_path.empty()) apply_config_json(plan.config, plan.head, read_json_file(c.config_path));
  for (const auto& o : c.overrides) apply_override(plan.config, plan.head, o);
  if (c.seed_given) plan.config.seed = c.seed;
  plan.config.validate();
}

TrainOptions train_options(const Common& c, std::ostream* stage_log) {
  TrainOptions opts;
  opts.jobs = c.jobs;
  opts.on_epoch = [stage_log](const EpochLog& e) {
    if (stage_log) *stage_log << format_log_line(e) << '\n' << std::flush;
    log(Level::info, "stage " + std::to_string(e.stage) + " epoch " + std::to_string(e.epoch) + ": " +
                         format_log_line(e));
  };
  return opts;
}

void write_stage_log_header(std::ostream& out) {
  out << "stage\tepoch\ttrain_loss\tdev_f1\tepochs_since_improvement\tseconds\n";
}

int cmd_generate(const std::string& spec_path, const std::string& out_path, const std::string& split_dir,
                 const Common& c) {
  SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : spec_from_json(read_json_file(spec_path));
  if (c.seed_given) spec.seed = c.seed;
  const auto docs = generate_synthetic(spec);
  save_corpus(docs, out_path);
  if (!split_dir.empty()) {
    fs::create_directories(split_dir);
    std::map<std::string, std::vector<Document>> by_domain;
    for (const auto& d : docs) by_domain[d.domain].push_back(d);
    for (const auto& [name, part] : by_domain) save_corpus(part, fs::path(split_dir) / (name + ".jsonl"));
  }
  log(Level::info, "wrote " + std::to_string(docs.size()) + " documents to " + out_path);
  return 0;
}

int cmd_harmonize(const std::string& in, const std::string& rules_path, const std::string& out,
                  const std::string& report_path) {
  const HarmonizationRules rules = rules_path.empty() ? HarmonizationRules::defaults() : load_rules(rules_path);
  rules.validate();
  std::vector<Document> docs;
  std::vector<HarmonizationChange> changes;
  for (const auto& d : load_corpus(in)) docs.push_back(harmonize(d, rules, &changes));
  save_corpus(docs, out);
  if (!report_path.empty()) {
    auto r = open_out(report_path);
    write_harmonization_report(r, changes);
  }
  log(Level::info, "harmonized " + std::to_string(docs.size()) + " documents, " + std::to_string(changes.size()) +
                       " annotations changed");
  return 0;
}

int cmd_train(const std::string& plan_path, const std::string& out, const std::string& log_path, const Common& c) {
  TrainingPlan plan = load_plan(plan_path);
  apply_common(plan, c);
  std::ofstream stage_log;
  if (!log_path.empty()) {
    stage_log = open_out(log_path);
    write_stage_log_header(stage_log);
  }
  auto result = run_plan_file(plan, train_options(c, log_path.empty() ? nullptr : &stage_log));
  save_checkpoint(out, result.model);
  log(Level::info, "saved checkpoint to " + out);
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& in, const std::string& out, const Common& c) {
  const Model model = load_checkpoint(model_path);
  save_corpus(predict_documents(model, load_corpus(in), c.jobs), out);
  return 0;
}

int cmd_evaluate(const std::string& gold, const std::string& pred, const std::string& csv, const std::string& table) {
  const auto report = evaluate(load_corpus(gold), load_corpus(pred));
  if (!csv.empty()) {
    auto out = open_out(csv);
    write_report_csv(out, report);
  }
  if (!table.empty()) {
    auto out = open_out(table);
    write_report_table(out, report);
  } else {
    write_report_table(std::cout, report);
  }
  return 0;
}

int cmd_significance(const std::string& gold, const std::string& a, const std::string& b, std::size_t shuffles,
                     const std::string& out_path, const Common& c) {
  const auto paired = pair_documents(load_corpus(gold), load_corpus(a), load_corpus(b));
  const auto r = approx_randomization(paired, shuffles, c.seed, c.jobs);
  ojson j = {{"observed_delta", r.observed_delta},
             {"n_shuffles", r.n_shuffles},
             {"at_least_as_extreme", r.at_least_as_extreme},
             {"p_value", r.p_value},
             {"seed", r.seed}};
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    auto out = open_out(out_path);
    out << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_learning_curve(const std::string& plan_path, const std::string& model_path, const std::string& pool_path,
                       const std::string& test_path, const std::string& sizes, const std::string& seeds,
                       const std::string& target_name, bool no_baseline, const std::string& out_path,
                       const Common& c) {
  if (plan_path.empty() == model_path.empty()) throw Error("give exactly one of --plan or --model");
  const auto pool = load_corpus(pool_path);
  const auto test = load_corpus(test_path);
  CurveSettings settings;
  settings.sizes = parse_list<int>(sizes, "size");
  settings.seeds = seeds.empty() ? std::vector<std::uint64_t>{c.seed} : parse_list<std::uint64_t>(seeds, "seed");
  settings.target_name = target_name.empty() ? fs::path(pool_path).stem().string() : target_name;
  settings.baseline = !no_baseline;
  if (settings.sizes.empty()) throw Error("no training sizes given");
  if (settings.seeds.empty()) throw Error("no seeds given");

  TrainOptions opts = train_options(c, nullptr);
  Model pretrained;
  if (!model_path.empty()) {
    pretrained = load_checkpoint(model_path);
  } else {
    TrainingPlan plan = load_plan(plan_path);
    apply_common(plan, c);
    TrainOptions pre = opts;
    pre.vocab_extra = {&pool};
    std::vector<Stage> stages;
    for (const auto& paths : plan.stages) stages.push_back(load_stage(paths));
    pretrained = run_plan(plan.strategy, stages, plan.config, plan.head, pre).model;
  }
  const auto points = learning_curve(pretrained, pool, test, settings, opts);
  auto out = open_out(out_path);
  write_curve_csv(out, points);
  return 0;
}

int cmd_sweep_order(const std::string& plan_path, const std::string& eval_path, const std::string& out_path,
                    const Common& c) {
  TrainingPlan plan = load_plan(plan_path);
  apply_common(plan, c);
  if (plan.strategy != Strategy::sequential && plan.strategy != Strategy::fine_tuning)
    throw Error("sweep-order needs a sequential or fine_tuning plan");
  const auto eval = load_corpus(eval_path);
  // Fine-tuning keeps its in-domain stage last.
  const std::size_t movable = plan.stages.size() - (plan.strategy == Strategy::fine_tuning ? 1 : 0);
  std::vector<std::size_t> perm(movable);
  for (std::size_t i = 0; i < movable; ++i) perm[i] = i;

  auto out = open_out(out_path);
  out << "order,F1\n";
  std::string best_order;
  double best = -1.0;
  do {
    TrainingPlan p = plan;
    std::string order;
    for (std::size_t i = 0; i < movable; ++i) {
      p.stages[i] = plan.stages[perm[i]];
      for (const auto& path : p.stages[i]) order += (order.empty() ? "" : ">") + fs::path(path).stem().string();
    }
    for (std::size_t i = movable; i < plan.stages.size(); ++i)
      for (const auto& path : p.stages[i]) order += ">" + fs::path(path).stem().string();
    const auto result = run_plan_file(p, train_options(c, nullptr));
    const double f1 = evaluate(eval, predict_documents(result.model, eval, c.jobs)).overall.f1();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", f1);
    out << order << ',' << buf << '\n';
    log(Level::info, order + ": F1 " + buf);
    if (f1 > best) {
      best = f1;
      best_order = order;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::cout << "best order: " << best_order << " (F1 " << best << ")\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural clinical de-identification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  auto* seed_opt = app.add_option("--seed", common.seed, "Random seed (default 42)");
  app.add_option("--jobs", common.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--config", common.config_path, "JSON config {\"training\": {...}, \"head\": {...}}");
  app.add_option("--set", common.overrides, "Override, e.g. training.lr=0.01 or head.kind=csd");

  std::string spec, out, split_dir, in, rules, report, plan, log_path, model, gold, pred, csv, table, a, b;
  std::string pool, test, sizes, seeds, target_name, eval;
  std::size_t shuffles = 10000;
  bool no_baseline = false;

  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-domain corpus");
  gen->add_option("--spec", spec, "Synthetic spec JSON");
  gen->add_option("--out", out, "Output corpus")->required();
  gen->add_option("--split-dir", split_dir, "Also write one corpus per domain here");

  auto* harm = app.add_subcommand("harmonize", "Map a corpus onto the shared PHI label set");
  harm->add_option("--in", in, "Input corpus")->required();
  harm->add_option("--rules", rules, "Rules JSON (default: built-in)");
  harm->add_option("--out", out, "Output corpus")->required();
  harm->add_option("--report", report, "JSONL list of every changed annotation");

  auto* train = app.add_subcommand("train", "Run a training plan");
  train->add_option("--plan", plan, "Plan JSON")->required();
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--log", log_path, "Stage log path");

  auto* predict = app.add_subcommand("predict", "Tag a corpus with a checkpoint");
  predict->add_option("--model", model, "Checkpoint")->required();
  predict->add_option("--in", in, "Input corpus")->required();
  predict->add_option("--out", out, "Output corpus")->required();

  auto* evalc = app.add_subcommand("evaluate", "Exact-span entity scores");
  evalc->add_option("--gold", gold, "Gold corpus")->required();
  evalc->add_option("--pred", pred, "Predicted corpus")->required();
  evalc->add_option("--csv", csv, "CSV report path");
  evalc->add_option("--table", table, "Table report path (default: stdout)");

  auto* sig = app.add_subcommand("significance", "Approximate randomization test on F1");
  sig->add_option("--gold", gold, "Gold corpus")->required();
  sig->add_option("--a", a, "System A predictions")->required();
  sig->add_option("--b", b, "System B predictions")->required();
  sig->add_option("--shuffles", shuffles, "Number of shuffles");
  sig->add_option("--out", out, "JSON result path (default: stdout)");

  auto* curve = app.add_subcommand("learning-curve", "Fine-tuned vs baseline learning curve");
  curve->add_option("--plan", plan, "Pretraining plan");
  curve->add_option("--model", model, "Pretrained checkpoint");
  curve->add_option("--pool", pool, "In-domain training pool")->required();
  curve->add_option("--test", test, "Held-out test corpus")->required();
  curve->add_option("--sizes", sizes, "Comma-separated training sizes")->required();
  curve->add_option("--seeds", seeds, "Comma-separated seeds (default: --seed)");
  curve->add_option("--target-name", target_name, "Domain name of the pool");
  curve->add_flag("--no-baseline", no_baseline, "Skip the from-scratch curve");
  curve->add_option("--out", out, "Curve CSV")->required();

  auto* sweep = app.add_subcommand("sweep-order", "Train every stage order of a sequential plan");
  sweep->add_option("--plan", plan, "Plan JSON")->required();
  sweep->add_option("--eval", eval, "Corpus to score each order on")->required();
  sweep->add_option("--out", out, "CSV of order and F1")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  common.seed_given = seed_opt->count() > 0;

  try {
    log_level();
    if (*gen) return cmd_generate(spec, out, split_dir, common);
    if (*harm) return cmd_harmonize(in, rules, out, report);
    if (*train) return cmd_train(plan, out, log_path, common);
    if (*predict) return cmd_predict(model, in, out, common);
    if (*evalc) return cmd_evaluate(gold, pred, csv, table);
    if (*sig) return cmd_significance(gold, a, b, shuffles, out, common);
    if (*curve)
      return cmd_learning_curve(plan, model, pool, test, sizes, seeds, target_name, no_baseline, out, common);
    if (*sweep) return cmd_sweep_order(plan, eval, out, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
