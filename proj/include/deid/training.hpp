#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deid/checkpoint.hpp"
#include "deid/corpus.hpp"

namespace deid {

enum class Strategy { in_domain, sequential, fine_tuning, concurrent };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

// A corpus and the name that identifies its domain.
struct NamedCorpus {
  std::string name;
  std::vector<Document> docs;
};

using Stage = std::vector<NamedCorpus>;

// Plan file contents; stages hold corpus paths.
struct TrainingPlan {
  Strategy strategy = Strategy::in_domain;
  TrainingConfig config;
  HeadConfig head;
  std::vector<std::vector<std::string>> stages;
  std::string word_vectors;  // optional pretrained embedding file
};

// Relative corpus paths are resolved against base_dir.
TrainingPlan plan_from_json(const ojson& j, const std::string& base_dir = "");
ojson plan_to_json(const TrainingPlan& plan);
TrainingPlan load_plan(const std::string& path);

// Shape rules for each strategy, and at least two domains for csd/jdl.
void validate_plan(Strategy strategy, const std::vector<std::vector<std::string>>& stage_names,
                   const HeadConfig& head);

struct EpochLog {
  int stage = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  int since_improvement = 0;
  double seconds = 0.0;
};

// Tab-separated: stage, epoch, train loss, dev F1, patience counter, seconds.
std::string format_log_line(const EpochLog& e, bool with_time = true);

using WordVectors = std::map<std::u32string, std::vector<double>>;

// One token per line followed by exactly `dim` reals.
WordVectors load_word_vectors(const std::string& path, int dim);

struct TrainOptions {
  unsigned jobs = 1;
  std::function<void(const EpochLog&)> on_epoch;
  // Extra documents whose tokens join the vocabulary (never trained on).
  std::vector<const std::vector<Document>*> vocab_extra;
  const WordVectors* word_vectors = nullptr;
  // Replaces the model's configured seed for shuffling, splits and dropout.
  std::optional<std::uint64_t> seed;
};

struct StageSummary {
  int epochs = 0;
  int best_epoch = 0;
  double best_dev_f1 = 0.0;
};

// Fresh model over the union vocabulary of all stages (plus vocab_extra) and
// the distinct corpus names as domains.
Model init_model(const std::vector<Stage>& stages, const TrainingConfig& config, const HeadConfig& head,
                 const TrainOptions& options = {});

// One shuffled pass of single-sentence SGD with gradient clipping, dropout and
// singleton-to-OOV replacement (by counts in `words`). Returns the summed loss.
double train_epoch(Tagger& tagger, const Vocabulary& words, const std::vector<EncodedSentence>& sentences,
                   Rng& order_rng, Rng& dropout_rng);

// Runs seeded-shuffled single-sentence SGD on the stage's training split with
// early stopping on its dev split, leaving the best-dev parameters in place.
StageSummary train_stage(Model& model, const Stage& stage, int stage_index, const TrainOptions& options = {},
                         std::vector<EpochLog>* log = nullptr);

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::vector<StageSummary> stages;
};

// Validates the plan, builds the model and runs its stages. Concurrent plans
// merge their corpora into one stage.
TrainResult run_plan(Strategy strategy, const std::vector<Stage>& stages, const TrainingConfig& config,
                     const HeadConfig& head, const TrainOptions& options = {});

// Same, without strategy validation: stages run in order carrying parameters.
TrainResult execute_stages(const std::vector<Stage>& stages, const TrainingConfig& config, const HeadConfig& head,
                           const TrainOptions& options = {});

std::vector<NamedCorpus> load_stage(const std::vector<std::string>& paths);
TrainResult run_plan_file(const TrainingPlan& plan, const TrainOptions& options = {});

// Documents with annotations replaced by the model's predictions. Gold
// annotations never influence tokenization.
std::vector<Document> predict_documents(const Model& model, const std::vector<Document>& docs, unsigned jobs = 1);

// Splits docs into (train, dev) with round(dev_fraction * n) dev documents
// (at least one) chosen by a seeded shuffle; input order is kept within each part.
std::pair<std::vector<Document>, std::vector<Document>> dev_split(const std::vector<Document>& docs, double fraction,
                                                                  std::uint64_t seed, const std::string& name);

// Calls fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

} // namespace deid
