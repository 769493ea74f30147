#include "deid/learning_curve.hpp"

#include <cstdio>
#include <map>
#include <ostream>

#include "deid/error.hpp"
#include "deid/evaluation.hpp"

namespace deid {

std::vector<std::vector<Document>> nested_samples(const std::vector<Document>& pool, const std::vector<int>& sizes,
                                                  std::uint64_t seed) {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 0) throw Error("training sizes must be non-negative");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw Error("training sizes must be strictly increasing");
  }
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < pool.size(); ++i) by_type[pool[i].note_type].push_back(i);
  if (by_type.empty() && !sizes.empty() && sizes.back() > 0) throw Error("training pool is empty");
  std::uint64_t stream = 0;
  for (auto& [type, idx] : by_type) {
    Rng rng(derive_seed(seed, stream++));
    rng.shuffle(idx);
  }

  std::vector<std::vector<Document>> out;
  const auto n_types = by_type.size();
  for (int size : sizes) {
    std::vector<char> take(pool.size(), 0);
    std::size_t t = 0;
    for (const auto& [type, idx] : by_type) {
      const std::size_t quota = std::size_t(size) / n_types + (t < std::size_t(size) % n_types ? 1 : 0);
      if (quota > idx.size())
        throw Error("training size " + std::to_string(size) + " needs " + std::to_string(quota) +
                    " documents of note type '" + type + "' but only " + std::to_string(idx.size()) +
                    " are available");
      for (std::size_t k = 0; k < quota; ++k) take[idx[k]] = 1;
      ++t;
    }
    out.emplace_back();
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (take[i]) out.back().push_back(pool[i]);
  }
  return out;
}

namespace {

void add_points(std::vector<CurvePoint>& out, const std::string& strategy, int size, std::uint64_t seed,
                const MetricsReport& report) {
  out.push_back({strategy, size, seed, "all", report.overall.f1()});
  for (const auto& [type, c] : report.by_note_type) out.push_back({strategy, size, seed, type, c.f1()});
}

} // namespace

std::vector<CurvePoint> learning_curve(const Model& pretrained, const std::vector<Document>& pool,
                                       const std::vector<Document>& test, const CurveSettings& settings,
                                       const TrainOptions& options) {
  if (!pretrained.tagger) throw Error("pretrained model has no tagger");
  if (test.empty()) throw Error("test corpus is empty");
  std::vector<CurvePoint> out;
  for (auto seed : settings.seeds) {
    const auto samples = nested_samples(pool, settings.sizes, seed);
    TrainOptions opts = options;
    opts.seed = seed;
    for (std::size_t i = 0; i < settings.sizes.size(); ++i) {
      const int size = settings.sizes[i];
      const Stage stage{{settings.target_name, samples[i]}};

      Model tuned = pretrained;
      if (size > 0) train_stage(tuned, stage, 1, opts);
      add_points(out, "fine_tuned", size, seed, evaluate(test, predict_documents(tuned, test, opts.jobs)));

      if (settings.baseline) {
        Model fresh;
        fresh.vocab = pretrained.vocab;
        fresh.domains = {settings.target_name};
        TrainingConfig cfg = pretrained.tagger->config();
        cfg.seed = seed;
        ModelShape shape = pretrained.tagger->shape();
        shape.n_domains = 1;
        fresh.tagger.emplace(cfg, HeadConfig{}, shape, seed);
        if (size > 0) train_stage(fresh, stage, 1, opts);
        add_points(out, "baseline", size, seed, evaluate(test, predict_documents(fresh, test, opts.jobs)));
      }
    }
  }
  return out;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << "strategy,size,seed,note_type,F1\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.6f", p.f1);
    out << p.strategy << ',' << p.size << ',' << p.seed << ',' << p.note_type << ',' << buf << '\n';
  }
}

} // namespace deid
