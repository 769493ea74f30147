#include "deid/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "deid/error.hpp"
#include "deid/numerics.hpp"

namespace deid {

double Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

EntitySet entities_of(const Document& doc) {
  EntitySet out;
  for (const auto& a : doc.annotations) out.insert({doc.id, a.start, a.end, a.phi_type});
  return out;
}

EntitySet entities_of(const std::vector<Document>& docs) {
  EntitySet out;
  for (const auto& d : docs) out.merge(entities_of(d));
  return out;
}

MetricsReport entity_prf(const EntitySet& gold, const EntitySet& pred,
                         const std::map<std::string, std::string>& note_types) {
  MetricsReport r;
  auto note_of = [&](const Entity& e) -> std::string {
    auto it = note_types.find(e.doc_id);
    return it == note_types.end() ? std::string() : it->second;
  };
  auto bump = [&](const Entity& e, long Counts::*field) {
    r.overall.*field += 1;
    r.by_type[e.phi_type].*field += 1;
    r.by_note_type[note_of(e)].*field += 1;
  };
  for (const auto& e : pred) bump(e, gold.count(e) ? &Counts::tp : &Counts::fp);
  for (const auto& e : gold)
    if (!pred.count(e)) bump(e, &Counts::fn);
  return r;
}

namespace {

std::map<std::string, const Document*> index_by_id(const std::vector<Document>& docs, const char* what) {
  std::map<std::string, const Document*> out;
  for (const auto& d : docs)
    if (!out.emplace(d.id, &d).second) throw Error(std::string("duplicate document id ") + d.id + " in " + what);
  return out;
}

} // namespace

MetricsReport evaluate(const std::vector<Document>& gold, const std::vector<Document>& pred) {
  auto g = index_by_id(gold, "gold corpus");
  auto p = index_by_id(pred, "predicted corpus");
  for (const auto& [id, _] : p)
    if (!g.count(id)) throw Error("predicted document " + id + " is not in the gold corpus");
  for (const auto& [id, _] : g)
    if (!p.count(id)) throw Error("gold document " + id + " has no prediction");
  std::map<std::string, std::string> notes;
  for (const auto& d : gold) notes[d.id] = d.note_type;
  return entity_prf(entities_of(gold), entities_of(pred), notes);
}

namespace {

void write_row(std::ostream& out, const std::string& scope, const std::string& key, const Counts& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-16s %7ld %7ld %7ld %7.4f %7.4f %7.4f\n", scope.c_str(),
                key.empty() ? "-" : key.c_str(), c.tp, c.fp, c.fn, c.precision(), c.recall(), c.f1());
  out << buf;
}

void write_csv_row(std::ostream& out, const std::string& scope, const std::string& key, const Counts& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, ",%ld,%ld,%ld,%.6f,%.6f,%.6f\n", c.tp, c.fp, c.fn, c.precision(), c.recall(),
                c.f1());
  out << scope << ',' << key << buf;
}

} // namespace

void write_report_table(std::ostream& out, const MetricsReport& report) {
  char head[256];
  std::snprintf(head, sizeof head, "%-10s %-16s %7s %7s %7s %7s %7s %7s\n", "scope", "key", "tp", "fp", "fn", "P",
                "R", "F1");
  out << head;
  write_row(out, "overall", "all", report.overall);
  for (const auto& [k, c] : report.by_type) write_row(out, "phi_type", k, c);
  for (const auto& [k, c] : report.by_note_type) write_row(out, "note_type", k, c);
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "scope,key,tp,fp,fn,P,R,F1\n";
  write_csv_row(out, "overall", "all", report.overall);
  for (const auto& [k, c] : report.by_type) write_csv_row(out, "phi_type", k, c);
  for (const auto& [k, c] : report.by_note_type) write_csv_row(out, "note_type", k, c);
}

std::vector<PairedDocument> pair_documents(const std::vector<Document>& gold, const std::vector<Document>& pred_a,
                                           const std::vector<Document>& pred_b) {
  auto a = index_by_id(pred_a, "system A");
  auto b = index_by_id(pred_b, "system B");
  index_by_id(gold, "gold corpus");
  if (a.size() != gold.size() || b.size() != gold.size())
    throw Error("system outputs do not cover the same documents as the gold corpus");
  std::vector<PairedDocument> out;
  for (const auto& g : gold) {
    auto ia = a.find(g.id), ib = b.find(g.id);
    if (ia == a.end() || ib == b.end()) throw Error("document " + g.id + " is missing from a system output");
    out.push_back({g.id, entities_of(g), entities_of(*ia->second), entities_of(*ib->second)});
  }
  return out;
}

namespace {

Counts score_doc(const EntitySet& gold, const EntitySet& pred) {
  Counts c;
  for (const auto& e : pred) (gold.count(e) ? c.tp : c.fp) += 1;
  c.fn = long(gold.size()) - c.tp;
  return c;
}

} // namespace

SignificanceResult approx_randomization(const std::vector<PairedDocument>& docs, std::size_t n_shuffles,
                                        std::uint64_t seed, unsigned jobs) {
  std::vector<Counts> ca, cb;
  Counts total_a, total_b;
  for (const auto& d : docs) {
    ca.push_back(score_doc(d.gold, d.a));
    cb.push_back(score_doc(d.gold, d.b));
    total_a += ca.back();
    total_b += cb.back();
  }
  SignificanceResult res;
  res.seed = seed;
  res.n_shuffles = n_shuffles;
  res.observed_delta = total_a.f1() - total_b.f1();
  const double threshold = std::abs(res.observed_delta) - 1e-12;

  auto run = [&](std::size_t from, std::size_t to) {
    std::size_t hits = 0;
    for (std::size_t s = from; s < to; ++s) {
      Rng rng(derive_seed(seed, s));
      Counts x, y;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        if (rng.coin()) {
          x += cb[i];
          y += ca[i];
        } else {
          x += ca[i];
          y += cb[i];
        }
      }
      if (std::abs(x.f1() - y.f1()) >= threshold) ++hits;
    }
    return hits;
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, unsigned(std::max<std::size_t>(1, n_shuffles))));
  if (jobs == 1) {
    res.at_least_as_extreme = run(0, n_shuffles);
  } else {
    std::vector<std::size_t> hits(jobs, 0);
    std::vector<std::thread> workers;
    for (unsigned j = 0; j < jobs; ++j) {
      std::size_t from = n_shuffles * j / jobs, to = n_shuffles * (j + 1) / jobs;
      workers.emplace_back([&, j, from, to] { hits[j] = run(from, to); });
    }
    for (auto& w : workers) w.join();
    for (auto h : hits) res.at_least_as_extreme += h;
  }
  res.p_value = double(res.at_least_as_extreme + 1) / double(n_shuffles + 1);
  return res;
}

} // namespace deid
