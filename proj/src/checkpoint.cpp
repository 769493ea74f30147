#include "deid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "deid/error.hpp"
#include "deid/text.hpp"

namespace deid {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'I', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(path + ": truncated checkpoint");
  return v;
}

ojson vocab_json(const Vocabulary& v) {
  ojson entries = ojson::array(), counts = ojson::array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    entries.push_back(utf8_encode(v.entry(int(i))));
    counts.push_back(v.count(int(i)));
  }
  return {{"entries", entries}, {"counts", counts}};
}

Vocabulary vocab_from(const ojson& j) {
  Vocabulary v;
  const auto& entries = j.at("entries");
  const auto& counts = j.at("counts");
  if (entries.size() != counts.size() || entries.size() < 2) throw Error("malformed vocabulary in checkpoint");
  if (entries[0] != "<pad>" || entries[1] != "<unk>") throw Error("checkpoint vocabulary lacks pad/OOV entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const int id = i < 2 ? int(i) : v.add(utf8_decode(entries[i].get<std::string>()));
    if (id != int(i)) throw Error("duplicate vocabulary entry in checkpoint");
    v.set_count(id, counts[i].get<int>());
  }
  return v;
}

} // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  if (!model.tagger) throw Error("cannot save a model without a tagger");
  const Tagger& t = *model.tagger;
  ojson labels = ojson::array();
  for (int k = 0; k < t.shape().n_tags; ++k) labels.push_back(LabelSet::tag_name(k));
  ojson params = ojson::array();
  for (const auto& p : t.params()) params.push_back({{"name", p.name}, {"shape", p.shape}, {"dtype", "float64"}});
  ojson header = {{"config", to_json(t.config())},
                  {"head", to_json(t.head())},
                  {"labels", labels},
                  {"shape",
                   {{"n_chars", t.shape().n_chars},
                    {"n_words", t.shape().n_words},
                    {"n_tags", t.shape().n_tags},
                    {"n_domains", t.shape().n_domains}}},
                  {"domains", model.domains},
                  {"vocab", {{"words", vocab_json(model.vocab.words)}, {"chars", vocab_json(model.vocab.chars)}}},
                  {"info", model.info},
                  {"params", params}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot write checkpoint");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), std::streamsize(text.size()));
  for (const auto& p : t.params())
    out.write(reinterpret_cast<const char*>(p.value.data()), std::streamsize(p.value.size() * sizeof(double)));
  if (!out) throw Error(path + ": write failed");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error(path + ": not a checkpoint file");
  const auto version = take<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw Error(path + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                std::to_string(kCheckpointVersion) + ")");
  const auto len = take<std::uint64_t>(in, path);
  if (len > (1ull << 32)) throw Error(path + ": implausible header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), std::streamsize(len))) throw Error(path + ": truncated checkpoint header");

  Model model;
  try {
    const ojson header = ojson::parse(text);
    TrainingConfig config;
    HeadConfig head;
    apply_json(config, header.at("config"));
    apply_json(head, header.at("head"));
    const auto& labels = header.at("labels");
    if (int(labels.size()) != LabelSet::num_tags()) throw Error("label set does not match this build");
    for (int k = 0; k < LabelSet::num_tags(); ++k)
      if (labels[std::size_t(k)] != LabelSet::tag_name(k)) throw Error("label set does not match this build");
    const auto& sh = header.at("shape");
    ModelShape shape{sh.at("n_chars").get<int>(), sh.at("n_words").get<int>(), sh.at("n_tags").get<int>(),
                     sh.at("n_domains").get<int>()};
    model.vocab.words = vocab_from(header.at("vocab").at("words"));
    model.vocab.chars = vocab_from(header.at("vocab").at("chars"));
    if (int(model.vocab.words.size()) != shape.n_words || int(model.vocab.chars.size()) != shape.n_chars)
      throw Error("vocabulary size does not match model shape");
    model.domains = header.at("domains").get<std::vector<std::string>>();
    model.info = header.at("info");
    model.tagger.emplace(config, head, shape, 0);

    const auto& params = header.at("params");
    auto& store = model.tagger->params();
    if (params.size() != store.size()) throw Error("parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = store[i];
      const auto name = params[i].at("name").get<std::string>();
      const auto shape_i = params[i].at("shape").get<std::vector<std::size_t>>();
      if (name != p.name) throw Error("parameter " + std::to_string(i) + " is '" + name + "', expected '" + p.name + "'");
      if (shape_i != p.shape) throw Error("shape mismatch for parameter '" + name + "'");
      if (params[i].at("dtype") != "float64") throw Error("unsupported dtype for parameter '" + name + "'");
      if (!in.read(reinterpret_cast<char*>(p.value.data()), std::streamsize(p.value.size() * sizeof(double))))
        throw Error("truncated values for parameter '" + name + "'");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes after parameter data");
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(path + ": malformed checkpoint header: " + e.what());
  }
  return model;
}

} // namespace deid
