#include "deid/network.hpp"

#include <cmath>

#include "deid/crf.hpp"
#include "deid/error.hpp"

namespace deid {

struct Tagger::ForwardState {
  std::vector<LstmTrace> char_fw, char_bw;
  Eigen::MatrixXd mask_in;   // rep_dim x T
  LstmTrace tok_fw, tok_bw;  // token_bw runs over reversed columns
  Eigen::MatrixXd mask_out;  // 2H x T
  Eigen::MatrixXd hidden;    // after output dropout
};

namespace {

Eigen::MatrixXd reversed(const Eigen::MatrixXd& m) { return m.rowwise().reverse(); }

void fill_embedding(ParamArray& table, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(table.rows() + 1));
  for (double& v : table.value) v = rng.uniform(-bound, bound);
  table.mat().col(0).setZero();  // padding row
}

// Removes from `v` its projection on every vector in `basis` (all unit norm).
void orthogonalize(Eigen::Map<Eigen::VectorXd> v, const std::vector<Eigen::VectorXd>& basis) {
  for (const auto& u : basis) v -= u.dot(v) * u;
}

} // namespace

Tagger::Tagger(const TrainingConfig& config, const HeadConfig& head, const ModelShape& shape, std::uint64_t seed)
    : config_(config), head_(head), shape_(shape) {
  config_.validate();
  if (shape_.n_chars < 2 || shape_.n_words < 2) throw Error("vocabularies must include pad and OOV entries");
  if (shape_.n_tags < 3 || shape_.n_tags % 2 == 0) throw Error("BIO tag count must be odd and at least 3");
  if (shape_.n_domains < 1) throw Error("model needs at least one domain");
  head_.validate(shape_.n_domains);

  const auto K = static_cast<std::size_t>(shape_.n_tags);
  const auto H2 = static_cast<std::size_t>(hidden_dim());
  lay_.char_emb = store_.add("embed.char", {std::size_t(config_.char_emb_dim), std::size_t(shape_.n_chars)}, true);
  lay_.word_emb = store_.add("embed.word", {std::size_t(config_.word_emb_dim), std::size_t(shape_.n_words)}, true);
  lay_.char_fw = LstmLayer::create(store_, "char_lstm.fw", config_.char_emb_dim, config_.char_hidden);
  lay_.char_bw = LstmLayer::create(store_, "char_lstm.bw", config_.char_emb_dim, config_.char_hidden);
  lay_.tok_fw = LstmLayer::create(store_, "token_lstm.fw", token_rep_dim(), config_.token_hidden);
  lay_.tok_bw = LstmLayer::create(store_, "token_lstm.bw", token_rep_dim(), config_.token_hidden);
  lay_.emit_W = store_.add("emission.W", {K, H2});
  lay_.emit_b = store_.add("emission.b", {K});
  lay_.trans = store_.add("crf.transitions", {K + 2, K + 2});
  if (head_.kind == HeadKind::csd) {
    for (int r = 0; r < head_.csd_rank; ++r)
      lay_.csd_spec.push_back(store_.add("csd.W_spec." + std::to_string(r), {K, H2}));
    lay_.csd_gamma = store_.add("csd.gamma", {std::size_t(shape_.n_domains), std::size_t(head_.csd_rank)});
  } else if (head_.kind == HeadKind::jdl) {
    lay_.jdl_V = store_.add("jdl.V", {std::size_t(shape_.n_domains), H2});
    lay_.jdl_c = store_.add("jdl.c", {std::size_t(shape_.n_domains)});
  }
  initialize(seed);
}

bool Tagger::pinned_transition(int from, int to) const {
  const int K = shape_.n_tags;
  const int S = crf::start_state(K), E = crf::end_state(K);
  if (to == S || from == E) return true;
  if (from == S && to == E) return true;
  if (to < K && LabelSet::is_inside(to)) {
    if (from == S) return true;
    if (from == LabelSet::kOutside) return true;
    if (LabelSet::type_of(from) != LabelSet::type_of(to)) return true;
  }
  return false;
}

void Tagger::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7A66E5));
  fill_embedding(store_[lay_.char_emb], rng);
  fill_embedding(store_[lay_.word_emb], rng);
  lay_.char_fw.initialize(store_, rng);
  lay_.char_bw.initialize(store_, rng);
  lay_.tok_fw.initialize(store_, rng);
  lay_.tok_bw.initialize(store_, rng);
  glorot_uniform(store_[lay_.emit_W], std::size_t(hidden_dim()), std::size_t(shape_.n_tags), rng);
  store_[lay_.emit_b].vec().setZero();

  auto T = store_[lay_.trans].mat();
  T.setZero();
  for (int i = 0; i < T.rows(); ++i)
    for (int j = 0; j < T.cols(); ++j)
      if (pinned_transition(i, j)) T(i, j) = crf::kForbidden;

  if (head_.kind == HeadKind::csd) {
    // Specific components start orthogonal to the common weights and to each
    // other (Gram-Schmidt on the flattened matrices), at their random scale.
    std::vector<Eigen::VectorXd> basis{store_[lay_.emit_W].vec().normalized()};
    for (auto idx : lay_.csd_spec) {
      auto& p = store_[idx];
      glorot_uniform(p, std::size_t(hidden_dim()), std::size_t(shape_.n_tags), rng);
      const double scale = p.vec().norm();
      orthogonalize(p.vec(), basis);
      orthogonalize(p.vec(), basis);
      p.vec() *= scale / p.vec().norm();
      basis.push_back(p.vec().normalized());
    }
    glorot_uniform(store_[lay_.csd_gamma], std::size_t(head_.csd_rank), std::size_t(shape_.n_domains), rng);
  } else if (head_.kind == HeadKind::jdl) {
    glorot_uniform(store_[lay_.jdl_V], std::size_t(hidden_dim()), std::size_t(shape_.n_domains), rng);
    store_[lay_.jdl_c].vec().setZero();
  }
}

void Tagger::check_sentence(const EncodedSentence& s) const {
  if (s.words.empty()) throw Error("sentence has no tokens");
  if (s.chars.size() != s.words.size()) throw Error("sentence word/char length mismatch");
  for (std::size_t t = 0; t < s.words.size(); ++t) {
    if (s.words[t] < 0 || s.words[t] >= shape_.n_words) throw Error("word id out of range");
    if (s.chars[t].empty()) throw Error("token without characters");
    for (int c : s.chars[t])
      if (c < 0 || c >= shape_.n_chars) throw Error("char id out of range");
  }
}

Eigen::MatrixXd Tagger::embed_chars(const std::vector<int>& chars) const {
  if (chars.empty()) throw Error("token without characters");
  auto table = store_[lay_.char_emb].mat();
  Eigen::MatrixXd x(config_.char_emb_dim, Eigen::Index(chars.size()));
  for (std::size_t l = 0; l < chars.size(); ++l) {
    int id = chars[l] >= 0 && chars[l] < shape_.n_chars ? chars[l] : Vocabulary::kUnk;
    x.col(Eigen::Index(l)) = table.col(id);
  }
  return x;
}

Eigen::VectorXd Tagger::char_summary(const std::vector<int>& chars) const {
  Eigen::MatrixXd x = embed_chars(chars);
  auto fw = lstm_forward(store_, lay_.char_fw, x);
  auto bw = lstm_forward(store_, lay_.char_bw, reversed(x));
  Eigen::VectorXd out(2 * config_.char_hidden);
  out << fw.h.col(fw.h.cols() - 1), bw.h.col(bw.h.cols() - 1);
  return out;
}

Eigen::VectorXd Tagger::token_representation(int word, const std::vector<int>& chars) const {
  if (word < 0 || word >= shape_.n_words) word = Vocabulary::kUnk;
  Eigen::VectorXd rep(token_rep_dim());
  rep << store_[lay_.word_emb].mat().col(word), char_summary(chars);
  return rep;
}

Eigen::MatrixXd Tagger::token_bilstm(const Eigen::MatrixXd& reps) const {
  if (reps.cols() < 1) throw Error("sentence has no tokens");
  auto fw = lstm_forward(store_, lay_.tok_fw, reps);
  auto bw = lstm_forward(store_, lay_.tok_bw, reversed(reps));
  Eigen::MatrixXd h(hidden_dim(), reps.cols());
  h.topRows(config_.token_hidden) = fw.h;
  h.bottomRows(config_.token_hidden) = reversed(bw.h);
  return h;
}

Eigen::MatrixXd Tagger::encode(const EncodedSentence& sentence) const {
  check_sentence(sentence);
  Eigen::MatrixXd reps(token_rep_dim(), Eigen::Index(sentence.size()));
  for (std::size_t t = 0; t < sentence.size(); ++t)
    reps.col(Eigen::Index(t)) = token_representation(sentence.words[t], sentence.chars[t]);
  return token_bilstm(reps);
}

Eigen::MatrixXd Tagger::emissions(const Eigen::MatrixXd& hidden) const {
  Eigen::MatrixXd e = store_[lay_.emit_W].mat() * hidden;
  e.colwise() += store_[lay_.emit_b].vec();
  return e;
}

Eigen::MatrixXd Tagger::transitions() const { return store_[lay_.trans].mat(); }

std::vector<int> Tagger::predict(const EncodedSentence& sentence) const {
  if (sentence.words.empty()) return {};
  return crf::viterbi(emissions(encode(sentence)), transitions()).first;
}

void Tagger::forward(const EncodedSentence& s, Rng* rng, ForwardState& st) const {
  check_sentence(s);
  const auto T = Eigen::Index(s.size());
  const bool training = rng != nullptr && config_.dropout > 0.0;

  Eigen::MatrixXd reps(token_rep_dim(), T);
  st.char_fw.clear();
  st.char_bw.clear();
  auto words = store_[lay_.word_emb].mat();
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::MatrixXd x = embed_chars(s.chars[std::size_t(t)]);
    st.char_fw.push_back(lstm_forward(store_, lay_.char_fw, x));
    st.char_bw.push_back(lstm_forward(store_, lay_.char_bw, reversed(x)));
    const auto& fw = st.char_fw.back();
    const auto& bw = st.char_bw.back();
    reps.col(t) << words.col(s.words[std::size_t(t)]), fw.h.col(fw.h.cols() - 1), bw.h.col(bw.h.cols() - 1);
  }

  st.mask_in = Eigen::MatrixXd::Ones(reps.rows(), T);
  if (training)
    for (Eigen::Index t = 0; t < T; ++t) st.mask_in.col(t) = dropout_mask(std::size_t(reps.rows()), config_.dropout, *rng);
  Eigen::MatrixXd x = reps.cwiseProduct(st.mask_in);

  st.tok_fw = lstm_forward(store_, lay_.tok_fw, x);
  st.tok_bw = lstm_forward(store_, lay_.tok_bw, reversed(x));
  Eigen::MatrixXd h(hidden_dim(), T);
  h.topRows(config_.token_hidden) = st.tok_fw.h;
  h.bottomRows(config_.token_hidden) = reversed(st.tok_bw.h);

  st.mask_out = Eigen::MatrixXd::Ones(h.rows(), T);
  if (training)
    for (Eigen::Index t = 0; t < T; ++t) st.mask_out.col(t) = dropout_mask(std::size_t(h.rows()), config_.dropout, *rng);
  st.hidden = h.cwiseProduct(st.mask_out);
}

void Tagger::backward(const EncodedSentence& s, const ForwardState& st, const Eigen::MatrixXd& d_hidden) {
  const int H = config_.token_hidden;
  const int ch = config_.char_hidden;
  const int wd = config_.word_emb_dim;
  const auto T = d_hidden.cols();

  Eigen::MatrixXd dh = d_hidden.cwiseProduct(st.mask_out);
  Eigen::MatrixXd dx = lstm_backward(store_, lay_.tok_fw, st.tok_fw, dh.topRows(H));
  dx += reversed(lstm_backward(store_, lay_.tok_bw, st.tok_bw, reversed(dh.bottomRows(H))));
  Eigen::MatrixXd d_reps = dx.cwiseProduct(st.mask_in);

  auto& words = store_[lay_.word_emb];
  auto& chars = store_[lay_.char_emb];
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto ti = std::size_t(t);
    const int w = s.words[ti];
    words.touch(std::size_t(w));
    words.gmat().col(w) += d_reps.col(t).head(wd);

    const auto L = Eigen::Index(s.chars[ti].size());
    Eigen::MatrixXd dh_fw = Eigen::MatrixXd::Zero(ch, L);
    Eigen::MatrixXd dh_bw = Eigen::MatrixXd::Zero(ch, L);
    dh_fw.col(L - 1) = d_reps.col(t).segment(wd, ch);
    dh_bw.col(L - 1) = d_reps.col(t).segment(wd + ch, ch);
    Eigen::MatrixXd dxc = lstm_backward(store_, lay_.char_fw, st.char_fw[ti], dh_fw);
    dxc += reversed(lstm_backward(store_, lay_.char_bw, st.char_bw[ti], dh_bw));
    for (Eigen::Index l = 0; l < L; ++l) {
      const int c = s.chars[ti][std::size_t(l)];
      chars.touch(std::size_t(c));
      chars.gmat().col(c) += dxc.col(l);
    }
  }
}

double Tagger::loss(const EncodedSentence& sentence, Rng* dropout_rng, bool with_grad) {
  if (sentence.tags.size() != sentence.words.size()) throw Error("sentence tags missing or of wrong length");
  ForwardState st;
  forward(sentence, dropout_rng, st);
  if (!with_grad) return head_loss(sentence, st.hidden, false, nullptr);

  Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(st.hidden.rows(), st.hidden.cols());
  const double value = head_loss(sentence, st.hidden, true, &d_hidden);
  backward(sentence, st, d_hidden);

  auto dT = store_[lay_.trans].gmat();
  for (int i = 0; i < dT.rows(); ++i)
    for (int j = 0; j < dT.cols(); ++j)
      if (pinned_transition(i, j)) dT(i, j) = 0.0;
  return value;
}

} // namespace deid
