#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deid/corpus.hpp"
#include "deid/heads.hpp"
#include "deid/lstm.hpp"
#include "deid/numerics.hpp"
#include "deid/vocab.hpp"

namespace deid {

struct ModelShape {
  int n_chars = 0;
  int n_words = 0;
  int n_tags = LabelSet::num_tags();
  int n_domains = 1;
};

// biLSTM-CRF tagger:
//   chars -> char embeddings -> char biLSTM (final states)
//   [word embedding ; char summary] -> token biLSTM -> emission layer -> CRF
// with one of three output heads (plain, CSD, JDL). Only the shared emission
// layer and the CRF are consulted at prediction time.
class Tagger {
public:
  Tagger(const TrainingConfig& config, const HeadConfig& head, const ModelShape& shape, std::uint64_t seed);

  const TrainingConfig& config() const { return config_; }
  const HeadConfig& head() const { return head_; }
  const ModelShape& shape() const { return shape_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  int token_rep_dim() const { return config_.word_emb_dim + 2 * config_.char_hidden; }
  int hidden_dim() const { return 2 * config_.token_hidden; }

  // Concatenated final forward/backward char-LSTM states.
  Eigen::VectorXd char_summary(const std::vector<int>& chars) const;
  // [word embedding ; char summary], prediction mode.
  Eigen::VectorXd token_representation(int word, const std::vector<int>& chars) const;
  // Per-token [forward ; backward] hidden states, columns are tokens.
  Eigen::MatrixXd token_bilstm(const Eigen::MatrixXd& reps) const;
  Eigen::MatrixXd encode(const EncodedSentence& sentence) const;
  // Shared emission layer (CSD: the common component).
  Eigen::MatrixXd emissions(const Eigen::MatrixXd& hidden) const;
  Eigen::MatrixXd transitions() const;

  // CSD: prediction returns {common}; training returns {common, W_d}.
  std::vector<Eigen::MatrixXd> csd_emissions(const Eigen::MatrixXd& hidden, int domain_id, bool training) const;
  Eigen::MatrixXd csd_domain_weights(int domain_id) const;
  double csd_penalty() const;
  // JDL: logits over domains from the mean-pooled hidden states.
  Eigen::VectorXd jdl_domain_logits(const Eigen::MatrixXd& hidden) const;

  std::vector<int> predict(const EncodedSentence& sentence) const;

  // Head training loss for one sentence. Dropout is active iff dropout_rng
  // is non-null. With with_grad the gradient is added to params().
  double loss(const EncodedSentence& sentence, Rng* dropout_rng, bool with_grad);

  // True for transition entries pinned to crf::kForbidden.
  bool pinned_transition(int from, int to) const;

private:
  struct Layout {
    std::size_t char_emb, word_emb;
    LstmLayer char_fw, char_bw, tok_fw, tok_bw;
    std::size_t emit_W, emit_b, trans;
    std::vector<std::size_t> csd_spec;
    std::size_t csd_gamma = 0;
    std::size_t jdl_V = 0, jdl_c = 0;
  };

  struct ForwardState;

  void initialize(std::uint64_t seed);
  void check_sentence(const EncodedSentence& sentence) const;
  Eigen::MatrixXd embed_chars(const std::vector<int>& chars) const;
  void forward(const EncodedSentence& sentence, Rng* dropout_rng, ForwardState& st) const;
  void backward(const EncodedSentence& sentence, const ForwardState& st, const Eigen::MatrixXd& d_hidden);
  double head_loss(const EncodedSentence& sentence, const Eigen::MatrixXd& hidden, bool with_grad,
                   Eigen::MatrixXd* d_hidden);

  TrainingConfig config_;
  HeadConfig head_;
  ModelShape shape_;
  ParameterStore store_;
  Layout lay_;
};

} // namespace deid
