#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prpolab {

enum class Parameterization { TabularLogits, LinearFeatures };

std::string to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& s);

// Softmax sequence policy over a fixed vocabulary. Tabular mode keeps one
// logit per (context, position, token) so every sequence distribution is
// enumerable and gradients are closed-form. Linear mode shares weights through
// the feature map one-hot(context) ++ one-hot(position).
struct PolicySpec {
  int vocab_size = 2;
  int max_len = 1;
  int num_contexts = 1;
  Parameterization parameterization = Parameterization::TabularLogits;

  int param_count() const;
  void validate() const;
  bool operator==(const PolicySpec&) const = default;
};

struct PolicyParams {
  PolicySpec spec;
  std::vector<double> theta;
};

using TokenSequence = std::vector<int>;

// One sampled response. Old-policy log-probs are recorded at sampling time;
// rewards are filled in by the environment after sampling.
struct Rollout {
  uint64_t rollout_uid = 0;
  int question_id = 0;
  int capability_uid = 0;
  TokenSequence tokens;
  std::vector<double> old_logps;
  std::vector<double> rewards;
};

// theta entries are init_scale * N(0,1), drawn sequentially from
// mt19937_64(seed) via Box-Muller. Same (spec, seed, scale) => same theta.
PolicyParams init_policy(const PolicySpec& spec, uint64_t seed, double init_scale = 1.0);

// Logits for the next token at (context, position), length vocab_size.
std::vector<double> token_logits(const PolicyParams& params, int context, int position);

// log softmax(logits) at (context, position), length vocab_size.
std::vector<double> next_token_log_probs(const PolicyParams& params, int context, int position);

// Per-token log-probs of seq under the policy, length seq.size().
std::vector<double> log_prob(const PolicyParams& params, int context, const TokenSequence& seq);

// Gradient of the total sequence log-prob w.r.t. theta (dense, param_count).
std::vector<double> grad_log_prob(const PolicyParams& params, int context, const TokenSequence& seq);

// scatter d(objective)/d(logit_v) at one (context, position) slot into a
// parameter-space gradient
void add_logit_grad(const PolicyParams& params, int context, int position,
                    const std::vector<double>& dlogits, std::vector<double>& grad);

// G autoregressive samples of length max_len for one question (= context).
// Rollout i draws from an engine seeded with derive_seed(seed, question, i),
// so results are identical whether rollouts are sampled serially or in
// parallel. rollout_uid = question * 2^32 + i.
std::vector<Rollout> sample_rollouts(const PolicyParams& params, int question, int num_rollouts,
                                     uint64_t seed);

void validate_sequence(const PolicySpec& spec, const TokenSequence& seq);
void validate_context(const PolicySpec& spec, int context);

}  // namespace prpolab
