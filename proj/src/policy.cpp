#include "prpolab/policy.hpp"

#include <algorithm>
#include <cmath>

#include "prpolab/error.hpp"
#include "prpolab/rng.hpp"

namespace prpolab {

std::string to_string(Parameterization p) {
  return p == Parameterization::TabularLogits ? "tabular-logits" : "linear-features";
}

Parameterization parameterization_from_string(const std::string& s) {
  if (s == "tabular-logits") return Parameterization::TabularLogits;
  if (s == "linear-features") return Parameterization::LinearFeatures;
  throw ConfigError("unknown parameterization '" + s + "'");
}

int PolicySpec::param_count() const {
  if (parameterization == Parameterization::TabularLogits)
    return num_contexts * max_len * vocab_size;
  return vocab_size * (num_contexts + max_len);
}

void PolicySpec::validate() const {
  if (vocab_size < 2) throw InvariantError("policy spec: vocab_size must be >= 2");
  if (max_len < 1) throw InvariantError("policy spec: max_len must be >= 1");
  if (num_contexts < 1) throw InvariantError("policy spec: num_contexts must be >= 1");
}

void validate_context(const PolicySpec& spec, int context) {
  if (context < 0 || context >= spec.num_contexts)
    throw InvariantError("context " + std::to_string(context) + " out of range [0, " +
                         std::to_string(spec.num_contexts) + ")");
}

void validate_sequence(const PolicySpec& spec, const TokenSequence& seq) {
  if (seq.empty() || static_cast<int>(seq.size()) > spec.max_len)
    throw InvariantError("sequence length " + std::to_string(seq.size()) +
                         " outside [1, " + std::to_string(spec.max_len) + "]");
  for (int tok : seq)
    if (tok < 0 || tok >= spec.vocab_size)
      throw InvariantError("token " + std::to_string(tok) + " outside vocabulary of size " +
                           std::to_string(spec.vocab_size));
}

PolicyParams init_policy(const PolicySpec& spec, uint64_t seed, double init_scale) {
  spec.validate();
  PolicyParams params;
  params.spec = spec;
  params.theta.resize(spec.param_count());
  Rng rng(seed);
  for (double& v : params.theta) v = init_scale * rng.gaussian();
  return params;
}

std::vector<double> token_logits(const PolicyParams& params, int context, int position) {
  const PolicySpec& spec = params.spec;
  validate_context(spec, context);
  if (position < 0 || position >= spec.max_len)
    throw InvariantError("position " + std::to_string(position) + " out of range");
  if (static_cast<int>(params.theta.size()) != spec.param_count())
    throw InvariantError("theta length does not match spec parameter count");

  std::vector<double> logits(spec.vocab_size);
  if (spec.parameterization == Parameterization::TabularLogits) {
    const int base = (context * spec.max_len + position) * spec.vocab_size;
    for (int v = 0; v < spec.vocab_size; ++v) logits[v] = params.theta[base + v];
  } else {
    const int num_features = spec.num_contexts + spec.max_len;
    for (int v = 0; v < spec.vocab_size; ++v)
      logits[v] = params.theta[v * num_features + context] +
                  params.theta[v * num_features + spec.num_contexts + position];
  }
  return logits;
}

std::vector<double> next_token_log_probs(const PolicyParams& params, int context, int position) {
  std::vector<double> logits = token_logits(params, context, position);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double lse = m + std::log(sum);
  for (double& l : logits) l -= lse;
  return logits;
}

std::vector<double> log_prob(const PolicyParams& params, int context, const TokenSequence& seq) {
  validate_sequence(params.spec, seq);
  std::vector<double> out(seq.size());
  for (size_t t = 0; t < seq.size(); ++t) {
    std::vector<double> lp = next_token_log_probs(params, context, static_cast<int>(t));
    out[t] = lp[seq[t]];
  }
  return out;
}

std::vector<double> grad_log_prob(const PolicyParams& params, int context, const TokenSequence& seq) {
  const PolicySpec& spec = params.spec;
  validate_sequence(spec, seq);
  validate_context(spec, context);
  std::vector<double> grad(spec.param_count(), 0.0);
  for (size_t t = 0; t < seq.size(); ++t) {
    std::vector<double> lp = next_token_log_probs(params, context, static_cast<int>(t));
    if (spec.parameterization == Parameterization::TabularLogits) {
      const int base = (context * spec.max_len + static_cast<int>(t)) * spec.vocab_size;
      for (int v = 0; v < spec.vocab_size; ++v) {
        const double indicator = (v == seq[t]) ? 1.0 : 0.0;
        grad[base + v] += indicator - std::exp(lp[v]);
      }
    } else {
      const int num_features = spec.num_contexts + spec.max_len;
      for (int v = 0; v < spec.vocab_size; ++v) {
        const double residual = ((v == seq[t]) ? 1.0 : 0.0) - std::exp(lp[v]);
        grad[v * num_features + context] += residual;
        grad[v * num_features + spec.num_contexts + static_cast<int>(t)] += residual;
      }
    }
  }
  return grad;
}

void add_logit_grad(const PolicyParams& params, int context, int position,
                    const std::vector<double>& dlogits, std::vector<double>& grad) {
  const PolicySpec& spec = params.spec;
  validate_context(spec, context);
  if (position < 0 || position >= spec.max_len)
    throw InvariantError("position " + std::to_string(position) + " out of range");
  if (static_cast<int>(dlogits.size()) != spec.vocab_size ||
      static_cast<int>(grad.size()) != spec.param_count())
    throw InvariantError("gradient buffer shape mismatch");

  if (spec.parameterization == Parameterization::TabularLogits) {
    const int base = (context * spec.max_len + position) * spec.vocab_size;
    for (int v = 0; v < spec.vocab_size; ++v) grad[base + v] += dlogits[v];
  } else {
    const int num_features = spec.num_contexts + spec.max_len;
    for (int v = 0; v < spec.vocab_size; ++v) {
      grad[v * num_features + context] += dlogits[v];
      grad[v * num_features + spec.num_contexts + position] += dlogits[v];
    }
  }
}

std::vector<Rollout> sample_rollouts(const PolicyParams& params, int question, int num_rollouts,
                                     uint64_t seed) {
  validate_context(params.spec, question);
  if (num_rollouts < 2)
    throw InvariantError("group statistics need at least two rollouts, got " +
                         std::to_string(num_rollouts));

  const int seq_len = params.spec.max_len;
  std::vector<Rollout> rollouts(num_rollouts);
  for (int i = 0; i < num_rollouts; ++i) {
    Rollout& r = rollouts[i];
    r.rollout_uid = (static_cast<uint64_t>(question) << 32) | static_cast<uint64_t>(i);
    r.question_id = question;
    r.tokens.resize(seq_len);
    r.old_logps.resize(seq_len);
    Rng rng(derive_seed(seed, static_cast<uint64_t>(question), static_cast<uint64_t>(i)));
    for (int t = 0; t < seq_len; ++t) {
      std::vector<double> lp = next_token_log_probs(params, question, t);
      const double u = rng.uniform();
      double cumulative = 0.0;
      int tok = params.spec.vocab_size - 1;  // fallback soaks rounding
      for (int v = 0; v < params.spec.vocab_size; ++v) {
        cumulative += std::exp(lp[v]);
        if (u < cumulative) {
          tok = v;
          break;
        }
      }
      r.tokens[t] = tok;
      r.old_logps[t] = lp[tok];
    }
  }
  return rollouts;
}

}  // namespace prpolab
