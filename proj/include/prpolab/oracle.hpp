#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "prpolab/advantage.hpp"
#include "prpolab/policy.hpp"

namespace prpolab::oracle {

// central finite differences; independent of any analytic gradient code
std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& at,
    double h = 1e-5);

// exact expectation of a per-sequence statistic under the policy for one
// context, by enumerating every possible sequence (vocab^len must stay small)
double enumerate_expectation(const PolicyParams& params, int context,
                             const std::function<double(const TokenSequence&)>& f);

// deliberately plain re-derivation of grouped standardized advantages, kept
// free of the production statistics helpers so the two can cross-check
std::map<std::pair<uint64_t, int>, double> reference_advantages(
    const std::vector<Rollout>& rollouts, const std::map<uint64_t, GroupKey>& assignment,
    bool per_dim, const std::vector<double>& weights = {});

}  // namespace prpolab::oracle
