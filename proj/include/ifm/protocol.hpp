#pragma once

#include <array>
#include <vector>

#include "ifm/types.hpp"

namespace ifm::protocol {

enum class StrategyKind { SingleTest, RepeatGroupI, PurifyGroupII };

// A classification procedure: one test per object, retest group i until the
// object leaves it, or demand N consecutive group-ii outcomes.
struct Strategy {
    StrategyKind kind = StrategyKind::SingleTest;
    int purify_rounds = 1;  // N, only meaningful for PurifyGroupII

    void validate() const {
        if (kind == StrategyKind::PurifyGroupII && purify_rounds < 1)
            throw ValidationError("purification needs N >= 1 rounds");
    }
};

const char* to_string(StrategyKind kind);

// p(group) for one test of the given object kind; transparent objects are
// never absorbed, so their third component is zero.
std::array<double, 3> single_test_distribution(const OutcomeProbabilities& probs_black,
                                               const OutcomeProbabilities& probs_trans,
                                               ObjectKind object);

// Limits of retesting group i forever: the chance of eventually landing in
// group ii, p_ii * sum_n p_i^n = p_ii/(1-p_i), and the complementary
// absorption limit for a black object.
struct RepeatLimit {
    double reach_group_ii = 0.0;
    double absorbed = 0.0;  // 1 - reach_group_ii; meaningful for black objects
};

RepeatLimit repeat_group_i_limit(double p_i, double p_ii);

// One point of the enrichment/depletion curves over the original black
// fraction f. Flags are false where both contributing probabilities vanish.
struct EnrichmentPoint {
    double f_original = 0.0;
    ValueSigma black_in_ii;
    ValueSigma trans_in_i;
    bool black_in_ii_defined = false;
    bool trans_in_i_defined = false;
};

std::vector<EnrichmentPoint> enrichment_curve(const OutcomeProbabilities& probs_black,
                                              const OutcomeProbabilities& probs_trans,
                                              const std::vector<double>& f_grid);

EnrichmentPoint enrichment_point(const OutcomeProbabilities& probs_black,
                                 const OutcomeProbabilities& probs_trans, double f_original);

// Likelihood ratio and yield of N-fold group-ii purification. A zero
// transparent probability makes the ratio unbounded; that state is carried
// explicitly instead of as a floating-point infinity.
struct PurificationResult {
    double likelihood_ratio = 0.0;  // meaningful only when !unbounded
    bool unbounded = false;
    double black_yield = 0.0;       // (p_black_ii)^N
};

PurificationResult purification(double p_black_ii, double p_trans_ii, int rounds);

// Bayes update of the black fraction by a likelihood ratio.
double posterior_purity(double f_original, double likelihood_ratio);

// Mean neutrons spent per test under a geometric retry model: an undetected,
// unabsorbed neutron (probability (1-efficiency)(p_i+p_ii)) triggers a retry.
// This is one explicit model of the detection bookkeeping, not a claim about
// any particular instrument's averaging.
double expected_neutrons_per_test(const OutcomeProbabilities& probs, double detector_efficiency,
                                  bool retry_on_no_registration);

// Fraction of black objects inside the final group ii under a strategy, at
// original fraction f. Used to compare strategies at equal priors.
double strategy_group_ii_purity(const Strategy& strategy, const OutcomeProbabilities& probs_black,
                                const OutcomeProbabilities& probs_trans, double f_original);

// P(object ends in each group) under a strategy, by object kind.
std::array<double, 3> strategy_group_distribution(const Strategy& strategy,
                                                  const OutcomeProbabilities& probs,
                                                  ObjectKind object);

}  // namespace ifm::protocol
