#include "ifm/protocol.hpp"

#include <cmath>

namespace ifm::protocol {

const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::SingleTest: return "single";
        case StrategyKind::RepeatGroupI: return "repeat-i";
        default: return "purify-ii";
    }
}

std::array<double, 3> single_test_distribution(const OutcomeProbabilities& probs_black,
                                               const OutcomeProbabilities& probs_trans,
                                               ObjectKind object) {
    if (object == ObjectKind::Black) {
        if (!probs_black.p_iii) throw ValidationError("black probability row lacks p_iii");
        return {probs_black.p_i.value, probs_black.p_ii.value, probs_black.p_iii->value};
    }
    return {probs_trans.p_i.value, probs_trans.p_ii.value, 0.0};
}

RepeatLimit repeat_group_i_limit(double p_i, double p_ii) {
    if (!(p_i >= 0.0 && p_i <= 1.0) || !(p_ii >= 0.0) || p_i + p_ii > 1.0 + 1e-12)
        throw ValidationError("repeat limit needs 0 <= p_i, p_ii with p_i + p_ii <= 1");
    if (p_i >= 1.0) throw DivergenceError("p_i = 1: the object never leaves group i");
    double reach = p_ii / (1.0 - p_i);
    return {reach, 1.0 - reach};
}

EnrichmentPoint enrichment_point(const OutcomeProbabilities& probs_black,
                                 const OutcomeProbabilities& probs_trans, double f_original) {
    if (!(f_original >= 0.0 && f_original <= 1.0))
        throw ValidationError("original fraction must lie in [0,1]");
    if (!probs_black.p_iii) throw ValidationError("black probability row lacks p_iii");

    EnrichmentPoint point;
    point.f_original = f_original;
    const double f = f_original;
    const double g = 1.0 - f;

    // Black fraction within group ii after a single test.
    {
        double a = probs_black.p_ii.value, sa = probs_black.p_ii.sigma;
        double b = probs_trans.p_ii.value, sb = probs_trans.p_ii.sigma;
        double den = f * a + g * b;
        if (den > 0.0) {
            double value = f * a / den;
            double sigma = f * g * std::sqrt(b * b * sa * sa + a * a * sb * sb) / (den * den);
            point.black_in_ii = {value, sigma};
            point.black_in_ii_defined = true;
        }
    }
    // Transparent fraction within group i.
    {
        double a = probs_trans.p_i.value, sa = probs_trans.p_i.sigma;
        double b = probs_black.p_i.value, sb = probs_black.p_i.sigma;
        double den = g * a + f * b;
        if (den > 0.0) {
            double value = g * a / den;
            double sigma = f * g * std::sqrt(b * b * sa * sa + a * a * sb * sb) / (den * den);
            point.trans_in_i = {value, sigma};
            point.trans_in_i_defined = true;
        }
    }
    return point;
}

std::vector<EnrichmentPoint> enrichment_curve(const OutcomeProbabilities& probs_black,
                                              const OutcomeProbabilities& probs_trans,
                                              const std::vector<double>& f_grid) {
    std::vector<EnrichmentPoint> curve;
    curve.reserve(f_grid.size());
    for (double f : f_grid) curve.push_back(enrichment_point(probs_black, probs_trans, f));
    return curve;
}

PurificationResult purification(double p_black_ii, double p_trans_ii, int rounds) {
    if (!(p_black_ii >= 0.0 && p_black_ii <= 1.0) || !(p_trans_ii >= 0.0 && p_trans_ii <= 1.0))
        throw ValidationError("group-ii probabilities must lie in [0,1]");
    if (rounds < 1) throw ValidationError("purification needs N >= 1 rounds");
    if (p_black_ii == 0.0 && p_trans_ii == 0.0)
        throw DegenerateDataError("likelihood ratio undefined: both group-ii probabilities are 0");

    PurificationResult result;
    result.black_yield = std::pow(p_black_ii, rounds);
    if (p_trans_ii == 0.0) {
        result.unbounded = true;
    } else {
        result.likelihood_ratio = std::pow(p_black_ii / p_trans_ii, rounds);
    }
    return result;
}

double posterior_purity(double f_original, double likelihood_ratio) {
    if (!(f_original >= 0.0 && f_original <= 1.0))
        throw ValidationError("original fraction must lie in [0,1]");
    if (!(likelihood_ratio >= 0.0) || !std::isfinite(likelihood_ratio))
        throw ValidationError("likelihood ratio must be finite and non-negative");
    double num = f_original * likelihood_ratio;
    double den = num + (1.0 - f_original);
    if (den == 0.0) return 0.0;  // f = 0 and ratio irrelevant
    return num / den;
}

double expected_neutrons_per_test(const OutcomeProbabilities& probs, double detector_efficiency,
                                  bool retry_on_no_registration) {
    if (!(detector_efficiency > 0.0 && detector_efficiency <= 1.0))
        throw ValidationError("detector efficiency must lie in (0,1]");
    if (!retry_on_no_registration) return 1.0;
    double p_undetected = (1.0 - detector_efficiency) * (probs.p_i.value + probs.p_ii.value);
    if (p_undetected >= 1.0)
        throw DivergenceError("every neutron goes unregistered; retries never terminate");
    return 1.0 / (1.0 - p_undetected);
}

std::array<double, 3> strategy_group_distribution(const Strategy& strategy,
                                                  const OutcomeProbabilities& probs,
                                                  ObjectKind object) {
    strategy.validate();
    double p_i = probs.p_i.value;
    double p_ii = probs.p_ii.value;
    double p_iii = probs.p_iii ? probs.p_iii->value : 0.0;

    switch (strategy.kind) {
        case StrategyKind::SingleTest:
            return {p_i, p_ii, p_iii};
        case StrategyKind::RepeatGroupI: {
            if (p_i >= 1.0) throw DivergenceError("p_i = 1: the object never leaves group i");
            double stay = 1.0 - p_i;
            return {0.0, p_ii / stay, p_iii / stay};
        }
        case StrategyKind::PurifyGroupII:
        default: {
            // Survive N consecutive group-ii outcomes; leave at the first i or
            // iii outcome.
            int n = strategy.purify_rounds;
            double survive = std::pow(p_ii, n);
            double partial = 0.0;  // sum_{k<N} p_ii^k
            double term = 1.0;
            for (int k = 0; k < n; ++k) {
                partial += term;
                term *= p_ii;
            }
            (void)object;
            return {p_i * partial, survive, p_iii * partial};
        }
    }
}

double strategy_group_ii_purity(const Strategy& strategy, const OutcomeProbabilities& probs_black,
                                const OutcomeProbabilities& probs_trans, double f_original) {
    auto black = strategy_group_distribution(strategy, probs_black, ObjectKind::Black);
    auto trans = strategy_group_distribution(strategy, probs_trans, ObjectKind::Transparent);
    double num = f_original * black[1];
    double den = num + (1.0 - f_original) * trans[1];
    if (den <= 0.0) throw DegenerateDataError("group ii is empty under this strategy");
    return num / den;
}

}  // namespace ifm::protocol
