#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ifm/kv.hpp"
#include "ifm/protocol.hpp"
#include "ifm/rng.hpp"
#include "ifm/types.hpp"

namespace ifm::mc {

enum class CompositionMode {
    ExactCount,  // round(f*n) black objects, deterministic
    Binomial,    // each object black with probability f
};

struct EnsembleSpec {
    std::int64_t n_objects = 0;
    double f_black = 0.0;
    CompositionMode composition = CompositionMode::ExactCount;

    void validate() const {
        if (n_objects < 1) throw ValidationError("ensemble needs at least one object");
        if (!(f_black >= 0.0 && f_black <= 1.0))
            throw ValidationError("black fraction must lie in [0,1]");
    }
};

struct GroupTally {
    std::int64_t black = 0;
    std::int64_t transparent = 0;

    std::int64_t total() const { return black + transparent; }
};

struct EnsembleReport {
    std::array<GroupTally, 3> groups{};  // indexed by Group
    std::int64_t neutrons_used = 0;
    std::int64_t absorptions = 0;     // black objects in group iii
    std::int64_t retest_capped = 0;   // objects stuck in group i at the cap
    std::int64_t n_objects = 0;
    std::int64_t n_black = 0;

    const GroupTally& group(Group g) const { return groups[static_cast<int>(g)]; }

    KvDocument to_kv() const;
    std::string group_breakdown_csv() const;  // group,black,transparent rows
};

struct RunOptions {
    int retest_cap = 10000;  // max tests of one object under RepeatGroupI
    int threads = 1;
};

// One test of one object: samples the three-outcome distribution, consuming
// exactly one draw.
Group run_single_test(ObjectKind object, const OutcomeTable& table, rng::Substream& stream);

// Full ensemble run. Deterministic in (spec, strategy, table, seed) no matter
// how many threads execute it.
EnsembleReport run_strategy(const EnsembleSpec& spec, const protocol::Strategy& strategy,
                            const OutcomeTable& table, std::uint64_t seed,
                            const RunOptions& options = {});

// Closed-form counterpart of a run, for oracle comparisons.
struct AnalyticExpectation {
    std::array<double, 3> black_distribution{};  // P(group) for a black object
    std::array<double, 3> trans_distribution{};
    double black_fraction_in_ii = 0.0;
    bool black_fraction_defined = false;
};

AnalyticExpectation analytic_expectation(const EnsembleSpec& spec,
                                         const protocol::Strategy& strategy,
                                         const OutcomeTable& table);

struct QuantityCheck {
    std::string quantity;
    double empirical = 0.0;
    double expected = 0.0;
    double sigma = 0.0;  // binomial sigma of the empirical fraction
    double pull = 0.0;
};

std::vector<QuantityCheck> empirical_vs_analytic(const EnsembleReport& report,
                                                 const AnalyticExpectation& expected);

}  // namespace ifm::mc
