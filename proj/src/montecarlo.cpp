#include "ifm/montecarlo.hpp"

#include <cmath>
#include <limits>
#include <thread>

namespace ifm::mc {

namespace {

constexpr std::uint32_t kPurposeComposition = 0;
constexpr std::uint32_t kPurposeTests = 1;

ObjectKind object_kind(const EnsembleSpec& spec, std::int64_t index, std::uint64_t seed) {
    if (spec.composition == CompositionMode::ExactCount) {
        auto n_black = static_cast<std::int64_t>(std::llround(spec.f_black * spec.n_objects));
        return index < n_black ? ObjectKind::Black : ObjectKind::Transparent;
    }
    rng::Substream stream(seed, static_cast<std::uint64_t>(index), kPurposeComposition);
    return stream.next_uniform() < spec.f_black ? ObjectKind::Black : ObjectKind::Transparent;
}

struct ObjectOutcome {
    Group group = Group::I;
    int tests = 0;
    bool capped = false;
};

ObjectOutcome classify_object(ObjectKind kind, const protocol::Strategy& strategy,
                              const OutcomeTable& table, rng::Substream& stream,
                              int retest_cap) {
    ObjectOutcome outcome;
    switch (strategy.kind) {
        case protocol::StrategyKind::SingleTest: {
            outcome.group = run_single_test(kind, table, stream);
            outcome.tests = 1;
            break;
        }
        case protocol::StrategyKind::RepeatGroupI: {
            outcome.group = Group::I;
            while (outcome.tests < retest_cap) {
                outcome.group = run_single_test(kind, table, stream);
                ++outcome.tests;
                if (outcome.group != Group::I) break;
            }
            outcome.capped = outcome.group == Group::I;
            break;
        }
        case protocol::StrategyKind::PurifyGroupII: {
            outcome.group = Group::II;
            for (int round = 0; round < strategy.purify_rounds; ++round) {
                outcome.group = run_single_test(kind, table, stream);
                ++outcome.tests;
                if (outcome.group != Group::II) break;
            }
            break;
        }
    }
    return outcome;
}

}  // namespace

Group run_single_test(ObjectKind object, const OutcomeTable& table, rng::Substream& stream) {
    const OutcomeProbabilities& probs =
        object == ObjectKind::Black ? table.black : table.transparent;
    const double u = stream.next_uniform();
    if (u < probs.p_i.value) return Group::I;
    if (object == ObjectKind::Transparent) return Group::II;  // never absorbed
    if (u < probs.p_i.value + probs.p_ii.value) return Group::II;
    return Group::III;
}

EnsembleReport run_strategy(const EnsembleSpec& spec, const protocol::Strategy& strategy,
                            const OutcomeTable& table, std::uint64_t seed,
                            const RunOptions& options) {
    spec.validate();
    strategy.validate();
    if (options.retest_cap < 1) throw ValidationError("retest cap must be at least 1");
    int threads = std::max(1, options.threads);

    struct Tally {
        std::array<GroupTally, 3> groups{};
        std::int64_t neutrons = 0;
        std::int64_t capped = 0;
        std::int64_t n_black = 0;
    };

    auto run_range = [&](std::int64_t begin, std::int64_t end, Tally& tally) {
        for (std::int64_t i = begin; i < end; ++i) {
            ObjectKind kind = object_kind(spec, i, seed);
            rng::Substream stream(seed, static_cast<std::uint64_t>(i), kPurposeTests);
            ObjectOutcome outcome = classify_object(kind, strategy, table, stream,
                                                    options.retest_cap);
            auto& bucket = tally.groups[static_cast<int>(outcome.group)];
            if (kind == ObjectKind::Black) {
                ++bucket.black;
                ++tally.n_black;
            } else {
                ++bucket.transparent;
            }
            tally.neutrons += outcome.tests;
            if (outcome.capped) ++tally.capped;
        }
    };

    std::vector<Tally> tallies(static_cast<std::size_t>(threads));
    if (threads == 1) {
        run_range(0, spec.n_objects, tallies[0]);
    } else {
        std::vector<std::thread> pool;
        std::int64_t chunk = (spec.n_objects + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            std::int64_t begin = w * chunk;
            std::int64_t end = std::min(spec.n_objects, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end, std::ref(tallies[static_cast<std::size_t>(w)]));
        }
        for (auto& worker : pool) worker.join();
    }

    EnsembleReport report;
    report.n_objects = spec.n_objects;
    for (const Tally& tally : tallies) {
        for (int g = 0; g < 3; ++g) {
            report.groups[g].black += tally.groups[g].black;
            report.groups[g].transparent += tally.groups[g].transparent;
        }
        report.neutrons_used += tally.neutrons;
        report.retest_capped += tally.capped;
        report.n_black += tally.n_black;
    }
    report.absorptions = report.group(Group::III).black;
    return report;
}

AnalyticExpectation analytic_expectation(const EnsembleSpec& spec,
                                         const protocol::Strategy& strategy,
                                         const OutcomeTable& table) {
    AnalyticExpectation expect;
    expect.black_distribution =
        protocol::strategy_group_distribution(strategy, table.black, ObjectKind::Black);
    expect.trans_distribution =
        protocol::strategy_group_distribution(strategy, table.transparent, ObjectKind::Transparent);
    double f = spec.f_black;
    double den = f * expect.black_distribution[1] + (1.0 - f) * expect.trans_distribution[1];
    if (den > 0.0) {
        expect.black_fraction_in_ii = f * expect.black_distribution[1] / den;
        expect.black_fraction_defined = true;
    }
    return expect;
}

std::vector<QuantityCheck> empirical_vs_analytic(const EnsembleReport& report,
                                                 const AnalyticExpectation& expected) {
    std::vector<QuantityCheck> checks;
    auto add_fraction = [&checks](const std::string& name, std::int64_t count, std::int64_t total,
                                  double expectation) {
        if (total <= 0) return;
        expectation = std::min(1.0, std::max(0.0, expectation));
        QuantityCheck check;
        check.quantity = name;
        check.empirical = static_cast<double>(count) / static_cast<double>(total);
        check.expected = expectation;
        check.sigma = std::sqrt(expectation * (1.0 - expectation) / static_cast<double>(total));
        if (check.sigma > 0.0) {
            check.pull = (check.empirical - check.expected) / check.sigma;
        } else {
            check.pull = check.empirical == check.expected
                             ? 0.0
                             : std::numeric_limits<double>::infinity();
        }
        checks.push_back(check);
    };

    std::int64_t n_black = report.n_black;
    std::int64_t n_trans = report.n_objects - report.n_black;
    static const char* kGroupNames[3] = {"i", "ii", "iii"};
    for (int g = 0; g < 3; ++g) {
        add_fraction(std::string("black_in_group_") + kGroupNames[g], report.groups[g].black,
                     n_black, expected.black_distribution[g]);
    }
    for (int g = 0; g < 2; ++g) {  // transparent objects never reach group iii
        add_fraction(std::string("trans_in_group_") + kGroupNames[g],
                     report.groups[g].transparent, n_trans, expected.trans_distribution[g]);
    }
    if (expected.black_fraction_defined) {
        add_fraction("black_fraction_in_group_ii", report.group(Group::II).black,
                     report.group(Group::II).total(), expected.black_fraction_in_ii);
    }
    return checks;
}

KvDocument EnsembleReport::to_kv() const {
    KvDocument doc;
    doc.set_int("n_objects", n_objects);
    doc.set_int("n_black", n_black);
    doc.set_int("group_i_black", groups[0].black);
    doc.set_int("group_i_transparent", groups[0].transparent);
    doc.set_int("group_ii_black", groups[1].black);
    doc.set_int("group_ii_transparent", groups[1].transparent);
    doc.set_int("group_iii_black", groups[2].black);
    doc.set_int("group_iii_transparent", groups[2].transparent);
    doc.set_int("neutrons_used", neutrons_used);
    doc.set_int("absorptions", absorptions);
    doc.set_int("retest_capped", retest_capped);
    return doc;
}

std::string EnsembleReport::group_breakdown_csv() const {
    std::string out = "group,black,transparent\n";
    static const char* kGroupNames[3] = {"i", "ii", "iii"};
    for (int g = 0; g < 3; ++g) {
        out += kGroupNames[g];
        out += ',';
        out += std::to_string(groups[g].black);
        out += ',';
        out += std::to_string(groups[g].transparent);
        out += '\n';
    }
    return out;
}

}  // namespace ifm::mc
