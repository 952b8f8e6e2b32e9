#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "ifm/types.hpp"

namespace ifm::inference {

enum class RunConfig { Transparent, Black, Background };

const char* to_string(RunConfig config);

// Raw detector counts for one configuration. The object detector D is only
// read out for black and background runs.
struct CountRecord {
    long long p1 = 0;
    long long p2 = 0;
    std::optional<long long> d;
    RunConfig config = RunConfig::Transparent;

    void validate() const;  // throws ValidationError
};

// Background-subtracted counts with Poisson uncertainty. A net value below
// -3 sigma is flagged as suspicious rather than clamped.
struct NetCounts {
    double value = 0.0;
    double sigma = 0.0;

    bool suspicious() const { return value < -3.0 * sigma; }
};

struct DetectorNetCounts {
    NetCounts p1;
    NetCounts p2;
    std::optional<NetCounts> d;

    NetCounts exit_sum() const;  // P1 + P2, sigmas in quadrature
};

// Equal live time is assumed unless background_scale says otherwise.
DetectorNetCounts subtract_background(const CountRecord& gross, const CountRecord& background,
                                      double background_scale = 1.0);

// How the ratio sigma treats the numerator-in-denominator correlation. The
// uncorrelated form matches the quoted instrument errors; the exact form
// subtracts the covariance term.
enum class CovarianceMode { Uncorrelated, Exact };

OutcomeProbabilities probabilities_transparent(const NetCounts& net_p1, const NetCounts& net_p2,
                                               CovarianceMode mode = CovarianceMode::Uncorrelated);

// total is the net exit sum of the matched transparent run (equal exposure);
// the remainder 1 - p_i - p_ii is the absorption probability.
OutcomeProbabilities probabilities_black(const NetCounts& net_p1, const NetCounts& net_p2,
                                         const NetCounts& total);

struct ConsistencyReport {
    double predicted = 0.0;
    double sigma_predicted = 0.0;
    double observed = 0.0;
    double sigma_observed = 0.0;
    double pull = 0.0;

    bool consistent(double threshold = 3.0) const { return std::abs(pull) <= threshold; }
};

// Predicts the object-detector net counts from the absorption probability and
// the reference total, at the given detector efficiency.
ConsistencyReport consistency_check_object_detector(const NetCounts& net_d, ValueSigma p_iii,
                                                    ValueSigma total, double efficiency);

// ---------------------------------------------------------------------------
// Counts ingest: comma-separated rows `detector,config,counts` with a header.

struct CountsFile {
    CountRecord transparent;
    CountRecord black;
    CountRecord background;
};

CountsFile parse_counts_csv(std::istream& in);
CountsFile load_counts_csv(const std::string& path);

// The Table-1 -> Table-2 pipeline: subtract backgrounds, reduce both runs,
// and run the object-detector consistency check when D counts are present.
struct ReduceResult {
    DetectorNetCounts net_transparent;
    DetectorNetCounts net_black;
    OutcomeProbabilities transparent;
    OutcomeProbabilities black;
    std::optional<ConsistencyReport> d_check;
    bool suspicious_nets = false;
};

ReduceResult reduce_counts(const CountsFile& counts, double efficiency_d = 0.65,
                           CovarianceMode mode = CovarianceMode::Uncorrelated,
                           double background_scale = 1.0);

}  // namespace ifm::inference
