#include "ifm/inference.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace ifm::inference {

const char* to_string(RunConfig config) {
    switch (config) {
        case RunConfig::Transparent: return "transparent";
        case RunConfig::Black: return "black";
        default: return "background";
    }
}

void CountRecord::validate() const {
    if (p1 < 0 || p2 < 0 || (d && *d < 0))
        throw ValidationError("counts must be non-negative integers");
    if (d && config == RunConfig::Transparent)
        throw ValidationError("object-detector counts only belong to black or background runs");
}

NetCounts DetectorNetCounts::exit_sum() const {
    return {p1.value + p2.value, std::sqrt(p1.sigma * p1.sigma + p2.sigma * p2.sigma)};
}

namespace {

NetCounts net_one(long long gross, long long background, double scale) {
    double value = static_cast<double>(gross) - scale * static_cast<double>(background);
    double variance = static_cast<double>(gross) + scale * scale * static_cast<double>(background);
    return {value, std::sqrt(variance)};
}

// sigma of r = num/den at first order, numerator and denominator independent.
double ratio_sigma(double num, double sig_num, double den, double sig_den) {
    double r = num / den;
    return std::abs(r) * std::sqrt((sig_num / num) * (sig_num / num) +
                                   (sig_den / den) * (sig_den / den));
}

}  // namespace

DetectorNetCounts subtract_background(const CountRecord& gross, const CountRecord& background,
                                      double background_scale) {
    gross.validate();
    background.validate();
    if (gross.config == RunConfig::Background)
        throw ValidationError("gross record must not be a background run");
    if (background.config != RunConfig::Background)
        throw ValidationError("background record must be a background run");
    if (!(background_scale > 0.0))
        throw ValidationError("background scale must be positive");

    DetectorNetCounts net;
    net.p1 = net_one(gross.p1, background.p1, background_scale);
    net.p2 = net_one(gross.p2, background.p2, background_scale);
    if (gross.d) {
        if (!background.d)
            throw ValidationError("black run has D counts but the background run has none");
        net.d = net_one(*gross.d, *background.d, background_scale);
    }
    return net;
}

OutcomeProbabilities probabilities_transparent(const NetCounts& net_p1, const NetCounts& net_p2,
                                               CovarianceMode mode) {
    double total = net_p1.value + net_p2.value;
    if (!(total > 0.0)) throw DegenerateDataError("transparent run has no net exit counts");
    double sig_total = std::sqrt(net_p1.sigma * net_p1.sigma + net_p2.sigma * net_p2.sigma);

    OutcomeProbabilities probs;
    probs.object = ObjectKind::Transparent;
    double pi = net_p1.value / total;
    double pii = net_p2.value / total;

    if (mode == CovarianceMode::Uncorrelated) {
        probs.p_i = {pi, net_p1.value != 0.0
                             ? ratio_sigma(net_p1.value, net_p1.sigma, total, sig_total)
                             : net_p1.sigma / total};
        probs.p_ii = {pii, net_p2.value != 0.0
                              ? ratio_sigma(net_p2.value, net_p2.sigma, total, sig_total)
                              : net_p2.sigma / total};
    } else {
        // Exact first order for a/(a+b) with independent a, b.
        double t2 = total * total;
        double sig_pi = std::sqrt(net_p2.value * net_p2.value * net_p1.sigma * net_p1.sigma +
                                  net_p1.value * net_p1.value * net_p2.sigma * net_p2.sigma) /
                        t2;
        probs.p_i = {pi, sig_pi};
        probs.p_ii = {pii, sig_pi};
    }
    probs.p_iii = std::nullopt;
    return probs;
}

OutcomeProbabilities probabilities_black(const NetCounts& net_p1, const NetCounts& net_p2,
                                         const NetCounts& total) {
    if (!(total.value > 0.0)) throw DegenerateDataError("reference total must be positive");

    OutcomeProbabilities probs;
    probs.object = ObjectKind::Black;
    double pi = net_p1.value / total.value;
    double pii = net_p2.value / total.value;
    probs.p_i = {pi, net_p1.value != 0.0
                         ? ratio_sigma(net_p1.value, net_p1.sigma, total.value, total.sigma)
                         : net_p1.sigma / total.value};
    probs.p_ii = {pii, net_p2.value != 0.0
                          ? ratio_sigma(net_p2.value, net_p2.sigma, total.value, total.sigma)
                          : net_p2.sigma / total.value};
    double piii = 1.0 - pi - pii;
    double sig_piii =
        std::sqrt(probs.p_i.sigma * probs.p_i.sigma + probs.p_ii.sigma * probs.p_ii.sigma);
    if (piii < -3.0 * sig_piii)
        throw InconsistentExposureError(
            "absorption probability below zero beyond 3 sigma; black and transparent exposures "
            "do not match");
    probs.p_iii = ValueSigma{piii, sig_piii};
    return probs;
}

ConsistencyReport consistency_check_object_detector(const NetCounts& net_d, ValueSigma p_iii,
                                                    ValueSigma total, double efficiency) {
    if (!(efficiency > 0.0 && efficiency <= 1.0))
        throw ValidationError("detector efficiency must lie in (0,1]");

    ConsistencyReport report;
    report.predicted = p_iii.value * total.value * efficiency;
    report.sigma_predicted =
        efficiency * std::sqrt(p_iii.sigma * p_iii.sigma * total.value * total.value +
                               p_iii.value * p_iii.value * total.sigma * total.sigma);
    report.observed = net_d.value;
    report.sigma_observed = net_d.sigma;
    double combined = std::sqrt(report.sigma_predicted * report.sigma_predicted +
                                report.sigma_observed * report.sigma_observed);
    report.pull = combined > 0.0 ? (report.observed - report.predicted) / combined : 0.0;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void csv_error(std::size_t line, const std::string& message) {
    throw ValidationError("counts csv line " + std::to_string(line) + ": " + message);
}

std::string trim_field(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace

CountsFile parse_counts_csv(std::istream& in) {
    CountsFile file;
    file.transparent.config = RunConfig::Transparent;
    file.black.config = RunConfig::Black;
    file.background.config = RunConfig::Background;

    bool seen[3][3] = {};  // [config][detector]
    bool header_seen = false;
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim_field(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        if (!header_seen) {
            if (stripped != "detector,config,counts")
                csv_error(line_no, "expected header 'detector,config,counts'");
            header_seen = true;
            continue;
        }
        std::istringstream row(stripped);
        std::string detector, config, counts;
        if (!std::getline(row, detector, ',') || !std::getline(row, config, ',') ||
            !std::getline(row, counts))
            csv_error(line_no, "expected three comma-separated fields");
        detector = trim_field(detector);
        config = trim_field(config);
        counts = trim_field(counts);

        int det_idx;
        if (detector == "P1") det_idx = 0;
        else if (detector == "P2") det_idx = 1;
        else if (detector == "D") det_idx = 2;
        else csv_error(line_no, "unknown detector '" + detector + "'");

        CountRecord* record;
        int cfg_idx;
        if (config == "transparent") { record = &file.transparent; cfg_idx = 0; }
        else if (config == "black") { record = &file.black; cfg_idx = 1; }
        else if (config == "background") { record = &file.background; cfg_idx = 2; }
        else csv_error(line_no, "unknown config '" + config + "'");

        long long value = 0;
        try {
            std::size_t used = 0;
            value = std::stoll(counts, &used);
            if (used != counts.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            csv_error(line_no, "counts field '" + counts + "' is not an integer");
        }
        if (value < 0) csv_error(line_no, "counts must be non-negative");
        if (seen[cfg_idx][det_idx]) csv_error(line_no, "duplicate row for " + detector + "," + config);
        seen[cfg_idx][det_idx] = true;

        if (det_idx == 0) record->p1 = value;
        else if (det_idx == 1) record->p2 = value;
        else if (config == "transparent") csv_error(line_no, "detector D has no transparent run");
        else record->d = value;
    }

    if (!header_seen) throw ValidationError("counts csv: empty file, header row required");
    for (int cfg = 0; cfg < 3; ++cfg) {
        const char* name = cfg == 0 ? "transparent" : cfg == 1 ? "black" : "background";
        if (!seen[cfg][0] || !seen[cfg][1])
            throw ValidationError(std::string("counts csv: missing P1/P2 rows for config '") +
                                  name + "'");
    }
    file.transparent.validate();
    file.black.validate();
    file.background.validate();
    return file;
}

CountsFile load_counts_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open counts file: " + path);
    return parse_counts_csv(in);
}

ReduceResult reduce_counts(const CountsFile& counts, double efficiency_d, CovarianceMode mode,
                           double background_scale) {
    ReduceResult result;
    result.net_transparent = subtract_background(counts.transparent, counts.background,
                                                 background_scale);
    result.net_black = subtract_background(counts.black, counts.background, background_scale);
    result.suspicious_nets =
        result.net_transparent.p1.suspicious() || result.net_transparent.p2.suspicious() ||
        result.net_black.p1.suspicious() || result.net_black.p2.suspicious() ||
        (result.net_black.d && result.net_black.d->suspicious());

    result.transparent = probabilities_transparent(result.net_transparent.p1,
                                                   result.net_transparent.p2, mode);
    NetCounts total = result.net_transparent.exit_sum();
    result.black = probabilities_black(result.net_black.p1, result.net_black.p2, total);

    if (result.net_black.d) {
        result.d_check = consistency_check_object_detector(
            *result.net_black.d, *result.black.p_iii, {total.value, total.sigma}, efficiency_d);
    }
    return result;
}

}  // namespace ifm::inference
