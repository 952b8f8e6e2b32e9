#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ifm/kv.hpp"
#include "ifm/types.hpp"

namespace ifm::model {

// Exit/path indices into the coupling matrices.
inline constexpr int kExit1 = 0;
inline constexpr int kExit2 = 1;
inline constexpr int kPathTest = 0;  // the path holding attenuator and object
inline constexpr int kPathRef = 1;

using Coupling2x2 = std::array<std::array<double, 2>, 2>;  // [exit][path]

// Phenomenological coefficients of a lossy, reduced-contrast, asymmetric-exit
// two-path interferometer.
//
// Exit intensity for a transparent (or absent) object:
//   i_e(phi) = t*(c[e][T]+k[e][T]) + (c[e][R]+k[e][R])
//              + s_e * 2*V*sqrt(t*c[e][T]*c[e][R]) * cos(phi + phi0)
// A black object removes every test-path term and the interference term.
struct InterferometerParams {
    Coupling2x2 coherent{};                    // interfering intensity couplings
    Coupling2x2 incoherent{};                  // non-interfering intensity couplings
    double visibility = 1.0;                   // V in [0,1]
    std::array<double, 2> exit_sign{+1.0, -1.0};
    double phase_offset = 0.0;                 // internal instrument offset, radians
    double attenuation = 1.0;                  // t in [0,1], absorber transmittance
    double test_path_flux = 0.0;               // total test-path intensity at the object

    // Throws ValidationError naming the offending field.
    void validate() const;

    double mean_coupling(int exit, int path) const {
        return coherent[exit][path] + incoherent[exit][path];
    }

    KvDocument to_kv() const;
    static InterferometerParams from_kv(const KvDocument& doc);
};

// Where the incident flux went, in the normalized intensity units of the
// no-object exit-1 curve. Components sum to total().
struct ExitIntensities {
    double i1 = 0.0;
    double i2 = 0.0;
    double absorbed_object = 0.0;
    double absorbed_attenuator = 0.0;
    double lost_unused = 0.0;

    double total() const { return i1 + i2 + absorbed_object + absorbed_attenuator + lost_unused; }
};

// Ideal Elitzur–Vaidman Mach–Zehnder: 50% splitters, full visibility, no
// attenuator, no incoherent light.
InterferometerParams ideal_params();

ExitIntensities exit_intensities(const InterferometerParams& params, double phase,
                                 std::optional<ObjectKind> object);

// Outcome probabilities at the operating point (exit-1 maximum). Black rows
// condition on the three named fates {exit 1, exit 2, object}; transparent
// rows on the two exits. Sigmas are zero: the model is exact.
OutcomeProbabilities outcome_probabilities(const InterferometerParams& params, ObjectKind object);

OutcomeTable outcome_table(const InterferometerParams& params);

// ---------------------------------------------------------------------------
// Calibration: invert the no-object exit curves plus the two probability rows
// into phenomenological coefficients.

struct CalibrationTargets {
    double mean1 = 0.0;   // no-object exit-1 curve mean, t = 1
    double amp1 = 0.0;    // exit-1 oscillation amplitude, t = 1
    double mean2 = 0.0;
    double amp2 = 0.0;
    double attenuation = 1.0;  // t at which the probability rows were taken
    double p_black_i = 0.0, p_black_ii = 0.0, p_black_iii = 0.0;
    double p_trans_i = 0.0, p_trans_ii = 0.0;

    KvDocument to_kv() const;
    static CalibrationTargets from_kv(const KvDocument& doc);
};

struct CalibrationResult {
    InterferometerParams params;
    std::vector<std::string> target_names;
    std::vector<double> target_values;
    std::vector<double> forward_values;    // model evaluated at the fitted params
    std::vector<double> residuals;         // forward - target, absolute
    double max_abs_residual = 0.0;
    double relative_cost = 0.0;            // sum of squared relative residuals
    bool converged = false;                // max_abs_residual <= bound
};

struct CalibrationOptions {
    int starts = 64;          // multi-start count (fixed internal seed)
    int max_iterations = 200;
    double residual_bound = 0.02;  // convergence threshold on max abs residual
};

// Deterministic multi-start Levenberg–Marquardt on relative residuals.
// Never throws on a poor fit: returns best-effort params with the residual
// report and converged=false.
CalibrationResult calibrate_fit(const CalibrationTargets& targets,
                                const CalibrationOptions& options = {});

// Forward-evaluate params against targets (same residual layout as the fit).
CalibrationResult evaluate_against_targets(const InterferometerParams& params,
                                           const CalibrationTargets& targets,
                                           double residual_bound = 0.02);

// ---------------------------------------------------------------------------
// Operating-point scan over the absorber transmittance.

enum class ObjectiveKind {
    EnrichmentAtF,        // black fraction in group ii at prior f
    LikelihoodRatio,      // p_black(ii) / p_trans(ii)
    SingleTestAccuracy,   // P(correct call) at prior f; ii and iii call black
};

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::EnrichmentAtF;
    double prior_black = 0.5;  // f, used by EnrichmentAtF and SingleTestAccuracy
};

struct GridSpec {
    double t_min = 1.0 / 512.0;  // grid must stay inside (0, 1]
    double t_max = 1.0;
    int points = 512;
};

struct ScanPoint {
    double t = 0.0;
    double value = 0.0;   // meaningful only when defined
    bool defined = false; // false: objective undefined/unbounded at this t
};

struct AttenuationScan {
    std::vector<ScanPoint> curve;
    std::optional<double> t_opt;  // absent when no grid point has a finite value
    int flagged_points = 0;
};

AttenuationScan optimize_attenuation(const InterferometerParams& params,
                                     const ObjectiveSpec& objective, const GridSpec& grid);

const char* to_string(ObjectiveKind kind);

}  // namespace ifm::model
