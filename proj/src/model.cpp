#include "ifm/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ifm::model {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_nonneg(double v, const char* name) {
    if (!(v >= 0.0)) throw ValidationError(std::string(name) + " must be non-negative");
}

void require_unit_interval(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0,1]");
}

constexpr const char* kCoherentKeys[2][2] = {{"c_1_I", "c_1_II"}, {"c_2_I", "c_2_II"}};
constexpr const char* kIncoherentKeys[2][2] = {{"k_1_I", "k_1_II"}, {"k_2_I", "k_2_II"}};

}  // namespace

void InterferometerParams::validate() const {
    for (int e = 0; e < 2; ++e) {
        for (int p = 0; p < 2; ++p) {
            require_nonneg(coherent[e][p], kCoherentKeys[e][p]);
            require_nonneg(incoherent[e][p], kIncoherentKeys[e][p]);
        }
    }
    require_unit_interval(visibility, "V");
    require_unit_interval(attenuation, "t");
    if (!std::isfinite(phase_offset)) throw ValidationError("phi0 must be finite");
    for (int e = 0; e < 2; ++e) {
        if (exit_sign[e] != 1.0 && exit_sign[e] != -1.0)
            throw ValidationError("exit sign must be +1 or -1");
    }
    // Path I cannot deliver more intensity to the exits than it carries.
    double delivered = mean_coupling(kExit1, kPathTest) + mean_coupling(kExit2, kPathTest);
    if (test_path_flux < delivered - 1e-12 * std::max(1.0, delivered))
        throw ValidationError("F_I must cover the test-path exit couplings");
}

InterferometerParams ideal_params() {
    InterferometerParams p;
    p.coherent = {{{0.25, 0.25}, {0.25, 0.25}}};
    p.incoherent = {{{0.0, 0.0}, {0.0, 0.0}}};
    p.visibility = 1.0;
    p.exit_sign = {+1.0, -1.0};
    p.phase_offset = 0.0;
    p.attenuation = 1.0;
    p.test_path_flux = 0.5;
    return p;
}

ExitIntensities exit_intensities(const InterferometerParams& params, double phase,
                                 std::optional<ObjectKind> object) {
    params.validate();
    const bool black = object.has_value() && *object == ObjectKind::Black;
    const double g = black ? 0.0 : 1.0;
    const double t = params.attenuation;
    const double c = std::cos(phase + params.phase_offset);

    double i[2];
    for (int e = 0; e < 2; ++e) {
        double cross = params.exit_sign[e] * 2.0 * params.visibility *
                       std::sqrt(t * params.coherent[e][kPathTest] * params.coherent[e][kPathRef]) *
                       std::sqrt(g) * c;
        i[e] = t * params.mean_coupling(e, kPathTest) * g + params.mean_coupling(e, kPathRef) + cross;
    }

    ExitIntensities out;
    out.i1 = i[0];
    out.i2 = i[1];
    out.absorbed_object = black ? t * params.test_path_flux : 0.0;
    out.absorbed_attenuator = (1.0 - t) * params.test_path_flux;
    double total_in = params.test_path_flux + params.mean_coupling(kExit1, kPathRef) +
                      params.mean_coupling(kExit2, kPathRef);
    out.lost_unused = total_in - out.i1 - out.i2 - out.absorbed_object - out.absorbed_attenuator;
    if (std::abs(out.lost_unused) < 1e-12 * std::max(1.0, total_in)) out.lost_unused = 0.0;
    return out;
}

OutcomeProbabilities outcome_probabilities(const InterferometerParams& params, ObjectKind object) {
    // Operating point: exit-1 maximum, i.e. zero phase relative to the offset.
    ExitIntensities ex = exit_intensities(params, -params.phase_offset, object);
    OutcomeProbabilities probs;
    probs.object = object;
    if (object == ObjectKind::Black) {
        double den = ex.i1 + ex.i2 + ex.absorbed_object;
        if (den <= 0.0)
            throw DegenerateDataError("degenerate configuration: no flux reaches exits or object");
        probs.p_i = {ex.i1 / den, 0.0};
        probs.p_ii = {ex.i2 / den, 0.0};
        probs.p_iii = ValueSigma{ex.absorbed_object / den, 0.0};
    } else {
        double den = ex.i1 + ex.i2;
        if (den <= 0.0) throw DegenerateDataError("degenerate configuration: both exits dark");
        probs.p_i = {ex.i1 / den, 0.0};
        probs.p_ii = {ex.i2 / den, 0.0};
        probs.p_iii = std::nullopt;
    }
    return probs;
}

OutcomeTable outcome_table(const InterferometerParams& params) {
    return {outcome_probabilities(params, ObjectKind::Black),
            outcome_probabilities(params, ObjectKind::Transparent)};
}

KvDocument InterferometerParams::to_kv() const {
    KvDocument doc;
    for (int e = 0; e < 2; ++e)
        for (int p = 0; p < 2; ++p) doc.set_double(kCoherentKeys[e][p], coherent[e][p]);
    for (int e = 0; e < 2; ++e)
        for (int p = 0; p < 2; ++p) doc.set_double(kIncoherentKeys[e][p], incoherent[e][p]);
    doc.set_double("V", visibility);
    doc.set_double("phi0", phase_offset);
    doc.set_double("t", attenuation);
    doc.set_double("F_I", test_path_flux);
    doc.set_double("s_1", exit_sign[0]);
    doc.set_double("s_2", exit_sign[1]);
    return doc;
}

InterferometerParams InterferometerParams::from_kv(const KvDocument& doc) {
    InterferometerParams p;
    for (int e = 0; e < 2; ++e)
        for (int q = 0; q < 2; ++q) p.coherent[e][q] = doc.get_double(kCoherentKeys[e][q]);
    for (int e = 0; e < 2; ++e)
        for (int q = 0; q < 2; ++q) p.incoherent[e][q] = doc.get_double(kIncoherentKeys[e][q]);
    p.visibility = doc.get_double("V");
    p.phase_offset = doc.get_double("phi0");
    p.attenuation = doc.get_double("t");
    p.test_path_flux = doc.get_double("F_I");
    p.exit_sign[0] = doc.get_double_opt("s_1").value_or(+1.0);
    p.exit_sign[1] = doc.get_double_opt("s_2").value_or(-1.0);
    p.validate();
    return p;
}

KvDocument CalibrationTargets::to_kv() const {
    KvDocument doc;
    doc.set_double("mean_1", mean1);
    doc.set_double("amp_1", amp1);
    doc.set_double("mean_2", mean2);
    doc.set_double("amp_2", amp2);
    doc.set_double("t", attenuation);
    doc.set_double("p_black_i", p_black_i);
    doc.set_double("p_black_ii", p_black_ii);
    doc.set_double("p_black_iii", p_black_iii);
    doc.set_double("p_trans_i", p_trans_i);
    doc.set_double("p_trans_ii", p_trans_ii);
    return doc;
}

CalibrationTargets CalibrationTargets::from_kv(const KvDocument& doc) {
    CalibrationTargets tg;
    tg.mean1 = doc.get_double("mean_1");
    tg.amp1 = doc.get_double("amp_1");
    tg.mean2 = doc.get_double("mean_2");
    tg.amp2 = doc.get_double("amp_2");
    tg.attenuation = doc.get_double("t");
    tg.p_black_i = doc.get_double("p_black_i");
    tg.p_black_ii = doc.get_double("p_black_ii");
    tg.p_black_iii = doc.get_double("p_black_iii");
    tg.p_trans_i = doc.get_double("p_trans_i");
    tg.p_trans_ii = doc.get_double("p_trans_ii");
    return tg;
}

// ---------------------------------------------------------------------------
// Calibration fit internals.
//
// The targets only identify the reduced model
//   (m_1I, m_1II, m_2I, m_2II, A_1, A_2, F_I)
// where m is the total (coherent + incoherent) coupling and A_e the t=1
// oscillation amplitude. The optimizer works in unconstrained coordinates:
// log couplings, amplitude fractions w_e = A_e / (2 sqrt(m_eI m_eII)) as
// sin^2(u), log flux. The c/k/V split is reconstructed afterwards by a fixed
// convention (see construct_params).

namespace {

constexpr int kNumTheta = 7;
constexpr int kNumTargets = 9;
constexpr int kNumResiduals = kNumTargets + 1;  // + flux feasibility penalty

const char* const kTargetNames[kNumTargets] = {
    "mean_1", "amp_1", "mean_2", "amp_2", "p_black_i",
    "p_black_ii", "p_black_iii", "p_trans_i", "p_trans_ii",
};

struct Reduced {
    double m[2][2];  // [exit][path]
    double w[2];     // amplitude fraction per exit, in [0,1]
    double flux;

    double amp(int e) const { return 2.0 * w[e] * std::sqrt(m[e][0] * m[e][1]); }
};

Reduced decode(const std::array<double, kNumTheta>& u) {
    Reduced r;
    r.m[0][0] = std::exp(u[0]);
    r.m[0][1] = std::exp(u[1]);
    r.m[1][0] = std::exp(u[2]);
    r.m[1][1] = std::exp(u[3]);
    double s0 = std::sin(u[4]);
    double s1 = std::sin(u[5]);
    r.w[0] = s0 * s0;
    r.w[1] = s1 * s1;
    r.flux = std::exp(u[6]);
    return r;
}

std::array<double, kNumTargets> forward_reduced(const Reduced& r, double t) {
    const double st = std::sqrt(t);
    const double a1 = r.amp(0);
    const double a2 = r.amp(1);
    const double i1 = t * r.m[0][0] + r.m[0][1] + st * a1;
    const double i2 = t * r.m[1][0] + r.m[1][1] - st * a2;
    const double s = i1 + i2;
    const double b = r.m[0][1] + r.m[1][1] + t * r.flux;
    return {r.m[0][0] + r.m[0][1], a1,     r.m[1][0] + r.m[1][1], a2,    r.m[0][1] / b,
            r.m[1][1] / b,         t * r.flux / b, i1 / s,         i2 / s};
}

std::array<double, kNumTargets> target_vector(const CalibrationTargets& tg) {
    return {tg.mean1,      tg.amp1,       tg.mean2,     tg.amp2,     tg.p_black_i,
            tg.p_black_ii, tg.p_black_iii, tg.p_trans_i, tg.p_trans_ii};
}

std::array<double, kNumResiduals> fit_residuals(const std::array<double, kNumTheta>& u,
                                                const CalibrationTargets& tg) {
    Reduced r = decode(u);
    auto fwd = forward_reduced(r, tg.attenuation);
    auto tv = target_vector(tg);
    std::array<double, kNumResiduals> res{};
    for (int k = 0; k < kNumTargets; ++k) {
        res[k] = (fwd[k] - tv[k]) / std::max(std::abs(tv[k]), 0.01);
    }
    res[kNumTargets] = 100.0 * std::max(0.0, r.m[0][0] + r.m[1][0] - r.flux);
    return res;
}

double cost_of(const std::array<double, kNumResiduals>& r) {
    double c = 0.0;
    for (double v : r) c += v * v;
    return c;
}

// Solve the SPD system a*x = b in place (n<=7), plain Cholesky with jitter.
bool solve_spd(double a[kNumTheta][kNumTheta], const double b[kNumTheta], double x[kNumTheta]) {
    double l[kNumTheta][kNumTheta] = {};
    for (int i = 0; i < kNumTheta; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
            if (i == j) {
                if (sum <= 0.0) return false;
                l[i][i] = std::sqrt(sum);
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    double y[kNumTheta];
    for (int i = 0; i < kNumTheta; ++i) {
        double sum = b[i];
        for (int k = 0; k < i; ++k) sum -= l[i][k] * y[k];
        y[i] = sum / l[i][i];
    }
    for (int i = kNumTheta - 1; i >= 0; --i) {
        double sum = y[i];
        for (int k = i + 1; k < kNumTheta; ++k) sum -= l[k][i] * x[k];
        x[i] = sum / l[i][i];
    }
    return true;
}

struct LmOutcome {
    std::array<double, kNumTheta> u{};
    double cost = 0.0;
};

LmOutcome levenberg_marquardt(std::array<double, kNumTheta> u, const CalibrationTargets& tg,
                              int max_iterations) {
    auto r = fit_residuals(u, tg);
    double cost = cost_of(r);
    double lambda = 1e-3;

    for (int iter = 0; iter < max_iterations; ++iter) {
        // Central-difference Jacobian.
        double jac[kNumResiduals][kNumTheta];
        for (int j = 0; j < kNumTheta; ++j) {
            double h = 1e-6 * std::max(1.0, std::abs(u[j]));
            auto up = u, dn = u;
            up[j] += h;
            dn[j] -= h;
            auto rp = fit_residuals(up, tg);
            auto rn = fit_residuals(dn, tg);
            for (int i = 0; i < kNumResiduals; ++i) jac[i][j] = (rp[i] - rn[i]) / (2.0 * h);
        }
        double grad[kNumTheta] = {};
        double hess[kNumTheta][kNumTheta] = {};
        for (int i = 0; i < kNumResiduals; ++i) {
            for (int j = 0; j < kNumTheta; ++j) {
                grad[j] += jac[i][j] * r[i];
                for (int k = 0; k <= j; ++k) hess[j][k] += jac[i][j] * jac[i][k];
            }
        }
        for (int j = 0; j < kNumTheta; ++j)
            for (int k = j + 1; k < kNumTheta; ++k) hess[j][k] = hess[k][j];

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < 1e-14) break;

        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            double a[kNumTheta][kNumTheta];
            double nb[kNumTheta];
            for (int j = 0; j < kNumTheta; ++j) {
                for (int k = 0; k < kNumTheta; ++k) a[j][k] = hess[j][k];
                a[j][j] += lambda * (hess[j][j] + 1e-12);
                nb[j] = -grad[j];
            }
            double step[kNumTheta];
            if (solve_spd(a, nb, step)) {
                auto u_try = u;
                double smax = 0.0;
                for (int j = 0; j < kNumTheta; ++j) {
                    u_try[j] += step[j];
                    smax = std::max(smax, std::abs(step[j]));
                }
                auto r_try = fit_residuals(u_try, tg);
                double cost_try = cost_of(r_try);
                if (cost_try < cost) {
                    u = u_try;
                    r = r_try;
                    cost = cost_try;
                    lambda = std::max(lambda * 0.35, 1e-12);
                    stepped = smax > 1e-13;
                    break;
                }
            }
            lambda *= 4.0;
            if (lambda > 1e14) break;
        }
        if (!stepped) break;
    }
    return {u, cost};
}

std::array<double, kNumTheta> smart_start(const CalibrationTargets& tg) {
    // Crude inversion assuming the black-run fate total matches the
    // transparent exit total.
    double m1II = std::max(tg.p_black_i, 0.02);
    double m2II = std::max(tg.p_black_ii, 0.02);
    double m1I = std::max(tg.mean1 - m1II, 0.05);
    double m2I = std::max(tg.mean2 - m2II, 0.05);
    double flux = 1.2 * (m1I + m2I);
    return {std::log(m1I), std::log(m1II), std::log(m2I), std::log(m2II),
            kPi / 4.0,     kPi / 4.0,      std::log(flux)};
}

InterferometerParams construct_params(const Reduced& r, double attenuation) {
    InterferometerParams p;
    p.attenuation = attenuation;
    p.phase_offset = 0.0;  // unidentifiable from phase-aggregated targets
    p.exit_sign = {+1.0, -1.0};
    double v = std::max(r.w[0], r.w[1]);
    if (v <= 0.0) {
        // No interference anywhere: every coupling is incoherent.
        p.visibility = 0.0;
        for (int e = 0; e < 2; ++e)
            for (int q = 0; q < 2; ++q) {
                p.coherent[e][q] = 0.0;
                p.incoherent[e][q] = r.m[e][q];
            }
    } else {
        p.visibility = std::min(v, 1.0);
        for (int e = 0; e < 2; ++e) {
            double ratio = r.w[e] / v;       // <= 1; the saturated exit gets 1
            double frac = ratio * ratio;
            p.coherent[e][kPathTest] = frac * r.m[e][kPathTest];
            p.coherent[e][kPathRef] = r.m[e][kPathRef];
            p.incoherent[e][kPathTest] = (1.0 - frac) * r.m[e][kPathTest];
            p.incoherent[e][kPathRef] = 0.0;
            if (r.w[e] == 0.0) {
                // No interference at this exit: keep it fully incoherent.
                p.coherent[e][kPathTest] = 0.0;
                p.coherent[e][kPathRef] = 0.0;
                p.incoherent[e][kPathTest] = r.m[e][kPathTest];
                p.incoherent[e][kPathRef] = r.m[e][kPathRef];
            }
        }
    }
    double delivered = p.mean_coupling(kExit1, kPathTest) + p.mean_coupling(kExit2, kPathTest);
    p.test_path_flux = std::max(r.flux, delivered);
    return p;
}

}  // namespace

CalibrationResult evaluate_against_targets(const InterferometerParams& params,
                                           const CalibrationTargets& targets,
                                           double residual_bound) {
    CalibrationResult out;
    out.params = params;

    // No-object exit curves at t = 1.
    InterferometerParams unattenuated = params;
    unattenuated.attenuation = 1.0;
    ExitIntensities at_max = exit_intensities(unattenuated, -params.phase_offset, std::nullopt);
    ExitIntensities at_min = exit_intensities(unattenuated, kPi - params.phase_offset, std::nullopt);
    double mean1 = 0.5 * (at_max.i1 + at_min.i1);
    double amp1 = 0.5 * std::abs(at_max.i1 - at_min.i1);
    double mean2 = 0.5 * (at_max.i2 + at_min.i2);
    double amp2 = 0.5 * std::abs(at_max.i2 - at_min.i2);

    // Probability rows at the target attenuation.
    InterferometerParams attenuated = params;
    attenuated.attenuation = targets.attenuation;
    OutcomeProbabilities black = outcome_probabilities(attenuated, ObjectKind::Black);
    OutcomeProbabilities trans = outcome_probabilities(attenuated, ObjectKind::Transparent);

    std::array<double, kNumTargets> fwd = {
        mean1,          amp1,          mean2,          amp2,         black.p_i.value,
        black.p_ii.value, black.p_iii->value, trans.p_i.value, trans.p_ii.value};
    auto tv = target_vector(targets);

    out.max_abs_residual = 0.0;
    out.relative_cost = 0.0;
    for (int k = 0; k < kNumTargets; ++k) {
        out.target_names.emplace_back(kTargetNames[k]);
        out.target_values.push_back(tv[k]);
        out.forward_values.push_back(fwd[k]);
        double resid = fwd[k] - tv[k];
        out.residuals.push_back(resid);
        out.max_abs_residual = std::max(out.max_abs_residual, std::abs(resid));
        double rel = resid / std::max(std::abs(tv[k]), 0.01);
        out.relative_cost += rel * rel;
    }
    out.converged = out.max_abs_residual <= residual_bound;
    return out;
}

CalibrationResult calibrate_fit(const CalibrationTargets& targets,
                                const CalibrationOptions& options) {
    if (!(targets.attenuation > 0.0 && targets.attenuation <= 1.0))
        throw ValidationError("target attenuation must lie in (0,1]");
    if (options.starts < 1) throw ValidationError("calibration needs at least one start");

    std::mt19937_64 gen(0x9e3779b97f4a7c15ULL);  // fixed seed: reproducible fit
    std::uniform_real_distribution<double> log_coupling(-2.5, 1.5);
    std::uniform_real_distribution<double> angle(0.0, kPi / 2.0);
    std::uniform_real_distribution<double> log_flux(-1.5, 2.0);

    LmOutcome best{{}, std::numeric_limits<double>::infinity()};
    for (int s = 0; s < options.starts; ++s) {
        std::array<double, kNumTheta> u0;
        if (s == 0) {
            u0 = smart_start(targets);
        } else {
            for (int j = 0; j < 4; ++j) u0[j] = log_coupling(gen);
            u0[4] = angle(gen);
            u0[5] = angle(gen);
            u0[6] = log_flux(gen);
        }
        LmOutcome run = levenberg_marquardt(u0, targets, options.max_iterations);
        if (run.cost < best.cost) best = run;
        if (best.cost < 1e-22) break;  // exact fit found
    }
    // Polish the winner.
    best = levenberg_marquardt(best.u, targets, 4 * options.max_iterations);

    InterferometerParams params = construct_params(decode(best.u), targets.attenuation);
    params.validate();
    return evaluate_against_targets(params, targets, options.residual_bound);
}

// ---------------------------------------------------------------------------

AttenuationScan optimize_attenuation(const InterferometerParams& params,
                                     const ObjectiveSpec& objective, const GridSpec& grid) {
    params.validate();
    if (!(grid.t_min > 0.0) || !(grid.t_max <= 1.0) || !(grid.t_min <= grid.t_max))
        throw ValidationError("attenuation grid must lie inside (0,1]");
    if (grid.points < 1) throw ValidationError("attenuation grid needs at least one point");
    if ((objective.kind == ObjectiveKind::EnrichmentAtF ||
         objective.kind == ObjectiveKind::SingleTestAccuracy) &&
        !(objective.prior_black >= 0.0 && objective.prior_black <= 1.0))
        throw ValidationError("prior fraction must lie in [0,1]");

    AttenuationScan scan;
    scan.curve.reserve(static_cast<std::size_t>(grid.points));
    double best_value = 0.0;

    for (int idx = 0; idx < grid.points; ++idx) {
        double t = grid.points == 1
                       ? grid.t_min
                       : grid.t_min + idx * (grid.t_max - grid.t_min) / (grid.points - 1);
        ScanPoint point;
        point.t = t;
        InterferometerParams p = params;
        p.attenuation = t;
        try {
            OutcomeTable table = outcome_table(p);
            const double f = objective.prior_black;
            const double a = table.black.p_ii.value;
            const double b = table.transparent.p_ii.value;
            switch (objective.kind) {
                case ObjectiveKind::EnrichmentAtF: {
                    double den = f * a + (1.0 - f) * b;
                    if (den > 0.0) {
                        point.value = f * a / den;
                        point.defined = true;
                    }
                    break;
                }
                case ObjectiveKind::LikelihoodRatio: {
                    if (b > 0.0) {
                        point.value = a / b;
                        point.defined = true;
                    }
                    break;
                }
                case ObjectiveKind::SingleTestAccuracy: {
                    point.value = f * (table.black.p_ii.value + table.black.p_iii->value) +
                                  (1.0 - f) * table.transparent.p_i.value;
                    point.defined = true;
                    break;
                }
            }
        } catch (const DegenerateDataError&) {
            // flagged: objective undefined at this grid point
        }
        if (point.defined && (!scan.t_opt.has_value() || point.value > best_value)) {
            scan.t_opt = point.t;
            best_value = point.value;
        }
        if (!point.defined) ++scan.flagged_points;
        scan.curve.push_back(point);
    }
    return scan;
}

const char* to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::EnrichmentAtF: return "enrichment";
        case ObjectiveKind::LikelihoodRatio: return "likelihood-ratio";
        default: return "single-test-accuracy";
    }
}

}  // namespace ifm::model
