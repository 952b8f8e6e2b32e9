// Command-line front end: reduce counts, calibrate the interferometer model,
// tabulate enrichment curves, run seeded ensemble simulations, and scan the
// absorber transmittance. Every output file is accompanied by a .manifest
// recording the resolved inputs, flags and seed.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ifm/inference.hpp"
#include "ifm/kv.hpp"
#include "ifm/model.hpp"
#include "ifm/montecarlo.hpp"
#include "ifm/protocol.hpp"
#include "ifm/svg.hpp"
#include "ifm/types.hpp"
#include "ifm/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConsistency = 2;
constexpr int kExitCalibration = 3;

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

class Manifest {
  public:
    explicit Manifest(const std::string& command) {
        doc_.set("command", command);
        doc_.set("version", ifm::kVersion);
    }
    void flag(const std::string& key, const std::string& value) { doc_.set(key, value); }
    void flag(const std::string& key, double value) { doc_.set_double(key, value); }
    void flag(const std::string& key, long long value) { doc_.set_int(key, value); }
    void input(const std::string& path) {
        doc_.set("input_digest:" + path, hex64(ifm::fnv1a64_file(path)));
    }
    void write_for(const std::string& out_path) {
        ifm::KvDocument copy = doc_;
        copy.set("output", out_path);
        copy.save_file(out_path + ".manifest");
    }

  private:
    ifm::KvDocument doc_;
};

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ifm::ValidationError("cannot write file: " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Probability sources shared by curves / simulate / optimize.

struct ProbsOptions {
    std::string reduce_file;  // kv written by `reduce`
    std::string params_file;  // interferometer params
    bool ideal = false;
};

void add_probs_options(CLI::App* cmd, ProbsOptions& opts) {
    auto* reduce = cmd->add_option("--probs-from", opts.reduce_file,
                                   "probability table written by `reduce` (kv)");
    auto* params = cmd->add_option("--params", opts.params_file, "interferometer params file (kv)");
    auto* ideal = cmd->add_flag("--ideal", opts.ideal, "use the ideal instrument");
    reduce->excludes(params)->excludes(ideal);
    params->excludes(ideal);
}

ifm::ValueSigma read_vs(const ifm::KvDocument& doc, const std::string& value_key,
                        const std::string& sigma_key) {
    return {doc.get_double(value_key), doc.get_double(sigma_key)};
}

ifm::OutcomeTable load_probs(const ProbsOptions& opts, Manifest& manifest) {
    if (opts.ideal) {
        manifest.flag("probs_source", "ideal");
        return ifm::model::outcome_table(ifm::model::ideal_params());
    }
    if (!opts.params_file.empty()) {
        manifest.flag("probs_source", "params:" + opts.params_file);
        manifest.input(opts.params_file);
        auto params = ifm::model::InterferometerParams::from_kv(
            ifm::KvDocument::load_file(opts.params_file));
        return ifm::model::outcome_table(params);
    }
    if (!opts.reduce_file.empty()) {
        manifest.flag("probs_source", "reduce:" + opts.reduce_file);
        manifest.input(opts.reduce_file);
        ifm::KvDocument doc = ifm::KvDocument::load_file(opts.reduce_file);
        ifm::OutcomeTable table;
        table.black.object = ifm::ObjectKind::Black;
        table.black.p_i = read_vs(doc, "p_black_i", "sig_black_i");
        table.black.p_ii = read_vs(doc, "p_black_ii", "sig_black_ii");
        table.black.p_iii = read_vs(doc, "p_black_iii", "sig_black_iii");
        table.transparent.object = ifm::ObjectKind::Transparent;
        table.transparent.p_i = read_vs(doc, "p_trans_i", "sig_trans_i");
        table.transparent.p_ii = read_vs(doc, "p_trans_ii", "sig_trans_ii");
        table.transparent.p_iii = std::nullopt;
        return table;
    }
    throw ifm::ValidationError("one of --probs-from, --params, --ideal is required");
}

// ---------------------------------------------------------------------------

struct ReduceArgs {
    std::string counts_file;
    std::string out;
    std::string format = "kv";
    double efficiency_d = 0.65;
    double background_scale = 1.0;
    bool exact_covariance = false;
};

int run_reduce(const ReduceArgs& args) {
    ifm::inference::CountsFile counts = ifm::inference::load_counts_csv(args.counts_file);
    ifm::inference::ReduceResult result = ifm::inference::reduce_counts(
        counts, args.efficiency_d,
        args.exact_covariance ? ifm::inference::CovarianceMode::Exact
                              : ifm::inference::CovarianceMode::Uncorrelated,
        args.background_scale);

    const auto& b = result.black;
    const auto& t = result.transparent;
    std::printf("outcome probabilities (one test per object)\n");
    std::printf("  black:       p_i=%s+-%s  p_ii=%s+-%s  p_iii=%s+-%s\n", fmt3(b.p_i.value).c_str(),
                fmt3(b.p_i.sigma).c_str(), fmt3(b.p_ii.value).c_str(), fmt3(b.p_ii.sigma).c_str(),
                fmt3(b.p_iii->value).c_str(), fmt3(b.p_iii->sigma).c_str());
    std::printf("  transparent: p_i=%s+-%s  p_ii=%s+-%s\n", fmt3(t.p_i.value).c_str(),
                fmt3(t.p_i.sigma).c_str(), fmt3(t.p_ii.value).c_str(), fmt3(t.p_ii.sigma).c_str());

    bool consistent = true;
    if (result.d_check) {
        const auto& check = *result.d_check;
        std::printf("object-detector consistency: predicted=%.1f+-%.1f observed=%.1f+-%.1f pull=%+.3f\n",
                    check.predicted, check.sigma_predicted, check.observed, check.sigma_observed,
                    check.pull);
        std::printf("test-path occupancy at the operating point: %s\n", fmt3(b.p_iii->value).c_str());
        consistent = check.consistent();
        if (!consistent) std::printf("INCONSISTENT: object-detector pull exceeds 3 sigma\n");
    }
    if (result.suspicious_nets) {
        std::printf("SUSPICIOUS: a net count is below -3 sigma; check the background pairing\n");
    }

    if (!args.out.empty()) {
        Manifest manifest("reduce");
        manifest.input(args.counts_file);
        manifest.flag("efficiency_d", args.efficiency_d);
        manifest.flag("background_scale", args.background_scale);
        manifest.flag("covariance", args.exact_covariance ? "exact" : "uncorrelated");
        manifest.flag("format", args.format);

        if (args.format == "kv") {
            ifm::KvDocument doc;
            doc.set_double("p_black_i", b.p_i.value);
            doc.set_double("sig_black_i", b.p_i.sigma);
            doc.set_double("p_black_ii", b.p_ii.value);
            doc.set_double("sig_black_ii", b.p_ii.sigma);
            doc.set_double("p_black_iii", b.p_iii->value);
            doc.set_double("sig_black_iii", b.p_iii->sigma);
            doc.set_double("p_trans_i", t.p_i.value);
            doc.set_double("sig_trans_i", t.p_i.sigma);
            doc.set_double("p_trans_ii", t.p_ii.value);
            doc.set_double("sig_trans_ii", t.p_ii.sigma);
            if (result.d_check) {
                doc.set_double("consistency_predicted", result.d_check->predicted);
                doc.set_double("consistency_observed", result.d_check->observed);
                doc.set_double("consistency_pull", result.d_check->pull);
            }
            doc.save_file(args.out);
        } else {
            std::string csv = "object,group,probability,sigma\n";
            csv += "black,i," + fmt6(b.p_i.value) + "," + fmt6(b.p_i.sigma) + "\n";
            csv += "black,ii," + fmt6(b.p_ii.value) + "," + fmt6(b.p_ii.sigma) + "\n";
            csv += "black,iii," + fmt6(b.p_iii->value) + "," + fmt6(b.p_iii->sigma) + "\n";
            csv += "transparent,i," + fmt6(t.p_i.value) + "," + fmt6(t.p_i.sigma) + "\n";
            csv += "transparent,ii," + fmt6(t.p_ii.value) + "," + fmt6(t.p_ii.sigma) + "\n";
            write_text_file(args.out, csv);
        }
        manifest.write_for(args.out);
    }
    return (consistent && !result.suspicious_nets) ? kExitOk : kExitConsistency;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
    std::string targets_file;
    std::string out;
    double max_residual = 0.02;
    int starts = 64;
};

int run_calibrate(const CalibrateArgs& args) {
    auto targets =
        ifm::model::CalibrationTargets::from_kv(ifm::KvDocument::load_file(args.targets_file));
    ifm::model::CalibrationOptions options;
    options.residual_bound = args.max_residual;
    options.starts = args.starts;
    ifm::model::CalibrationResult result = ifm::model::calibrate_fit(targets, options);

    std::printf("calibration residuals (forward - target):\n");
    for (std::size_t i = 0; i < result.target_names.size(); ++i) {
        std::printf("  %-12s target=%9.5f forward=%9.5f residual=%+9.5f\n",
                    result.target_names[i].c_str(), result.target_values[i],
                    result.forward_values[i], result.residuals[i]);
    }
    std::printf("max abs residual: %.5f (bound %.5f) -> %s\n", result.max_abs_residual,
                args.max_residual, result.converged ? "converged" : "CALIBRATION FAILURE");

    if (!args.out.empty()) {
        result.params.to_kv().save_file(args.out);
        Manifest manifest("calibrate");
        manifest.input(args.targets_file);
        manifest.flag("max_residual", args.max_residual);
        manifest.flag("starts", static_cast<long long>(args.starts));
        manifest.flag("converged", result.converged ? "true" : "false");
        manifest.write_for(args.out);
        std::printf("params written to %s\n", args.out.c_str());
    }
    return result.converged ? kExitOk : kExitCalibration;
}

// ---------------------------------------------------------------------------

struct CurvesArgs {
    ProbsOptions probs;
    std::string out;
    std::string svg_out;
    double grid_start = 0.0;
    double grid_stop = 1.0;
    double grid_step = 0.01;
};

int run_curves(const CurvesArgs& args) {
    Manifest manifest("curves");
    ifm::OutcomeTable table = load_probs(args.probs, manifest);
    if (!(args.grid_step > 0.0) || args.grid_start > args.grid_stop)
        throw ifm::ValidationError("curve grid needs start <= stop and a positive step");

    std::vector<double> grid;
    for (double f = args.grid_start; f <= args.grid_stop + 1e-12; f += args.grid_step)
        grid.push_back(std::min(f, 1.0));
    auto curve = ifm::protocol::enrichment_curve(table.black, table.transparent, grid);

    std::string csv;
    csv += "# enrichment (black in group ii) and depletion (transparent in group i) vs original black fraction\n";
    csv += "# undefined points (zero denominator) are written as 0,0\n";
    csv += "f_original,f_black_in_ii,sigma_ii,f_trans_in_i,sigma_i\n";
    for (const auto& p : curve) {
        double bii = p.black_in_ii_defined ? p.black_in_ii.value : 0.0;
        double sii = p.black_in_ii_defined ? p.black_in_ii.sigma : 0.0;
        double ti = p.trans_in_i_defined ? p.trans_in_i.value : 0.0;
        double si = p.trans_in_i_defined ? p.trans_in_i.sigma : 0.0;
        csv += fmt6(p.f_original) + "," + fmt6(bii) + "," + fmt6(sii) + "," + fmt6(ti) + "," +
               fmt6(si) + "\n";
    }

    manifest.flag("grid_start", args.grid_start);
    manifest.flag("grid_stop", args.grid_stop);
    manifest.flag("grid_step", args.grid_step);
    if (!args.out.empty()) {
        write_text_file(args.out, csv);
        manifest.write_for(args.out);
    } else {
        std::fputs(csv.c_str(), stdout);
    }
    if (!args.svg_out.empty()) {
        ifm::svg::write_enrichment_curves(args.svg_out, curve, "single-test separation");
        manifest.write_for(args.svg_out);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    ProbsOptions probs;
    std::string out;
    std::string format = "kv";
    std::int64_t n = 0;
    double f = 0.5;
    std::string strategy = "single";
    int rounds = 1;
    std::uint64_t seed = 0;
    std::string composition = "exact";
    int threads = 1;
    int retest_cap = 10000;
};

int run_simulate(const SimulateArgs& args) {
    Manifest manifest("simulate");
    ifm::OutcomeTable table = load_probs(args.probs, manifest);

    ifm::mc::EnsembleSpec spec;
    spec.n_objects = args.n;
    spec.f_black = args.f;
    spec.composition = args.composition == "binomial" ? ifm::mc::CompositionMode::Binomial
                                                      : ifm::mc::CompositionMode::ExactCount;

    ifm::protocol::Strategy strategy;
    if (args.strategy == "single") strategy.kind = ifm::protocol::StrategyKind::SingleTest;
    else if (args.strategy == "repeat-i") strategy.kind = ifm::protocol::StrategyKind::RepeatGroupI;
    else if (args.strategy == "purify-ii") strategy.kind = ifm::protocol::StrategyKind::PurifyGroupII;
    else throw ifm::ValidationError("unknown strategy '" + args.strategy + "'");
    strategy.purify_rounds = args.rounds;

    ifm::mc::RunOptions options;
    options.threads = args.threads;
    options.retest_cap = args.retest_cap;

    ifm::mc::EnsembleReport report = ifm::mc::run_strategy(spec, strategy, table, args.seed, options);
    auto expectation = ifm::mc::analytic_expectation(spec, strategy, table);
    auto checks = ifm::mc::empirical_vs_analytic(report, expectation);

    std::printf("ensemble: n=%lld f=%.4f strategy=%s seed=%llu\n",
                static_cast<long long>(args.n), args.f,
                ifm::protocol::to_string(strategy.kind),
                static_cast<unsigned long long>(args.seed));
    std::fputs(report.group_breakdown_csv().c_str(), stdout);
    std::printf("neutrons_used=%lld absorptions=%lld retest_capped=%lld\n",
                static_cast<long long>(report.neutrons_used),
                static_cast<long long>(report.absorptions),
                static_cast<long long>(report.retest_capped));

    bool ok = true;
    for (const auto& check : checks) {
        std::printf("pull %-28s empirical=%.6f expected=%.6f pull=%+.3f\n", check.quantity.c_str(),
                    check.empirical, check.expected, check.pull);
        if (std::abs(check.pull) > 5.0) ok = false;
    }
    if (!ok) std::printf("ORACLE FAILURE: a pull exceeds 5 sigma\n");

    if (!args.out.empty()) {
        manifest.flag("n", static_cast<long long>(args.n));
        manifest.flag("f", args.f);
        manifest.flag("strategy", args.strategy);
        manifest.flag("rounds", static_cast<long long>(args.rounds));
        manifest.flag("seed", static_cast<long long>(args.seed));
        manifest.flag("composition", args.composition);
        manifest.flag("retest_cap", static_cast<long long>(args.retest_cap));
        manifest.flag("format", args.format);
        if (args.format == "kv") {
            ifm::KvDocument doc = report.to_kv();
            doc.set("strategy", args.strategy);
            doc.set_int("seed", static_cast<long long>(args.seed));
            doc.save_file(args.out);
        } else {
            write_text_file(args.out, report.group_breakdown_csv());
        }
        manifest.write_for(args.out);
    }
    return ok ? kExitOk : kExitConsistency;
}

// ---------------------------------------------------------------------------

struct OptimizeArgs {
    ProbsOptions probs;  // params or ideal only; reduce output carries no model
    std::string out;
    std::string objective = "enrichment";
    double f = 0.5;
    int grid_points = 512;
    double grid_start = 0.0;  // 0: pick 1/points
    double grid_stop = 1.0;
};

int run_optimize(const OptimizeArgs& args) {
    Manifest manifest("optimize");
    if (!args.probs.reduce_file.empty())
        throw ifm::ValidationError("optimize needs --params or --ideal (a model, not a table)");
    ifm::model::InterferometerParams params =
        args.probs.ideal ? ifm::model::ideal_params()
                         : ifm::model::InterferometerParams::from_kv(
                               ifm::KvDocument::load_file(args.probs.params_file));
    if (!args.probs.ideal) manifest.input(args.probs.params_file);

    ifm::model::ObjectiveSpec objective;
    if (args.objective == "enrichment") objective.kind = ifm::model::ObjectiveKind::EnrichmentAtF;
    else if (args.objective == "likelihood") objective.kind = ifm::model::ObjectiveKind::LikelihoodRatio;
    else if (args.objective == "accuracy") objective.kind = ifm::model::ObjectiveKind::SingleTestAccuracy;
    else throw ifm::ValidationError("unknown objective '" + args.objective + "'");
    objective.prior_black = args.f;

    ifm::model::GridSpec grid;
    grid.points = args.grid_points;
    grid.t_min = args.grid_start > 0.0 ? args.grid_start : 1.0 / args.grid_points;
    grid.t_max = args.grid_stop;

    ifm::model::AttenuationScan scan = ifm::model::optimize_attenuation(params, objective, grid);

    std::string csv = "t,objective_value,defined\n";
    for (const auto& point : scan.curve) {
        csv += fmt6(point.t);
        csv += ',';
        csv += point.defined ? fmt6(point.value) : "nan";
        csv += ',';
        csv += point.defined ? "1" : "0";
        csv += '\n';
    }

    std::printf("objective: %s (prior f=%.3f), %d grid points, %d flagged\n",
                ifm::model::to_string(objective.kind), args.f,
                static_cast<int>(scan.curve.size()), scan.flagged_points);
    if (scan.t_opt) {
        bool in_band = *scan.t_opt >= 0.10 && *scan.t_opt <= 0.25;
        std::printf("optimum t=%.6f; inside design band [0.10,0.25]: %s\n", *scan.t_opt,
                    in_band ? "yes" : "no");
    } else {
        std::printf("optimum undefined: objective unbounded or undefined at every grid point\n");
    }

    if (!args.out.empty()) {
        manifest.flag("objective", args.objective);
        manifest.flag("f", args.f);
        manifest.flag("grid_points", static_cast<long long>(args.grid_points));
        write_text_file(args.out, csv);
        manifest.write_for(args.out);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interaction-free measurement toolkit: non-ideal two-path interferometer "
                 "model, count reduction, classification strategies, ensemble simulation"};
    app.require_subcommand(1);

    ReduceArgs reduce_args;
    auto* reduce = app.add_subcommand("reduce", "counts -> outcome probabilities with sigmas");
    reduce->add_option("counts", reduce_args.counts_file, "counts csv (detector,config,counts)")
        ->required();
    reduce->add_option("--out", reduce_args.out, "write machine-readable table here");
    reduce->add_option("--format", reduce_args.format, "kv|csv")
        ->check(CLI::IsMember({"kv", "csv"}));
    reduce->add_option("--efficiency-d", reduce_args.efficiency_d, "object-detector efficiency")
        ->check(CLI::Range(1e-9, 1.0));
    reduce->add_option("--background-scale", reduce_args.background_scale,
                       "background live-time scale factor");
    reduce->add_flag("--exact-covariance", reduce_args.exact_covariance,
                     "propagate the numerator/denominator covariance exactly");

    CalibrateArgs calibrate_args;
    auto* calibrate = app.add_subcommand("calibrate", "targets -> interferometer params + residuals");
    calibrate->add_option("targets", calibrate_args.targets_file, "calibration targets (kv)")
        ->required();
    calibrate->add_option("--out", calibrate_args.out, "write fitted params here");
    calibrate->add_option("--max-residual", calibrate_args.max_residual,
                          "max abs forward residual accepted as converged");
    calibrate->add_option("--starts", calibrate_args.starts, "multi-start count")
        ->check(CLI::PositiveNumber);

    CurvesArgs curves_args;
    auto* curves = app.add_subcommand("curves", "enrichment/depletion curves as csv (+svg)");
    add_probs_options(curves, curves_args.probs);
    curves->add_option("--out", curves_args.out, "write csv here (default: stdout)");
    curves->add_option("--svg", curves_args.svg_out, "also render an svg");
    curves->add_option("--grid-start", curves_args.grid_start, "first original fraction");
    curves->add_option("--grid-stop", curves_args.grid_stop, "last original fraction");
    curves->add_option("--grid-step", curves_args.grid_step, "fraction step");

    SimulateArgs simulate_args;
    auto* simulate = app.add_subcommand("simulate", "seeded ensemble run + oracle pulls");
    add_probs_options(simulate, simulate_args.probs);
    simulate->add_option("--n", simulate_args.n, "number of objects")
        ->required()
        ->check(CLI::PositiveNumber);
    simulate->add_option("--f", simulate_args.f, "black fraction of the ensemble")
        ->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--strategy", simulate_args.strategy, "single|repeat-i|purify-ii")
        ->check(CLI::IsMember({"single", "repeat-i", "purify-ii"}));
    simulate->add_option("--rounds", simulate_args.rounds, "purification rounds N")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--seed", simulate_args.seed, "64-bit master seed");
    simulate->add_option("--composition", simulate_args.composition, "exact|binomial")
        ->check(CLI::IsMember({"exact", "binomial"}));
    simulate->add_option("--threads", simulate_args.threads, "worker threads")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--retest-cap", simulate_args.retest_cap,
                         "max tests per object under repeat-i")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--out", simulate_args.out, "write the report here");
    simulate->add_option("--format", simulate_args.format, "kv|csv")
        ->check(CLI::IsMember({"kv", "csv"}));

    OptimizeArgs optimize_args;
    auto* optimize = app.add_subcommand("optimize", "scan absorber transmittance for an objective");
    add_probs_options(optimize, optimize_args.probs);
    optimize->add_option("--objective", optimize_args.objective, "enrichment|likelihood|accuracy")
        ->check(CLI::IsMember({"enrichment", "likelihood", "accuracy"}));
    optimize->add_option("--f", optimize_args.f, "prior black fraction")
        ->check(CLI::Range(0.0, 1.0));
    optimize->add_option("--grid-points", optimize_args.grid_points, "scan resolution")
        ->check(CLI::PositiveNumber);
    optimize->add_option("--grid-start", optimize_args.grid_start, "first t (default 1/points)");
    optimize->add_option("--grid-stop", optimize_args.grid_stop, "last t");
    optimize->add_option("--out", optimize_args.out, "write the scan csv here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (reduce->parsed()) return run_reduce(reduce_args);
        if (calibrate->parsed()) return run_calibrate(calibrate_args);
        if (curves->parsed()) return run_curves(curves_args);
        if (simulate->parsed()) return run_simulate(simulate_args);
        if (optimize->parsed()) return run_optimize(optimize_args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitValidation;
}
