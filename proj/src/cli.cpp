#include "oscillattr/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oscillattr/attractor.hpp"
#include "oscillattr/config.hpp"
#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"
#include "oscillattr/parallel.hpp"
#include "oscillattr/rotation.hpp"

#ifndef OSCILLATTR_VERSION
#define OSCILLATTR_VERSION "0.1.0+unknown"
#endif

namespace oscillattr {

using nlohmann::json;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json vector_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

// Writes artifacts into the output directory, each with a sidecar
// <name>.meta.json holding provenance.
class ArtifactWriter {
public:
    ArtifactWriter(const RunConfig& cfg, std::string subcommand, std::ostream& log)
        : cfg_(cfg), subcommand_(std::move(subcommand)), log_(log) {
        std::filesystem::create_directories(cfg.outputs.directory);
    }

    void set_seeds(std::vector<std::uint64_t> seeds) { seeds_ = std::move(seeds); }

    void write(const std::string& name, const std::string& body) {
        const auto path = cfg_.outputs.directory / name;
        write_file(path, body);
        json meta = {{"artifact", name},
                     {"subcommand", subcommand_},
                     {"config_sha256", cfg_.sha256},
                     {"tool_version", tool_version()},
                     {"seed0", cfg_.numerics.seed0},
                     {"seeds", seeds_},
                     {"params_sha256", sha256_hex(cfg_.params.canonical())},
                     {"dt", cfg_.numerics.dt},
                     {"scheme", to_string(cfg_.numerics.scheme)},
                     {"created_utc", utc_timestamp()}};
        write_file(cfg_.outputs.directory / (name + ".meta.json"), meta.dump(2) + "\n");
        log_ << "wrote " << path.string() << "\n";
    }

    void write_json(const std::string& name, const json& doc) {
        if (cfg_.outputs.wants("json")) write(name, doc.dump(2) + "\n");
    }

    template <class Fill>
    void write_csv(const std::string& name, Fill fill) {
        if (!cfg_.outputs.wants("csv")) return;
        std::ostringstream body;
        fill(body);
        write(name, body.str());
    }

private:
    static void write_file(const std::filesystem::path& path, const std::string& body) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << body;
        if (!out) throw std::runtime_error("failed writing " + path.string());
    }

    const RunConfig& cfg_;
    std::string subcommand_;
    std::ostream& log_;
    std::vector<std::uint64_t> seeds_;
};

std::vector<std::uint64_t> seeds_for(const RunConfig& cfg, std::string_view tag) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < cfg.numerics.n_seeds; ++i)
        seeds.push_back(derive_seed(cfg.numerics.seed0, tag, static_cast<std::uint64_t>(i)));
    return seeds;
}

json condition_json(const ConditionReport& r) {
    json j = {{"lambda1", r.lambda1},
              {"delta", r.delta},
              {"a", r.a},
              {"lf", r.LF},
              {"gap_ok", r.gap_ok},
              {"gamma_star", r.gamma_star},
              {"cond_4c_value", r.cond_4c_value},
              {"cond_4c_ok", r.cond_4c_ok},
              {"m2", r.M2 ? json(*r.M2) : json(nullptr)},
              {"remark54_c", r.remark54_c},
              {"alpha_threshold", r.alpha_threshold},
              {"k_threshold", r.K_threshold},
              {"delta_window_low", r.delta_window.first},
              {"delta_window_high", r.delta_window.second},
              {"thresholds_met", r.thresholds_met},
              {"locked_regime", r.locked_regime}};
    return j;
}

double delta_for(const RunConfig& cfg, const SpectrumReport& spectrum) {
    return cfg.numerics.delta.value_or(choose_delta(cfg.params.alpha, cfg.params.K, spectrum.lambda1));
}

// ---------------------------------------------------------------- subcommands

void cmd_spectrum(const RunConfig& cfg, std::ostream& out) {
    const SpectrumReport spectrum = validate_ha(cfg.A);
    const auto mu = mu_eigenvalues(cfg.params.alpha, cfg.params.K, spectrum.eigenvalues);
    ArtifactWriter writer(cfg, "spectrum", out);
    json mu_rows = json::array();
    for (std::size_t i = 0; i < mu.size(); ++i)
        mu_rows.push_back({{"lambda", spectrum.eigenvalues[i]},
                           {"mu_plus_re", mu[i].first.real()},
                           {"mu_plus_im", mu[i].first.imag()},
                           {"mu_minus_re", mu[i].second.real()},
                           {"mu_minus_im", mu[i].second.imag()}});
    json doc = {{"size", cfg.A.size()},
                {"eigenvalues", spectrum.eigenvalues},
                {"lambda1", spectrum.lambda1},
                {"ha_satisfied", spectrum.ha_satisfied},
                {"violation", spectrum.violation ? json(*spectrum.violation) : json(nullptr)},
                {"mu", mu_rows}};
    writer.write_json("spectrum.json", doc);
    writer.write_csv("mu_eigenvalues.csv", [&](std::ostream& csv) {
        write_csv_row(csv, {"i", "lambda", "mu_plus_re", "mu_plus_im", "mu_minus_re", "mu_minus_im"});
        for (std::size_t i = 0; i < mu.size(); ++i)
            write_csv_row(csv, {std::to_string(i), format_number(spectrum.eigenvalues[i]),
                                format_number(mu[i].first.real()), format_number(mu[i].first.imag()),
                                format_number(mu[i].second.real()), format_number(mu[i].second.imag())});
    });
    out << "eigenvalues:";
    for (double e : spectrum.eigenvalues) out << " " << format_number(e);
    out << "\nlambda1: " << format_number(spectrum.lambda1) << "\n";
}

void cmd_check_conditions(const RunConfig& cfg, std::ostream& out) {
    const ConditionReport report = check_conditions(cfg.A, cfg.params, cfg.numerics.delta);
    ArtifactWriter writer(cfg, "check-conditions", out);
    const json doc = condition_json(report);
    writer.write_json("conditions.json", doc);
    out << doc.dump(2) << "\n";
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const SpectrumReport spectrum = validate_ha(cfg.A);
    const EnergyStructure es = build_energy(cfg.A, cfg.params, delta_for(cfg, spectrum));
    const double T = cfg.numerics.T.value_or(10.0);
    const auto seeds = seeds_for(cfg, "simulate");
    const TimeGrid grid = TimeGrid::from_span(0.0, T, cfg.numerics.dt);
    const auto n = static_cast<Eigen::Index>(cfg.A.size());
    const PhasePoint phi0{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};

    struct Result {
        SdeTrajectory sde;
        RdeTrajectory rde;
        double gap = 0.0;
    };
    std::vector<Result> results(seeds.size());
    parallel_for(seeds.size(), cfg.numerics.workers, [&](std::size_t i) {
        const NoisePath noise =
            ou_from_increments(sample_path(seeds[i], grid, cfg.params.eps, cfg.numerics.substeps), OuStationary{});
        results[i].sde = integrate_sde(phi0, noise, cfg.A, cfg.params, cfg.numerics.record_every);
        const State y0{phi0.u, phi0.udot - noise.z.col(0)};
        results[i].rde = integrate_rde(y0, noise, cfg.A, cfg.params, es,
                                       {cfg.numerics.scheme, cfg.numerics.record_every});
        results[i].gap = sde_rde_discrepancy(phi0, noise, cfg.A, cfg.params, es, T);
    });

    ArtifactWriter writer(cfg, "simulate", out);
    writer.set_seeds(seeds);
    json runs = json::array();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        writer.write_csv("trajectory_sde_" + std::to_string(i) + ".csv",
                         [&](std::ostream& csv) { write_trajectory_csv(csv, results[i].sde); });
        writer.write_csv("trajectory_rde_" + std::to_string(i) + ".csv",
                         [&](std::ostream& csv) { write_trajectory_csv(csv, results[i].rde); });
        runs.push_back({{"index", i},
                        {"seed", seeds[i]},
                        {"u_final", vector_json(results[i].sde.states.back().u)},
                        {"udot_final", vector_json(results[i].sde.states.back().udot)},
                        {"max_sde_rde_u_gap", results[i].gap}});
    }
    writer.write_json("simulate.json", {{"t_end", T}, {"dt", cfg.numerics.dt}, {"runs", runs}});
}

void cmd_attractor(const RunConfig& cfg, std::ostream& out) {
    const SpectrumReport spectrum = validate_ha(cfg.A);
    const EnergyStructure es = build_energy(cfg.A, cfg.params, delta_for(cfg, spectrum));
    const ConditionReport condition = check_conditions(cfg.A, cfg.params, cfg.numerics.delta);
    const double kappa = cfg.params.g_model.kappa();
    const auto seeds = seeds_for(cfg, "attractor");

    CloudOptions options;
    options.T = cfg.numerics.T.value_or(50.0);
    options.dt = cfg.numerics.dt;
    options.substeps = cfg.numerics.substeps;
    options.scheme = cfg.numerics.scheme;
    options.workers = 1;
    CurveCloudOptions curve_options;
    curve_options.cloud = options;
    curve_options.n_bins = cfg.numerics.n_bins;

    struct Result {
        AbsorbingEstimate absorbing;
        AttractorEstimate cloud;
        AttractorEstimate curve;
        std::optional<CurveFit> fit;
        std::string fit_error;
    };
    std::vector<Result> results(seeds.size());
    parallel_for(seeds.size(), cfg.numerics.workers, [&](std::size_t i) {
        Result& r = results[i];
        const double horizon = std::max(options.T, 100.0);
        r.absorbing = absorbing_radius(es, cfg.params, pullback_noise(seeds[i], -horizon, 0.0, options, cfg.params.eps));
        const auto initial = initial_cloud(es, kappa, r.absorbing.R0, cfg.numerics.n_cloud,
                                           derive_seed(cfg.numerics.seed0, "attractor-cloud", i));
        r.cloud = pullback_cloud(es, cfg.params, cfg.A, seeds[i], initial, options);
        CurveCloudOptions local = curve_options;
        local.q_radius = r.absorbing.R0;
        r.curve = curve_cloud(es, cfg.params, cfg.A, seeds[i], local);
        try {
            r.fit = fit_horizontal_curve(r.curve.samples, es, kappa, cfg.numerics.n_bins);
        } catch (const ValidationError& e) {
            r.fit_error = e.what();
        }
    });

    ArtifactWriter writer(cfg, "attractor", out);
    writer.set_seeds(seeds);
    std::vector<AttractorEstimate> clouds, curves;
    json per_seed = json::array();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const Result& r = results[i];
        clouds.push_back(r.cloud);
        curves.push_back(r.curve);
        json fit = nullptr;
        if (r.fit) {
            fit = {{"lipschitz_est", r.fit->lipschitz_est},
                   {"periodicity_defect", r.fit->periodicity_defect},
                   {"max_bin_spread", r.fit->max_bin_spread},
                   {"max_phi_norm", r.fit->max_phi_norm},
                   {"occupancy", r.fit->occupancy},
                   {"n_bins", r.fit->n_bins},
                   {"e2_diameter", r.curve.e2_diameter}};
        }
        per_seed.push_back({{"seed", seeds[i]},
                            {"a1", r.absorbing.a1},
                            {"a2", r.absorbing.a2},
                            {"m1", r.absorbing.M1},
                            {"r_tilde", r.absorbing.r_tilde},
                            {"r0", r.absorbing.R0},
                            {"max_q_norm", r.cloud.max_q_norm},
                            {"absorbed", r.cloud.max_q_norm <= r.absorbing.R0},
                            {"initial_diameter", r.cloud.initial_diameter},
                            {"horizons", r.cloud.horizons},
                            {"diameters", r.cloud.diameters},
                            {"e2_diameter", r.cloud.e2_diameter},
                            {"curve_fit", fit},
                            {"curve_fit_error", r.fit_error.empty() ? json(nullptr) : json(r.fit_error)}});
    }
    writer.write_csv("attractor_cloud.csv", [&](std::ostream& csv) { write_cloud_csv(csv, clouds); });
    writer.write_csv("attractor_curve.csv", [&](std::ostream& csv) { write_cloud_csv(csv, curves); });
    writer.write_json("attractor.json",
                      {{"t_horizon", options.T},
                       {"n_cloud", cfg.numerics.n_cloud},
                       {"condition", condition_json(condition)},
                       {"spread_threshold_note",
                        "the 0.05 within-bin spread threshold is an engineering choice, not a derived bound"},
                       {"seeds", per_seed}});
}

void cmd_rotation(const RunConfig& cfg, std::ostream& out) {
    const SpectrumReport spectrum = validate_ha(cfg.A);
    const EnergyStructure es = build_energy(cfg.A, cfg.params, delta_for(cfg, spectrum));
    const ConditionReport condition = check_conditions(cfg.A, cfg.params, cfg.numerics.delta);
    const auto seeds = seeds_for(cfg, "rotation");
    RotationOptions options;
    options.T = cfg.numerics.T.value_or(2000.0);
    options.dt = cfg.numerics.dt;
    options.substeps = cfg.numerics.substeps;
    options.workers = cfg.numerics.workers;
    const RotationEstimate est = estimate_rotation(cfg.A, cfg.params, &es, seeds, options);
    const LockingReport lock = locking_report(est, condition);

    ArtifactWriter writer(cfg, "rotation", out);
    writer.set_seeds(seeds);
    writer.write_csv("rotation.csv", [&](std::ostream& csv) { write_rotation_csv(csv, est); });
    writer.write_json("rotation.json", {{"t_horizon", est.T},
                                        {"rho_hat", est.rho_hat},
                                        {"rho_hat_half", est.rho_hat_half},
                                        {"spread_j", est.spread_j},
                                        {"spread_seed", est.spread_seed},
                                        {"spread_seed_half", est.spread_seed_half},
                                        {"pooled_standard_error", est.pooled_standard_error()},
                                        {"max_sde_rde_slope_gap", est.max_sde_rde_slope_gap},
                                        {"locked", lock.locked},
                                        {"tolerance_used", lock.tolerance_used},
                                        {"cauchy_gap", lock.cauchy_gap},
                                        {"warnings", est.warnings},
                                        {"condition", condition_json(condition)}});
    out << "rho_hat: " << format_number(est.rho_hat) << "\nlocked: " << (lock.locked ? "true" : "false") << "\n";
}

}  // namespace

std::string tool_version() {
    return OSCILLATTR_VERSION;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coupled noisy oscillator lattices: spectra, conditions, trajectories, attractors, rotation"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<unsigned> workers;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"spectrum", "eigenvalues of A and the mu pairs"},
        {"check-conditions", "decay rate, Lipschitz constant and locked-regime conditions"},
        {"simulate", "SDE and RDE trajectories from shared noise"},
        {"attractor", "pullback clouds, absorbing radius and horizontal-curve fit"},
        {"rotation", "rotation number and frequency locking"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
        sub->add_option("--workers", workers, "worker threads (overrides numerics.workers)")
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << tool_version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        RunConfig cfg = load_config(config_path);
        if (out_dir) cfg.outputs.directory = *out_dir;
        if (workers) cfg.numerics.workers = *workers;
        if (command == "spectrum") cmd_spectrum(cfg, out);
        else if (command == "check-conditions") cmd_check_conditions(cfg, out);
        else if (command == "simulate") cmd_simulate(cfg, out);
        else if (command == "attractor") cmd_attractor(cfg, out);
        else cmd_rotation(cfg, out);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const BlowUpError& e) {
        err << "numerical blow-up: " << e.what() << "\n";
        return kExitBlowUp;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace oscillattr
