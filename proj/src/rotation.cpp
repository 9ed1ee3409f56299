#include "oscillattr/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"
#include "oscillattr/parallel.hpp"

namespace oscillattr {

namespace {

struct SeedRun {
    Eigen::VectorXd slope;
    Eigen::VectorXd half_slope;
    Eigen::VectorXd rde_slope;
};

double standard_error(const Eigen::VectorXd& x) {
    const auto m = static_cast<double>(x.size());
    if (m < 2) return 0.0;
    const double mean = x.mean();
    return std::sqrt((x.array() - mean).square().sum() / (m - 1.0) / m);
}

}  // namespace

double RotationEstimate::pooled_standard_error() const {
    return std::hypot(spread_seed, spread_seed_half);
}

RotationEstimate estimate_rotation(const CouplingMatrix& A, const OscillatorParams& params,
                                   const EnergyStructure* es, std::span<const std::uint64_t> seeds,
                                   const RotationOptions& options) {
    if (seeds.empty()) throw ValidationError("rotation estimate needs at least one seed");
    if (options.compare_rde && es == nullptr) throw ValidationError("RDE comparison needs the energy structure");
    if (options.chunk_steps < 1) throw ValidationError("chunk_steps must be >= 1");
    const auto n = static_cast<Eigen::Index>(A.size());
    params.validate(A.size());
    const TimeGrid grid = TimeGrid::from_span(0.0, options.T, options.dt);
    const std::int64_t total = grid.n_steps;
    if (total % 2 != 0) throw ValidationError("T / dt must be even so that T/2 lies on the grid");
    const std::int64_t half = total / 2;
    PhasePoint phi0 = options.phi0.value_or(PhasePoint{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)});
    if (phi0.u.size() != n || phi0.udot.size() != n) throw ValidationError("phi0 has the wrong dimension");

    const SdeStepper sde(A, params, options.dt);
    std::optional<RdeStepper> rde;
    if (options.compare_rde) rde.emplace(A, params, *es, options.dt);

    std::vector<SeedRun> runs(seeds.size());
    parallel_for(seeds.size(), options.workers, [&](std::size_t i) {
        Eigen::MatrixXd U = phi0.u, Udot = phi0.udot, Y(2 * n, 1);
        Eigen::VectorXd z_carry;
        SeedRun& run = runs[i];
        for (std::int64_t k0 = 0; k0 < total; k0 += options.chunk_steps) {
            const std::int64_t len = std::min(options.chunk_steps, total - k0);
            const TimeGrid chunk_grid = TimeGrid::from_steps(grid.time(k0), options.dt, len);
            NoisePath chunk = sample_path(seeds[i], chunk_grid, params.eps, options.substeps);
            if (rde) {
                chunk = k0 == 0 ? ou_from_increments(std::move(chunk), OuStationary{})
                                : ou_from_increments(std::move(chunk), OuGiven{z_carry});
                if (k0 == 0) Y.col(0) << phi0.u, phi0.udot - chunk.z.col(0);
                z_carry = chunk.z.col(len);
            }
            for (std::int64_t k = 0; k < len; ++k) {
                sde.step(U, Udot, chunk.increments.col(k));
                if (rde) rde->step(Y, chunk.z.col(k), chunk.z.col(k + 1));
                if (k0 + k + 1 == half) run.half_slope = U.col(0) / grid.time(half);
            }
            if (!U.allFinite() || U.cwiseAbs().maxCoeff() > kBlowUpThreshold ||
                Udot.cwiseAbs().maxCoeff() > kBlowUpThreshold)
                throw BlowUpError(k0 + len, "SDE trajectory left the finite region");
            if (rde && (!Y.allFinite() || Y.cwiseAbs().maxCoeff() > kBlowUpThreshold))
                throw BlowUpError(k0 + len, "RDE trajectory left the finite region");
        }
        run.slope = U.col(0) / options.T;
        if (rde) run.rde_slope = Y.col(0).head(n) / options.T;
    });

    RotationEstimate est;
    est.T = options.T;
    est.seeds.assign(seeds.begin(), seeds.end());
    const auto S = static_cast<Eigen::Index>(seeds.size());
    est.per_oscillator_slopes.resize(S, n);
    est.half_slopes.resize(S, n);
    if (rde) est.rde_slopes.resize(S, n);
    for (Eigen::Index i = 0; i < S; ++i) {
        est.per_oscillator_slopes.row(i) = runs[static_cast<std::size_t>(i)].slope.transpose();
        est.half_slopes.row(i) = runs[static_cast<std::size_t>(i)].half_slope.transpose();
        if (rde) est.rde_slopes.row(i) = runs[static_cast<std::size_t>(i)].rde_slope.transpose();
    }
    est.rho_hat = est.per_oscillator_slopes.mean();
    est.rho_hat_half = est.half_slopes.mean();
    const Eigen::RowVectorXd per_j = est.per_oscillator_slopes.colwise().mean();
    est.spread_j = (per_j.array() - est.rho_hat).abs().maxCoeff();
    est.spread_seed = standard_error(est.per_oscillator_slopes.rowwise().mean());
    est.spread_seed_half = standard_error(est.half_slopes.rowwise().mean());
    if (rde) est.max_sde_rde_slope_gap = (est.rde_slopes - est.per_oscillator_slopes).cwiseAbs().maxCoeff();

    if (S < 8) est.warnings.push_back("fewer than 8 seeds; standard errors are unreliable");
    if (es != nullptr && es->a > 0.0 && options.T < 1e3 / es->a)
        est.warnings.push_back("T is shorter than 1000/a; the Cauchy check in T may be inconclusive");
    return est;
}

double default_locking_tolerance(const RotationEstimate& est) {
    return std::max(3.0 * est.pooled_standard_error(), 1e-3 * std::max(1.0, std::abs(est.rho_hat)));
}

LockingReport locking_report(const RotationEstimate& est, const ConditionReport& condition,
                             std::optional<double> tolerance) {
    LockingReport r;
    r.rho_hat = est.rho_hat;
    r.tolerance_used = tolerance.value_or(default_locking_tolerance(est));
    if (!(r.tolerance_used >= 0.0)) throw ValidationError("locking tolerance must be >= 0");
    r.spread_j = est.spread_j;
    r.cauchy_gap = std::abs(est.rho_hat - est.rho_hat_half);
    r.locked = r.spread_j <= r.tolerance_used && r.cauchy_gap <= r.tolerance_used;
    r.condition = condition;
    return r;
}

OrderReport order_preservation_check(const EnergyStructure& es, const OscillatorParams& params,
                                     const CouplingMatrix& A, const NoisePath& noise, const Eigen::VectorXd& y1,
                                     const Eigen::VectorXd& y2, double T) {
    const double ratio = T / noise.grid.dt;
    const auto k_end = static_cast<std::int64_t>(std::round(ratio));
    if (k_end > noise.grid.n_steps || std::abs(ratio - static_cast<double>(k_end)) > 1e-9 * std::max(1.0, ratio))
        throw ValidationError("order check horizon must be a whole number of steps within the noise path");
    const RdeStepper stepper(A, params, es, noise.grid.dt);
    Eigen::MatrixXd Y(y1.size(), 2);
    Y << y1, y2;
    OrderReport report;
    report.min_gap = std::numeric_limits<double>::infinity();
    stepper.advance(Y, noise, 0, k_end, [&](std::int64_t k, const Eigen::MatrixXd& block) {
        const double gap = es.e1_coordinate(block.col(1)) - es.e1_coordinate(block.col(0));
        report.min_gap = std::min(report.min_gap, gap);
        if (gap < -1e-9 && report.ordered) {
            report.ordered = false;
            report.first_violation = k;
        }
    });
    return report;
}

void write_rotation_csv(std::ostream& out, const RotationEstimate& est) {
    write_csv_row(out, {"seed", "j", "T", "slope"});
    const std::string half = format_number(0.5 * est.T), full = format_number(est.T);
    for (Eigen::Index i = 0; i < est.per_oscillator_slopes.rows(); ++i) {
        const std::string seed = std::to_string(est.seeds[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < est.per_oscillator_slopes.cols(); ++j) {
            write_csv_row(out, {seed, std::to_string(j), half, format_number(est.half_slopes(i, j))});
            write_csv_row(out, {seed, std::to_string(j), full, format_number(est.per_oscillator_slopes(i, j))});
        }
    }
}

}  // namespace oscillattr
