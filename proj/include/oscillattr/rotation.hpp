#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oscillattr/coupling.hpp"
#include "oscillattr/dynamics.hpp"
#include "oscillattr/energy.hpp"
#include "oscillattr/noise.hpp"

namespace oscillattr {

struct RotationOptions {
    double T = 2000.0;
    double dt = 1e-3;
    int substeps = 1;
    std::optional<PhasePoint> phi0;  // defaults to the origin
    bool compare_rde = true;
    std::int64_t chunk_steps = 1 << 16;
    unsigned workers = 1;
};

// Slopes u_j(T)/T per (seed, j), also read off the same runs at T/2.
struct RotationEstimate {
    double T = 0.0;
    std::vector<std::uint64_t> seeds;
    Eigen::MatrixXd per_oscillator_slopes;  // seeds x n, at T
    Eigen::MatrixXd half_slopes;            // seeds x n, at T/2
    double rho_hat = 0.0;
    double rho_hat_half = 0.0;
    double spread_j = 0.0;          // max_j |mean_seed slope_j - rho_hat|
    double spread_seed = 0.0;       // standard error of the per-seed mean slope at T
    double spread_seed_half = 0.0;  // the same at T/2
    Eigen::MatrixXd rde_slopes;     // seeds x n when compared
    double max_sde_rde_slope_gap = 0.0;
    std::vector<std::string> warnings;

    double pooled_standard_error() const;
};

/// Needs es only when options.compare_rde is set.
RotationEstimate estimate_rotation(const CouplingMatrix& A, const OscillatorParams& params,
                                   const EnergyStructure* es, std::span<const std::uint64_t> seeds,
                                   const RotationOptions& options);

struct LockingReport {
    bool locked = false;
    double rho_hat = 0.0;
    double tolerance_used = 0.0;
    double spread_j = 0.0;
    double cauchy_gap = 0.0;  // |rho_hat(T) - rho_hat(T/2)|
    ConditionReport condition;
};

/// max(3 * pooled standard error, 1e-3 * max(1, |rho_hat|)).
double default_locking_tolerance(const RotationEstimate& est);

LockingReport locking_report(const RotationEstimate& est, const ConditionReport& condition,
                             std::optional<double> tolerance = std::nullopt);

struct OrderReport {
    bool ordered = true;
    double min_gap = 0.0;              // min over grid times of c2 - c1
    std::int64_t first_violation = -1;  // grid index
};

/// Integrates Y1 and Y2 under the same noise and checks that the E1
/// coordinate of Y2 stays >= that of Y1 (slack 1e-9) at every grid time up
/// to T.
OrderReport order_preservation_check(const EnergyStructure& es, const OscillatorParams& params,
                                     const CouplingMatrix& A, const NoisePath& noise, const Eigen::VectorXd& y1,
                                     const Eigen::VectorXd& y2, double T);

/// CSV columns seed, j, T, slope (rows for T/2 and T).
void write_rotation_csv(std::ostream& out, const RotationEstimate& est);

}  // namespace oscillattr
