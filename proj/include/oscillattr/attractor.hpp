#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "oscillattr/coupling.hpp"
#include "oscillattr/dynamics.hpp"
#include "oscillattr/energy.hpp"
#include "oscillattr/noise.hpp"

namespace oscillattr {

// Radius of the absorbing pseudo-ball: every tempered set ends up inside
// {Y : |QY|_E <= R0(omega)}.
struct AbsorbingEstimate {
    double a = 0.0;
    double a1 = 0.0;  // M1 sqrt(3 alpha^2 - 6 alpha + 4)
    double a2 = 0.0;  // M1 sqrt(3 |f|^2 + 3 beta^2 c1^2 n)
    double M1 = 0.0;
    double r_tilde = 0.0;
    double R0 = 0.0;  // (4 a1 / a) r_tilde + 2 a2 / a
};

/// Needs z filled on a path containing t = 0 with horizon >= 100; the
/// temperedness test runs at rate a / 2 and must pass.
AbsorbingEstimate absorbing_radius(const EnergyStructure& es, const OscillatorParams& params, const NoisePath& noise);

/// Default initial cloud: E1 coordinate stratified over [0, kappa) with one
/// uniform draw per stratum, E2 coordinates uniform in the E-ball of radius R.
std::vector<Eigen::VectorXd> initial_cloud(const EnergyStructure& es, double kappa, double radius, int n_points,
                                           std::uint64_t seed);

/// Quotient distance sqrt(|eta0|_E^2 circ(s1 - s2)^2 + |q1 - q2|^2).
double quotient_distance(const QuotientPoint& x, const QuotientPoint& y, double eta0_norm, double kappa);

/// max pairwise |q_i - q_j| over a cloud.
double e2_diameter(std::span<const QuotientPoint> cloud);

struct CloudOptions {
    double T = 50.0;
    double dt = 1e-3;
    int substeps = 1;
    RdeScheme scheme = RdeScheme::exponential_midpoint;
    std::vector<double> horizon_fractions{0.25, 0.5, 1.0};
    unsigned workers = 1;
};

/// Noise on [t0, t1] with stationary OU start at t0, on the options' grid.
NoisePath pullback_noise(std::uint64_t seed, double t0, double t1, const CloudOptions& options,
                         const Eigen::VectorXd& eps);

struct AttractorEstimate {
    std::uint64_t seed = 0;
    double T = 0.0;
    double initial_diameter = 0.0;
    std::vector<double> horizons;   // ascending; the last one is T
    std::vector<double> diameters;  // e2_diameter at each horizon
    double e2_diameter = 0.0;       // at T
    std::vector<QuotientPoint> samples;  // time-0 cloud for horizon T
    std::vector<Eigen::VectorXd> states; // the same points unreduced
    double max_q_norm = 0.0;        // max |QY(0)|_E over samples
};

/// Integrates every initial point over [-tau, 0] for each horizon tau,
/// driven by one two-sided path with seed `seed`, and reduces mod p0.
AttractorEstimate pullback_cloud(const EnergyStructure& es, const OscillatorParams& params, const CouplingMatrix& A,
                                 std::uint64_t seed, std::span<const Eigen::VectorXd> initial, const CloudOptions& options);

std::vector<AttractorEstimate> pullback_clouds(const EnergyStructure& es, const OscillatorParams& params,
                                               const CouplingMatrix& A, std::span<const std::uint64_t> seeds,
                                               std::span<const Eigen::VectorXd> initial, const CloudOptions& options);

struct CurveCloudOptions {
    CloudOptions cloud;
    int n_bins = 64;
    int per_bin = 2;        // flat initial curves, one per replicate
    int scan_points = 64;   // coarse scan of the initial E1 coordinate per curve
    double target_tolerance = 1e-4;
    int max_iterations = 60;
    double q_radius = 0.0;  // radius of the initial E2 offsets; 0 = use R0
    std::uint64_t jitter_seed = 1;
};

/// Time-0 cloud whose E1 coordinates are stratified over the bins. Each bin
/// receives per_bin points, each found by solving for the initial E1
/// coordinate on a flat curve {xi eta0 + y2} that lands on a jittered target
/// inside the bin. Only the full horizon T is used.
AttractorEstimate curve_cloud(const EnergyStructure& es, const OscillatorParams& params, const CouplingMatrix& A,
                              std::uint64_t seed, const CurveCloudOptions& options);

struct CurveFit {
    int n_bins = 0;
    double kappa = 0.0;
    std::vector<int> counts;
    std::vector<double> bin_s;       // mean s of the bin's points
    std::vector<Eigen::VectorXd> phi;  // mean q of the bin's points (empty when unoccupied)
    double occupancy = 0.0;
    double lipschitz_est = 0.0;
    double periodicity_defect = 0.0;
    double max_bin_spread = 0.0;
    double max_phi_norm = 0.0;
};

/// Requires at least 80% of the bins to be occupied.
CurveFit fit_horizontal_curve(std::span<const QuotientPoint> cloud, const EnergyStructure& es, double kappa,
                              int n_bins = 64);

/// sup_{x in from} inf_{y in to} d(x, y) in the quotient metric.
double hausdorff_semidistance(std::span<const QuotientPoint> from, std::span<const QuotientPoint> to,
                              double eta0_norm, double kappa);

struct InvarianceReport {
    double distance = 0.0;  // from the pushed cloud to the theta_t omega cloud
    double reverse = 0.0;
    std::vector<QuotientPoint> pushed;
    std::vector<QuotientPoint> shifted;
};

/// Pushes the omega-cloud (pullback horizon T) forward by t and compares it
/// with the cloud built for theta_t omega at the same horizon. t must be a
/// whole number of steps.
InvarianceReport invariance_check(const EnergyStructure& es, const OscillatorParams& params, const CouplingMatrix& A,
                                  std::uint64_t seed, std::span<const Eigen::VectorXd> initial, double T, double t,
                                  const CloudOptions& options);

/// CSV columns seed, T, s, q_1 .. q_m.
void write_cloud_csv(std::ostream& out, std::span<const AttractorEstimate> clouds);

}  // namespace oscillattr
