#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace oscillattr {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
// every output block is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    static Counter block(Counter counter, Key key);
};

/// Standard normal keyed by (seed, stream, oscillator, step index).
double keyed_normal(std::uint64_t seed, std::uint32_t stream, std::uint32_t oscillator, std::int64_t step);

struct TimeGrid {
    double t0 = 0.0;
    double t1 = 0.0;
    double dt = 0.0;
    std::int64_t n_steps = 0;

    static TimeGrid from_steps(double t0, double dt, std::int64_t n_steps);
    /// Builds [t0, t1]; (t1 - t0) / dt must be an integer to 1e-9.
    static TimeGrid from_span(double t0, double t1, double dt);

    double time(std::int64_t k) const { return t0 + static_cast<double>(k) * dt; }
    void validate() const;
};

// Two-sided Wiener increments (scaled by eps_j) and the OU path z driven by
// them. Column k of `increments` is W(t_{k+1}) - W(t_k); column k of `z` is
// z(t_k). Refinement: a path with dt = m * base_dt is built from the same
// base increments as one with dt = base_dt, so shared grid points agree.
struct NoisePath {
    TimeGrid grid;
    std::uint64_t seed = 0;
    int substeps = 1;  // base increments summed per grid step
    Eigen::VectorXd eps;
    Eigen::MatrixXd increments;  // n x n_steps
    Eigen::MatrixXd z;           // n x (n_steps + 1), empty until filled

    std::size_t oscillators() const { return static_cast<std::size_t>(eps.size()); }
    bool has_z() const { return z.cols() == grid.n_steps + 1; }
};

NoisePath sample_path(std::uint64_t seed, const TimeGrid& grid, const Eigen::VectorXd& eps, int substeps = 1);

struct OuStationary {};
struct OuBurnIn {
    double duration = 20.0;  // start from z = 0 this long before t0
};
struct OuGiven {
    Eigen::VectorXd z0;
};
using OuInit = std::variant<OuStationary, OuBurnIn, OuGiven>;

/// z_{k+1} = e^{-dt} z_k + dW_k. Stationary start draws z(t0) ~ N(0, eps^2/2)
/// from a dedicated substream of the seed.
NoisePath ou_from_increments(NoisePath path, const OuInit& init = OuStationary{});

/// Steps [k_begin, k_end) as a path whose grid starts at t = 0: the sample
/// path of theta_s omega with s = k_begin * dt.
NoisePath shift_origin(const NoisePath& path, std::int64_t k_begin, std::int64_t k_end = -1);

/// Wiener path W(t_k) - W(t_0) at grid points (n x (n_steps + 1)).
Eigen::MatrixXd cumulative_wiener(const NoisePath& path);

struct TemperednessReport {
    double epsilon_rate = 0.0;
    std::vector<double> sup_envelope;  // e^{-rate |t_k|} |z(t_k)|
    bool tempered = false;
    double r_tilde = 0.0;
};

/// Envelope test over a path that contains t = 0 and reaches |t| >= 100.
TemperednessReport check_temperedness(const NoisePath& path, double epsilon_rate);

/// CSV with columns t, j, dW, z (dW empty on the final node).
void write_path_csv(std::ostream& out, const NoisePath& path);

}  // namespace oscillattr
