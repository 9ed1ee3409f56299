#include "oscillattr/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"

namespace oscillattr {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr std::uint32_t kIncrementStream = 0;
constexpr std::uint32_t kOuInitStream = 1;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

inline double unit_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::int64_t aligned_index(double t, double step) {
    const double ratio = t / step;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-6)
        throw ValidationError("grid start is not aligned with the base noise resolution");
    return static_cast<std::int64_t>(rounded);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double keyed_normal(std::uint64_t seed, std::uint32_t stream, std::uint32_t oscillator, std::int64_t step) {
    const auto s = static_cast<std::uint64_t>(step);
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                                  oscillator, stream};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto out = Philox4x32::block(ctr, key);
    const double u1 = unit_open(out[0], out[1]);
    const double u2 = unit_open(out[2], out[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

TimeGrid TimeGrid::from_steps(double t0, double dt, std::int64_t n_steps) {
    TimeGrid g{t0, t0 + static_cast<double>(n_steps) * dt, dt, n_steps};
    g.validate();
    return g;
}

TimeGrid TimeGrid::from_span(double t0, double t1, double dt) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    const double ratio = (t1 - t0) / dt;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, n))
        throw ValidationError("time span is not an integer number of steps");
    return from_steps(t0, dt, static_cast<std::int64_t>(n));
}

void TimeGrid::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
    if (n_steps < 1) throw ValidationError("time grid needs at least one step");
    const double span = static_cast<double>(n_steps) * dt;
    if (std::abs((t1 - t0) - span) > 1e-12 * std::max({1.0, std::abs(t0), std::abs(t1)}))
        throw ValidationError("time grid is inconsistent: t1 - t0 != n_steps * dt");
}

NoisePath sample_path(std::uint64_t seed, const TimeGrid& grid, const Eigen::VectorXd& eps, int substeps) {
    grid.validate();
    if (substeps < 1) throw ValidationError("substeps must be >= 1");
    if ((eps.array() < 0.0).any() || !eps.allFinite())
        throw ValidationError("noise intensities must be finite and >= 0");

    const double base_dt = grid.dt / substeps;
    const double scale = std::sqrt(base_dt);
    const std::int64_t b0 = aligned_index(grid.t0, base_dt);

    NoisePath path;
    path.grid = grid;
    path.seed = seed;
    path.substeps = substeps;
    path.eps = eps;
    path.increments.resize(eps.size(), grid.n_steps);
    for (std::int64_t k = 0; k < grid.n_steps; ++k) {
        const std::int64_t first = b0 + k * substeps;
        for (Eigen::Index j = 0; j < eps.size(); ++j) {
            double sum = 0.0;
            if (eps(j) != 0.0) {
                for (int i = 0; i < substeps; ++i)
                    sum += keyed_normal(seed, kIncrementStream, static_cast<std::uint32_t>(j), first + i);
            }
            path.increments(j, k) = eps(j) * scale * sum;
        }
    }
    return path;
}

NoisePath ou_from_increments(NoisePath path, const OuInit& init) {
    const Eigen::Index n = path.increments.rows();
    const std::int64_t steps = path.grid.n_steps;
    if (path.increments.cols() != steps) throw ValidationError("noise path has no increments");
    const double decay = std::exp(-path.grid.dt);

    Eigen::VectorXd z0(n);
    if (std::holds_alternative<OuStationary>(init)) {
        const double base_dt = path.grid.dt / path.substeps;
        const std::int64_t b0 = aligned_index(path.grid.t0, base_dt);
        for (Eigen::Index j = 0; j < n; ++j)
            z0(j) = path.eps(j) / std::numbers::sqrt2 *
                    keyed_normal(path.seed, kOuInitStream, static_cast<std::uint32_t>(j), b0);
    } else if (const auto* burn = std::get_if<OuBurnIn>(&init)) {
        const auto n_burn = static_cast<std::int64_t>(std::ceil(burn->duration / path.grid.dt));
        z0.setZero();
        if (n_burn > 0) {
            const auto pre = sample_path(path.seed,
                                         TimeGrid::from_steps(path.grid.t0 - n_burn * path.grid.dt,
                                                              path.grid.dt, n_burn),
                                         path.eps, path.substeps);
            for (std::int64_t k = 0; k < n_burn; ++k) z0 = decay * z0 + pre.increments.col(k);
        }
    } else {
        z0 = std::get<OuGiven>(init).z0;
        if (z0.size() != n) throw ValidationError("initial OU value has the wrong length");
    }

    path.z.resize(n, steps + 1);
    path.z.col(0) = z0;
    for (std::int64_t k = 0; k < steps; ++k)
        path.z.col(k + 1) = decay * path.z.col(k) + path.increments.col(k);
    return path;
}

NoisePath shift_origin(const NoisePath& path, std::int64_t k_begin, std::int64_t k_end) {
    if (k_end < 0) k_end = path.grid.n_steps;
    if (k_begin < 0 || k_end > path.grid.n_steps || k_end <= k_begin)
        throw ValidationError("shift window outside the noise path");
    NoisePath out;
    out.grid = TimeGrid::from_steps(0.0, path.grid.dt, k_end - k_begin);
    out.seed = path.seed;
    out.substeps = path.substeps;
    out.eps = path.eps;
    out.increments = path.increments.middleCols(k_begin, k_end - k_begin);
    if (path.has_z()) out.z = path.z.middleCols(k_begin, k_end - k_begin + 1);
    return out;
}

Eigen::MatrixXd cumulative_wiener(const NoisePath& path) {
    Eigen::MatrixXd W(path.increments.rows(), path.grid.n_steps + 1);
    W.col(0).setZero();
    for (std::int64_t k = 0; k < path.grid.n_steps; ++k) W.col(k + 1) = W.col(k) + path.increments.col(k);
    return W;
}

TemperednessReport check_temperedness(const NoisePath& path, double epsilon_rate) {
    if (!(epsilon_rate > 0.0)) throw ValidationError("temperedness rate must be positive");
    if (!path.has_z()) throw ValidationError("temperedness check needs the OU path z");
    const TimeGrid& g = path.grid;
    const double slack = 1e-9 * std::max(1.0, std::abs(g.t0) + std::abs(g.t1));
    if (g.t0 > slack || g.t1 < -slack)
        throw ValidationError("temperedness check needs a path containing t = 0");
    const double horizon = std::max(std::abs(g.t0), std::abs(g.t1));
    if (horizon < 100.0) throw ValidationError("horizon shorter than 100 is inconclusive for temperedness");

    TemperednessReport report;
    report.epsilon_rate = epsilon_rate;
    report.sup_envelope.resize(g.n_steps + 1);
    double first_half = 0.0, second_half = 0.0;
    for (std::int64_t k = 0; k <= g.n_steps; ++k) {
        const double t = std::abs(g.time(k));
        const double value = std::exp(-epsilon_rate * t) * path.z.col(k).norm();
        report.sup_envelope[k] = value;
        double& half_max = t <= 0.5 * horizon ? first_half : second_half;
        half_max = std::max(half_max, value);
    }
    report.r_tilde = std::max(first_half, second_half);
    report.tempered = second_half <= 1.05 * first_half;
    return report;
}

void write_path_csv(std::ostream& out, const NoisePath& path) {
    write_csv_row(out, {"t", "j", "dW", "z"});
    const bool with_z = path.has_z();
    for (std::int64_t k = 0; k <= path.grid.n_steps; ++k) {
        const std::string t = format_number(path.grid.time(k));
        for (Eigen::Index j = 0; j < path.increments.rows(); ++j) {
            write_csv_row(out, {t, std::to_string(j),
                                k < path.grid.n_steps ? format_number(path.increments(j, k)) : std::string{},
                                with_z ? format_number(path.z(j, k)) : std::string{}});
        }
    }
}

}  // namespace oscillattr
