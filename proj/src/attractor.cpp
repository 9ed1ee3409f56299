#include "oscillattr/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "oscillattr/errors.hpp"
#include "oscillattr/io.hpp"
#include "oscillattr/parallel.hpp"

namespace oscillattr {

namespace {

std::int64_t steps_for(double span, double dt) {
    const double ratio = span / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded)
        throw ValidationError("horizon is not a positive whole number of steps");
    return static_cast<std::int64_t>(rounded);
}

// Advances the columns of Y in parallel blocks.
void propagate(const RdeStepper& stepper, const NoisePath& noise, Eigen::MatrixXd& Y, std::int64_t k0,
               std::int64_t k1, unsigned workers) {
    const Eigen::Index m = Y.cols();
    const auto blocks = static_cast<Eigen::Index>(std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(m))));
    if (blocks <= 1) {
        stepper.advance(Y, noise, k0, k1);
        return;
    }
    const Eigen::Index width = (m + blocks - 1) / blocks;
    parallel_for(static_cast<std::size_t>(blocks), workers, [&](std::size_t b) {
        const Eigen::Index first = static_cast<Eigen::Index>(b) * width;
        const Eigen::Index count = std::min(width, m - first);
        if (count <= 0) return;
        Eigen::MatrixXd part = Y.middleCols(first, count);
        stepper.advance(part, noise, k0, k1);
        Y.middleCols(first, count) = part;
    });
}

Eigen::MatrixXd to_block(std::span<const Eigen::VectorXd> points) {
    if (points.empty()) throw ValidationError("initial cloud is empty");
    Eigen::MatrixXd Y(points.front().size(), static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != Y.rows()) throw ValidationError("initial points have mixed dimensions");
        Y.col(static_cast<Eigen::Index>(i)) = points[i];
    }
    return Y;
}

std::vector<QuotientPoint> reduce(const Eigen::MatrixXd& Y, const EnergyStructure& es, double kappa) {
    std::vector<QuotientPoint> out;
    out.reserve(static_cast<std::size_t>(Y.cols()));
    for (Eigen::Index i = 0; i < Y.cols(); ++i) out.push_back(mod_p0(Eigen::VectorXd(Y.col(i)), es, kappa));
    return out;
}

Eigen::VectorXd uniform_ball(std::mt19937_64& rng, Eigen::Index dim, double radius) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    Eigen::VectorXd x(dim);
    do {
        for (Eigen::Index k = 0; k < dim; ++k) x(k) = normal(rng);
    } while (x.norm() == 0.0);
    return x.normalized() * (radius * std::pow(unit(rng), 1.0 / static_cast<double>(dim)));
}

double circle_gap(double ds, double kappa) {
    const double d = std::fmod(std::abs(ds), kappa);
    return std::min(d, kappa - d);
}

}  // namespace

NoisePath pullback_noise(std::uint64_t seed, double t0, double t1, const CloudOptions& options,
                         const Eigen::VectorXd& eps) {
    const TimeGrid grid = TimeGrid::from_steps(t0, options.dt, steps_for(t1 - t0, options.dt));
    return ou_from_increments(sample_path(seed, grid, eps, options.substeps), OuStationary{});
}

AbsorbingEstimate absorbing_radius(const EnergyStructure& es, const OscillatorParams& params,
                                   const NoisePath& noise) {
    if (!(es.a > 0.0)) throw ValidationError("absorbing radius needs a > 0");
    const TemperednessReport tempered = check_temperedness(noise, 0.5 * es.a);
    if (!tempered.tempered) throw ValidationError("noise path failed the temperedness check at rate a/2");

    const double alpha = params.alpha;
    const double n = static_cast<double>(es.n);
    const double c1 = params.g_model.c1();
    AbsorbingEstimate out;
    out.a = es.a;
    out.M1 = es.M1;
    out.a1 = es.M1 * std::sqrt(3.0 * alpha * alpha - 6.0 * alpha + 4.0);
    out.a2 = es.M1 * std::sqrt(3.0 * params.f.squaredNorm() + 3.0 * params.beta * params.beta * c1 * c1 * n);
    out.r_tilde = tempered.r_tilde;
    out.R0 = 4.0 * out.a1 / es.a * out.r_tilde + 2.0 * out.a2 / es.a;
    return out;
}

std::vector<Eigen::VectorXd> initial_cloud(const EnergyStructure& es, double kappa, double radius, int n_points,
                                           std::uint64_t seed) {
    if (n_points < 1) throw ValidationError("cloud size must be positive");
    if (!(radius >= 0.0)) throw ValidationError("cloud radius must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit;
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double xi = kappa * (i + unit(rng)) / n_points;
        const Eigen::VectorXd q = uniform_ball(rng, es.e2_basis.cols(), radius);
        out.push_back(xi * es.eta0 + es.e2_basis * q);
    }
    return out;
}

double quotient_distance(const QuotientPoint& x, const QuotientPoint& y, double eta0_norm, double kappa) {
    const double ds = eta0_norm * circle_gap(x.s - y.s, kappa);
    return std::sqrt(ds * ds + (x.q - y.q).squaredNorm());
}

double e2_diameter(std::span<const QuotientPoint> cloud) {
    double worst = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (std::size_t j = i + 1; j < cloud.size(); ++j) worst = std::max(worst, (cloud[i].q - cloud[j].q).norm());
    return worst;
}

AttractorEstimate pullback_cloud(const EnergyStructure& es, const OscillatorParams& params, const CouplingMatrix& A,
                                 std::uint64_t seed, std::span<const Eigen::VectorXd> initial,
                                 const CloudOptions& options) {
    const Eigen::MatrixXd Y0 = to_block(initial);
    const double kappa = params.g_model.kappa();
    const NoisePath noise = pullback_noise(seed, -options.T, 0.0, options, params.eps);
    const RdeStepper stepper(A, params, es, options.dt, options.scheme);
    const std::int64_t n_total = noise.grid.n_steps;

    AttractorEstimate out;
    out.seed = seed;
    out.T = options.T;
    out.initial_diameter = e2_diameter(reduce(Y0, es, kappa));

    std::vector<double> fractions = options.horizon_fractions;
    std::sort(fractions.begin(), fractions.end());
    if (fractions.empty() || fractions.back() != 1.0) fractions.push_back(1.0);
    for (double fraction : fractions) {
        if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("horizon fractions must lie in (0, 1]");
        const std::int64_t k_start = n_total - steps_for(fraction * options.T, options.dt);
        Eigen::MatrixXd Y = Y0;
        propagate(stepper, noise, Y, k_start, n_total, options.workers);
        std::vector<QuotientPoint> cloud = reduce(Y, es, kappa);
        out.horizons.push_back(fraction * options.T);
        out.diameters.push_back(e2_diameter(cloud));
        if (fraction == 1.0) {
            out.samples = std::move(cloud);
            out.states.clear();
            for (Eigen::Index i = 0; i < Y.cols(); ++i) out.states.emplace_back(Y.col(i));
        }
    }
    out.e2_diameter = out.diameters.back();
    for (const auto& p : out.samples) out.max_q_norm = std::max(out.max_q_norm, p.q.norm());
    return out;
}

std::vector<AttractorEstimate> pullback_clouds(const EnergyStructure& es, const OscillatorParams& params,
                                               const CouplingMatrix& A, std::span<const std::uint64_t> seeds,
                                               std::span<const Eigen::VectorXd> initial, const CloudOptions& options) {
    std::vector<AttractorEstimate> out(seeds.size());
    CloudOptions inner = options;
    inner.workers = 1;
    parallel_for(seeds.size(), options.workers,
                 [&](std::size_t i) { out[i] = pullback_cloud(es, params, A, seeds[i], initial, inner); });
    return out;
}

AttractorEstimate curve_cloud(const EnergyStructure& es, const OscillatorParams& params, const CouplingMatrix& A,
                              std::uint64_t seed, const CurveCloudOptions& options) {
    if (options.n_bins < 1 || options.per_bin < 1 || options.scan_points < 2)
        throw ValidationError("curve cloud needs n_bins, per_bin >= 1 and scan_points >= 2");
    const CloudOptions& co = options.cloud;
    const double kappa = params.g_model.kappa();
    const NoisePath noise = pullback_noise(seed, -co.T, 0.0, co, params.eps);
    const RdeStepper stepper(A, params, es, co.dt, co.scheme);
    const std::int64_t n_total = noise.grid.n_steps;

    double radius = options.q_radius;
    if (radius <= 0.0) {
        const double horizon = std::max(co.T, 100.0);
        radius = absorbing_radius(es, params, pullback_noise(seed, -horizon, 0.0, co, params.eps)).R0;
    }

    std::mt19937_64 rng(options.jitter_seed ^ (seed * 0x9E3779B97F4A7C15ULL));
    std::uniform_real_distribution<double> unit;
    const int R = options.per_bin;
    std::vector<Eigen::VectorXd> offsets;
    for (int r = 0; r < R; ++r) offsets.push_back(es.e2_basis * uniform_ball(rng, es.e2_basis.cols(), radius));

    auto run = [&](const std::vector<int>& replicate, const std::vector<double>& xi) {
        Eigen::MatrixXd Y(es.eta0.size(), static_cast<Eigen::Index>(xi.size()));
        for (std::size_t i = 0; i < xi.size(); ++i)
            Y.col(static_cast<Eigen::Index>(i)) = xi[i] * es.eta0 + offsets[static_cast<std::size_t>(replicate[i])];
        propagate(stepper, noise, Y, 0, n_total, co.workers);
        return Y;
    };

    // Coarse scan: the lift xi -> c(0) is increasing with c(xi + kappa) = c(xi) + kappa.
    const int M = options.scan_points;
    std::vector<int> scan_rep;
    std::vector<double> scan_xi;
    for (int r = 0; r < R; ++r)
        for (int i = 0; i <= M; ++i) {
            scan_rep.push_back(r);
            scan_xi.push_back(kappa * i / M);
        }
    const Eigen::MatrixXd scan = run(scan_rep, scan_xi);
    auto scan_c = [&](int r, int i) { return es.e1_coordinate(scan.col(r * (M + 1) + i)); };

    struct Target {
        int replicate;
        double c_target;
        double lo, hi, f_lo, f_hi;
        int side = 0;
        bool done = false;
        Eigen::VectorXd state;
    };
    std::vector<Target> targets;
    for (int b = 0; b < options.n_bins; ++b) {
        for (int r = 0; r < R; ++r) {
            const double s_target = kappa * (b + unit(rng)) / options.n_bins;
            const double base = scan_c(r, 0);
            double lift = base + std::fmod(s_target - base, kappa);
            if (lift < base) lift += kappa;
            Target t{r, lift, 0.0, kappa, 0.0, 0.0, 0, false, {}};
            bool bracketed = false;
            for (int i = 0; i < M && !bracketed; ++i) {
                const double f0 = scan_c(r, i) - lift, f1 = scan_c(r, i + 1) - lift;
                if (f0 <= 0.0 && f1 >= 0.0) {
                    t.lo = kappa * i / M;
                    t.hi = kappa * (i + 1) / M;
                    t.f_lo = f0;
                    t.f_hi = f1;
                    bracketed = true;
                    if (std::abs(f0) <= options.target_tolerance) {
                        t.done = true;
                        t.state = scan.col(r * (M + 1) + i);
                    } else if (std::abs(f1) <= options.target_tolerance) {
                        t.done = true;
                        t.state = scan.col(r * (M + 1) + i + 1);
                    }
                }
            }
            if (!bracketed) throw ValidationError("curve cloud: target E1 coordinate not bracketed by the scan");
            targets.push_back(std::move(t));
        }
    }

    // Batched Illinois iteration on the brackets.
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        std::vector<std::size_t> open;
        std::vector<int> rep;
        std::vector<double> xi;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            Target& t = targets[i];
            if (t.done) continue;
            double x = (t.lo * t.f_hi - t.hi * t.f_lo) / (t.f_hi - t.f_lo);
            if (!(x > t.lo && x < t.hi)) x = 0.5 * (t.lo + t.hi);
            open.push_back(i);
            rep.push_back(t.replicate);
            xi.push_back(x);
        }
        if (open.empty()) break;
        const Eigen::MatrixXd Y = run(rep, xi);
        for (std::size_t j = 0; j < open.size(); ++j) {
            Target& t = targets[open[j]];
            const auto col = static_cast<Eigen::Index>(j);
            const double f = es.e1_coordinate(Y.col(col)) - t.c_target;
            t.state = Y.col(col);
            if (std::abs(f) <= options.target_tolerance || t.hi - t.lo < 1e-14 * kappa) {
                t.done = true;
                continue;
            }
            if (f < 0.0) {
                t.lo = xi[j];
                t.f_lo = f;
                if (t.side == -1) t.f_hi *= 0.5;
                t.side = -1;
            } else {
                t.hi = xi[j];
                t.f_hi = f;
                if (t.side == 1) t.f_lo *= 0.5;
                t.side = 1;
            }
        }
    }

    AttractorEstimate out;
    out.seed = seed;
    out.T = co.T;
    std::vector<QuotientPoint> initial_q;
    for (const auto& y : offsets) initial_q.push_back(mod_p0(y, es, kappa));
    out.initial_diameter = e2_diameter(initial_q);
    for (const Target& t : targets) {
        if (t.state.size() == 0) continue;
        out.states.push_back(t.state);
        out.samples.push_back(mod_p0(t.state, es, kappa));
    }
    out.horizons = {co.T};
    out.e2_diameter = e2_diameter(out.samples);
    out.diameters = {out.e2_diameter};
    for (const auto& p : out.samples) out.max_q_norm = std::max(out.max_q_norm, p.q.norm());
    return out;
}

CurveFit fit_horizontal_curve(std::span<const QuotientPoint> cloud, const EnergyStructure& es, double kappa,
                              int n_bins) {
    if (n_bins < 3) throw ValidationError("curve fit needs at least 3 bins");
    CurveFit fit;
    fit.n_bins = n_bins;
    fit.kappa = kappa;
    fit.counts.assign(static_cast<std::size_t>(n_bins), 0);
    fit.bin_s.assign(static_cast<std::size_t>(n_bins), 0.0);
    fit.phi.assign(static_cast<std::size_t>(n_bins), Eigen::VectorXd());

    std::vector<int> bin_of(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const int b = std::clamp(static_cast<int>(std::floor(cloud[i].s / kappa * n_bins)), 0, n_bins - 1);
        bin_of[i] = b;
        auto& phi = fit.phi[static_cast<std::size_t>(b)];
        if (phi.size() == 0) phi = Eigen::VectorXd::Zero(cloud[i].q.size());
        phi += cloud[i].q;
        fit.bin_s[static_cast<std::size_t>(b)] += cloud[i].s;
        ++fit.counts[static_cast<std::size_t>(b)];
    }
    std::vector<int> occupied;
    for (int b = 0; b < n_bins; ++b) {
        const auto k = static_cast<std::size_t>(b);
        if (fit.counts[k] == 0) continue;
        fit.phi[k] /= fit.counts[k];
        fit.bin_s[k] /= fit.counts[k];
        occupied.push_back(b);
    }
    fit.occupancy = static_cast<double>(occupied.size()) / n_bins;
    if (fit.occupancy < 0.8)
        throw ValidationError("insufficient bin occupancy: " + std::to_string(occupied.size()) + " of " +
                              std::to_string(n_bins) + " bins");

    for (std::size_t i = 0; i < cloud.size(); ++i)
        fit.max_bin_spread =
            std::max(fit.max_bin_spread, (cloud[i].q - fit.phi[static_cast<std::size_t>(bin_of[i])]).norm());
    for (int b : occupied) fit.max_phi_norm = std::max(fit.max_phi_norm, fit.phi[static_cast<std::size_t>(b)].norm());

    const double eta0_norm = std::sqrt(es.eta0_norm_sq);
    for (std::size_t i = 0; i < occupied.size(); ++i) {
        const auto a = static_cast<std::size_t>(occupied[i]);
        const auto b = static_cast<std::size_t>(occupied[(i + 1) % occupied.size()]);
        const double gap = circle_gap(fit.bin_s[b] - fit.bin_s[a], kappa);
        if (gap <= 0.0) continue;
        fit.lipschitz_est = std::max(fit.lipschitz_est, (fit.phi[b] - fit.phi[a]).norm() / (eta0_norm * gap));
    }

    // Continue the last two occupied bins linearly across s = kappa and
    // compare with the first one.
    const auto first = static_cast<std::size_t>(occupied.front());
    const auto last = static_cast<std::size_t>(occupied.back());
    const auto prev = static_cast<std::size_t>(occupied[occupied.size() - 2]);
    const double step = fit.bin_s[last] - fit.bin_s[prev];
    const double reach = fit.bin_s[first] + kappa - fit.bin_s[last];
    const Eigen::VectorXd predicted = fit.phi[last] + (fit.phi[last] - fit.phi[prev]) * (reach / step);
    fit.periodicity_defect = (fit.phi[first] - predicted).norm();
    return fit;
}

double hausdorff_semidistance(std::span<const QuotientPoint> from, std::span<const QuotientPoint> to,
                              double eta0_norm, double kappa) {
    if (to.empty()) return from.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& x : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& y : to) best = std::min(best, quotient_distance(x, y, eta0_norm, kappa));
        worst = std::max(worst, best);
    }
    return worst;
}

InvarianceReport invariance_check(const EnergyStructure& es, const OscillatorParams& params, const CouplingMatrix& A,
                                  std::uint64_t seed, std::span<const Eigen::VectorXd> initial, double T, double t,
                                  const CloudOptions& options) {
    if (t < 0.0) throw ValidationError("invariance shift must be >= 0");
    const double kappa = params.g_model.kappa();
    const Eigen::MatrixXd Y0 = to_block(initial);
    const std::int64_t kT = steps_for(T, options.dt);
    const std::int64_t kt = t == 0.0 ? 0 : steps_for(t, options.dt);
    const NoisePath noise = pullback_noise(seed, -T, t == 0.0 ? 0.0 : t, options, params.eps);
    const RdeStepper stepper(A, params, es, options.dt, options.scheme);

    InvarianceReport out;
    Eigen::MatrixXd pushed = Y0;
    propagate(stepper, noise, pushed, 0, kT + kt, options.workers);
    Eigen::MatrixXd shifted = Y0;
    propagate(stepper, noise, shifted, kt, kT + kt, options.workers);
    out.pushed = reduce(pushed, es, kappa);
    out.shifted = reduce(shifted, es, kappa);
    const double eta0_norm = std::sqrt(es.eta0_norm_sq);
    out.distance = hausdorff_semidistance(out.pushed, out.shifted, eta0_norm, kappa);
    out.reverse = hausdorff_semidistance(out.shifted, out.pushed, eta0_norm, kappa);
    return out;
}

void write_cloud_csv(std::ostream& out, std::span<const AttractorEstimate> clouds) {
    std::vector<std::string> header{"seed", "T", "s"};
    const Eigen::Index m = clouds.empty() || clouds.front().samples.empty() ? 0 : clouds.front().samples.front().q.size();
    for (Eigen::Index k = 0; k < m; ++k) header.push_back("q_" + std::to_string(k + 1));
    write_csv_row(out, header);
    for (const auto& cloud : clouds) {
        for (const auto& p : cloud.samples) {
            std::vector<std::string> row{std::to_string(cloud.seed), format_number(cloud.T), format_number(p.s)};
            for (Eigen::Index k = 0; k < p.q.size(); ++k) row.push_back(format_number(p.q(k)));
            write_csv_row(out, row);
        }
    }
}

}  // namespace oscillattr
