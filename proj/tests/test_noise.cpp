#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oscillattr/errors.hpp"
#include "oscillattr/noise.hpp"

using namespace oscillattr;

namespace {

Eigen::VectorXd eps_vec(Eigen::Index n, double e) { return Eigen::VectorXd::Constant(n, e); }

}  // namespace

TEST(Philox, KnownAnswerVectors) {
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(KeyedNormal, MomentsAndDeterminism) {
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double x = keyed_normal(11, 0, 3, k - n / 2);
        sum += x;
        sq += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(sq / n, 1.0, 5.0 * std::sqrt(2.0 / n));
    EXPECT_EQ(keyed_normal(5, 1, 2, -7), keyed_normal(5, 1, 2, -7));
    EXPECT_NE(keyed_normal(5, 1, 2, -7), keyed_normal(5, 1, 3, -7));
    EXPECT_NE(keyed_normal(5, 1, 2, -7), keyed_normal(6, 1, 2, -7));
}

TEST(TimeGrid, Validation) {
    EXPECT_THROW(TimeGrid::from_span(0.0, 1.0, 0.0), ValidationError);
    EXPECT_THROW(TimeGrid::from_span(0.0, 1.0, -1e-3), ValidationError);
    EXPECT_THROW(TimeGrid::from_span(0.0, 1.0, 0.3), ValidationError);
    EXPECT_THROW(TimeGrid::from_steps(0.0, 1e-3, 0), ValidationError);
    const auto g = TimeGrid::from_span(-1.0, 1.0, 1e-3);
    EXPECT_EQ(g.n_steps, 2000);
    EXPECT_NEAR(g.time(1000), 0.0, 1e-15);
}

TEST(NoisePath, ZeroIntensityGivesZeroIncrements) {
    const auto p = ou_from_increments(sample_path(3, TimeGrid::from_span(0.0, 1.0, 1e-2), eps_vec(4, 0.0)));
    EXPECT_EQ(p.increments.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p.z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(NoisePath, SameSeedSamePath) {
    const auto g = TimeGrid::from_span(-2.0, 3.0, 1e-2);
    const auto a = sample_path(99, g, eps_vec(3, 0.4));
    const auto b = sample_path(99, g, eps_vec(3, 0.4));
    const auto c = sample_path(100, g, eps_vec(3, 0.4));
    EXPECT_EQ(a.increments, b.increments);
    EXPECT_NE(a.increments, c.increments);
    EXPECT_THROW(sample_path(1, g, eps_vec(3, -0.1)), ValidationError);
}

TEST(NoisePath, IncrementVarianceAcrossSeeds) {
    const double eps = 0.7, dt = 1e-3;
    const auto g = TimeGrid::from_steps(0.0, dt, 1);
    const int seeds = 10000;
    double sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const auto p = sample_path(static_cast<std::uint64_t>(s), g, eps_vec(1, eps));
        sq += p.increments(0, 0) * p.increments(0, 0);
    }
    EXPECT_NEAR(sq / seeds / (eps * eps * dt), 1.0, 0.05);
}

TEST(NoisePath, RefinementKeepsCoarsePoints) {
    const auto fine = sample_path(42, TimeGrid::from_span(-1.0, 1.0, 5e-4), eps_vec(2, 0.3));
    const auto coarse = sample_path(42, TimeGrid::from_span(-1.0, 1.0, 1e-3), eps_vec(2, 0.3), 2);
    const Eigen::MatrixXd Wf = cumulative_wiener(fine);
    const Eigen::MatrixXd Wc = cumulative_wiener(coarse);
    for (std::int64_t k = 0; k <= coarse.grid.n_steps; ++k)
        EXPECT_LE((Wc.col(k) - Wf.col(2 * k)).cwiseAbs().maxCoeff(), 1e-12) << k;
}

TEST(NoisePath, SubwindowsAgreeOnOverlap) {
    // increments are keyed by absolute step index, so a window of a longer
    // two-sided path equals the path sampled on the window alone
    const auto wide = sample_path(8, TimeGrid::from_span(-1.0, 1.0, 1e-3), eps_vec(2, 0.5));
    const auto narrow = sample_path(8, TimeGrid::from_span(0.0, 1.0, 1e-3), eps_vec(2, 0.5));
    EXPECT_LE((wide.increments.rightCols(1000) - narrow.increments).cwiseAbs().maxCoeff(), 0.0);
}

TEST(NoisePath, IndependentAcrossOscillators) {
    const auto p = sample_path(5, TimeGrid::from_steps(0.0, 1e-2, 40000), eps_vec(3, 1.0));
    const Eigen::MatrixXd x = p.increments / std::sqrt(1e-2);
    const double n = static_cast<double>(x.cols());
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) EXPECT_LE(std::abs(x.row(i).dot(x.row(j)) / n), 3.0 / std::sqrt(n));
}

TEST(OuPath, RecursionResidual) {
    const auto p = ou_from_increments(sample_path(17, TimeGrid::from_span(-5.0, 5.0, 1e-2), eps_vec(3, 0.8)));
    ASSERT_TRUE(p.has_z());
    const double decay = std::exp(-1e-2);
    double worst = 0.0;
    for (std::int64_t k = 0; k < p.grid.n_steps; ++k)
        worst = std::max(worst, (p.z.col(k + 1) - decay * p.z.col(k) - p.increments.col(k)).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 1e-12);
}

TEST(OuPath, SingleStepDecay) {
    auto p = sample_path(1, TimeGrid::from_steps(0.0, 0.1, 1), eps_vec(1, 0.0));
    p = ou_from_increments(p, OuGiven{Eigen::VectorXd::Constant(1, 2.0)});
    EXPECT_NEAR(p.z(0, 1), 2.0 * std::exp(-0.1), 1e-15);
    EXPECT_THROW(ou_from_increments(p, OuGiven{Eigen::VectorXd::Zero(2)}), ValidationError);
}

TEST(OuPath, StationaryVarianceAndLagOneAutocovariance) {
    const double eps = 0.6, dt = 1e-2;
    const std::int64_t steps = 100000, lag = 100;  // lag of one time unit
    double var = 0.0, cov = 0.0, count = 0.0, count_lag = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = ou_from_increments(sample_path(seed, TimeGrid::from_steps(0.0, dt, steps), eps_vec(1, eps)));
        for (std::int64_t k = 0; k <= steps; ++k) {
            var += p.z(0, k) * p.z(0, k);
            count += 1.0;
            if (k + lag <= steps) {
                cov += p.z(0, k) * p.z(0, k + lag);
                count_lag += 1.0;
            }
        }
    }
    const double stationary = eps * eps / 2.0;
    EXPECT_NEAR(var / count / stationary, 1.0, 0.05);
    EXPECT_NEAR(cov / count_lag / (stationary * std::exp(-1.0)), 1.0, 0.10);
}

TEST(OuPath, BurnInStartIsNearStationary) {
    const double eps = 1.0;
    double sq = 0.0;
    const int seeds = 2000;
    for (int s = 0; s < seeds; ++s) {
        const auto p = ou_from_increments(
            sample_path(static_cast<std::uint64_t>(s), TimeGrid::from_steps(0.0, 1e-2, 1), eps_vec(1, eps)),
            OuBurnIn{10.0});
        sq += p.z(0, 0) * p.z(0, 0);
    }
    EXPECT_NEAR(sq / seeds / 0.5, 1.0, 0.1);
}

TEST(ShiftOrigin, WindowIsThetaShift) {
    const auto p = ou_from_increments(sample_path(3, TimeGrid::from_span(0.0, 2.0, 1e-2), eps_vec(2, 0.3)));
    const auto s = shift_origin(p, 50, 150);
    EXPECT_EQ(s.grid.n_steps, 100);
    EXPECT_EQ(s.grid.t0, 0.0);
    EXPECT_EQ(s.increments, p.increments.middleCols(50, 100));
    EXPECT_EQ(s.z, p.z.middleCols(50, 101));
    EXPECT_THROW(shift_origin(p, 150, 50), ValidationError);
    EXPECT_THROW(shift_origin(p, 0, 1000), ValidationError);
}

TEST(Temperedness, ZeroPathIsTempered) {
    auto p = ou_from_increments(sample_path(0, TimeGrid::from_span(-100.0, 100.0, 0.1), eps_vec(2, 0.0)));
    const auto rep = check_temperedness(p, 0.1);
    EXPECT_TRUE(rep.tempered);
    EXPECT_EQ(rep.r_tilde, 0.0);
}

TEST(Temperedness, StationaryPathIsTempered) {
    auto p = ou_from_increments(sample_path(21, TimeGrid::from_span(-1000.0, 1000.0, 1e-2), eps_vec(3, 0.5)));
    const auto rep = check_temperedness(p, 0.1);
    EXPECT_TRUE(rep.tempered);
    EXPECT_GT(rep.r_tilde, 0.0);
    EXPECT_EQ(rep.sup_envelope.size(), static_cast<std::size_t>(p.grid.n_steps + 1));
}

TEST(Temperedness, ExponentiallyGrowingFixtureIsNot) {
    auto p = sample_path(0, TimeGrid::from_span(-200.0, 200.0, 0.1), eps_vec(1, 0.0));
    p.z.resize(1, p.grid.n_steps + 1);
    for (std::int64_t k = 0; k <= p.grid.n_steps; ++k) p.z(0, k) = std::exp(0.2 * std::abs(p.grid.time(k)));
    EXPECT_FALSE(check_temperedness(p, 0.1).tempered);
}

TEST(Temperedness, ShortHorizonRejected) {
    auto p = ou_from_increments(sample_path(1, TimeGrid::from_span(-50.0, 50.0, 0.1), eps_vec(1, 0.5)));
    EXPECT_THROW(check_temperedness(p, 0.1), ValidationError);
    auto q = ou_from_increments(sample_path(1, TimeGrid::from_span(10.0, 200.0, 0.1), eps_vec(1, 0.5)));
    EXPECT_THROW(check_temperedness(q, 0.1), ValidationError);
}

TEST(NoiseCsv, HeaderAndRowCount) {
    const auto p = ou_from_increments(sample_path(1, TimeGrid::from_steps(0.0, 0.5, 2), eps_vec(2, 0.1)));
    std::ostringstream out;
    write_path_csv(out, p);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,j,dW,z\r");
    int rows = 0;
    std::string last;
    while (std::getline(in, line)) {
        ++rows;
        last = line;
    }
    EXPECT_EQ(rows, 6);
    EXPECT_NE(last.find(",,"), std::string::npos);  // no increment after the last node
}
