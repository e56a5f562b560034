#include "support.hpp"

#include <modal_strength/error.hpp>
#include <modal_strength/modal_decomp.hpp>
#include <modal_strength/strength_metrics.hpp>

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <random>

namespace ms = modal_strength;
using namespace test_support;

TEST(SolvePencil, TwoBusIdentityScaling) {
    const auto sol = ms::normalize_eigenvectors(ms::solve_pencil(two_bus_l(), ms::Vector::Ones(2)));
    EXPECT_NEAR(sol.eigenvalues[0], 0.0, 1e-12);
    EXPECT_NEAR(sol.eigenvalues[1], 6.0, 1e-12);
    EXPECT_LT((sol.phi.col(0) - vector({1, 1})).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((sol.phi.col(1) - vector({1, -1})).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolvePencil, IndefiniteScalingGivesNegativeMode) {
    const auto sol = ms::solve_pencil(two_bus_l(), vector({1.0, -0.5}));
    // det(L - lambda S) = lambda (lambda S1 S2 - 3 (S1 + S2))
    const double oracle = 3.0 * (1.0 - 0.5) / (1.0 * -0.5);
    EXPECT_NEAR(oracle, -3.0, 1e-15);
    EXPECT_NEAR(sol.eigenvalues[0], oracle, 1e-12);
    EXPECT_NEAR(sol.eigenvalues[1], 0.0, 1e-12);
}

TEST(SolvePencil, ScalingsSummingToZeroAreDegenerate) {
    try {
        (void)ms::decompose(pencil(two_bus_l(), vector({1.0, -1.0})));
        FAIL() << "defective pencil accepted";
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::Degenerate);
    }
}

TEST(SolvePencil, ComplexSpectrumIsRegimeError) {
    const auto l = matrix(3, {1, -1, 0, 0, 1, -1, -1, 0, 1});
    try {
        (void)ms::solve_pencil(l, ms::Vector::Ones(3));
        FAIL() << "complex spectrum accepted";
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::Regime);
    }
}

TEST(Normalize, OppositePairResolvesToLeadingPositive) {
    ms::PencilSolution sol;
    sol.eigenvalues = vector({6});
    sol.phi = ms::Matrix(2, 1);
    sol.phi << 2, -2;
    sol.psi = sol.phi;
    sol.s_m = vector({8});
    sol.l_m = vector({48});
    const auto out = ms::normalize_eigenvectors(sol);
    EXPECT_EQ(out.phi.col(0), vector({1, -1}));
    EXPECT_DOUBLE_EQ(out.s_m[0], 2.0);
    EXPECT_DOUBLE_EQ(out.l_m[0], 12.0);
}

TEST(Normalize, AlreadyNormalizedUnchanged) {
    ms::PencilSolution sol;
    sol.eigenvalues = vector({1});
    sol.phi = ms::Matrix(3, 1);
    sol.phi << 0.3, 1.0, -0.7;
    sol.psi = sol.phi;
    sol.s_m = vector({1.58});
    sol.l_m = vector({1.58});
    const auto out = ms::normalize_eigenvectors(sol);
    EXPECT_EQ(out.phi, sol.phi);
}

TEST(Normalize, CommonModeCapacity) {
    ms::PencilSolution sol;
    sol.eigenvalues = vector({0});
    sol.phi = ms::Matrix::Constant(2, 1, 5.0);
    sol.psi = sol.phi;
    sol.s_m = vector({50});
    sol.l_m = vector({0});
    const auto out = ms::normalize_eigenvectors(sol);
    EXPECT_EQ(out.phi.col(0), vector({1, 1}));
    EXPECT_DOUBLE_EQ(out.s_m[0], 2.0);
}

TEST(Classify, TwoDeviceSymmetric) {
    const auto dec = ms::decompose(pencil(two_bus_l(), ms::Vector::Ones(2)));
    EXPECT_EQ(dec.labels, (std::vector<std::string>{"CM", "DM1"}));
}

TEST(Classify, InfiniteBusLeavesSingleDm) {
    const auto dec = ms::decompose(pencil(two_bus_l(), vector({1.0, 0.0}), {false, true}));
    ASSERT_EQ(dec.mode_count(), 1);
    EXPECT_EQ(dec.kinds[0], ms::ModeKind::DM);
    EXPECT_FALSE(dec.cm_index().has_value());
}

TEST(Classify, FourDeviceOneCmThreeDm) {
    const auto l = matrix(4, {5, -2, -2, -1, -2, 4, -1, -1, -2, -1, 3, 0, -1, -1, 0, 2});
    const auto dec = ms::decompose(pencil(l, vector({1, 1, 2, 1})));
    int cm = 0, dm = 0;
    for (auto k : dec.kinds) (k == ms::ModeKind::CM ? cm : dm)++;
    EXPECT_EQ(cm, 1);
    EXPECT_EQ(dm, 3);
}

TEST(ModalParams, Case1aDifferentialInertia) {
    const auto dec = ms::decompose(pencil(two_bus_l(), ms::Vector::Ones(2)));
    const auto dm = dec.mode_by_label("DM1");
    EXPECT_DOUBLE_EQ(dec.solution.s_m[dm], 2.0);
    EXPECT_NEAR(dec.params[static_cast<std::size_t>(dm)].inertia, 20.0, 1e-12);
}

TEST(ModalParams, CommonModeSpringIsNominalOnly) {
    const auto dec = ms::decompose(pencil(two_bus_l(), ms::Vector::Ones(2), {}, 10.0, 10.0, 3.0, 100.0));
    const auto cm = *dec.cm_index();
    EXPECT_EQ(dec.solution.l_m[cm], 0.0);
    EXPECT_DOUBLE_EQ(dec.params[static_cast<std::size_t>(cm)].spring, 2.0 * 3.0);
}

TEST(ModalParams, Case1bCommonInertia) {
    const auto dec = ms::decompose(pencil(two_bus_l(), ms::Vector::Ones(2), {}, 2.0, 20.0));
    EXPECT_NEAR(dec.params[static_cast<std::size_t>(*dec.cm_index())].inertia, 4.0, 1e-12);
}

TEST(ModalParams, VoltageSymmetricSprings) {
    const auto sol = ms::normalize_eigenvectors(ms::solve_pencil(two_bus_l(), ms::Vector::Ones(2)));
    const auto params = ms::modal_params_voltage(sol, {1.0, 1.0});
    EXPECT_NEAR(params[0].spring, 2.0, 1e-12);
    EXPECT_NEAR(params[1].spring, 14.0, 1e-12);
    const auto [k1, k2] = ms::two_device_voltage_springs(3.0, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(k1, 2.0);
    EXPECT_DOUBLE_EQ(k2, 14.0);
}

TEST(Decomposition, EliminatedBusFollowsNeighbours) {
    // Chain 1-2-3 with unit branches; bus 2 carries no dynamics.
    const auto l = matrix(3, {1, -1, 0, -1, 2, -1, 0, -1, 1});
    const auto dec = ms::decompose(pencil(l, vector({1, 0, 1})));
    ASSERT_EQ(dec.mode_count(), 2);
    for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
        EXPECT_NEAR(dec.phi_at(k, 2), 0.5 * (dec.phi_at(k, 1) + dec.phi_at(k, 3)), 1e-12);
    }
    EXPECT_FALSE(dec.psi_at(0, 2).has_value());
}

TEST(Decomposition, BoundaryBusReadsZero) {
    const auto dec = ms::decompose(pencil(two_bus_l(), vector({1.0, 0.0}), {false, true}));
    EXPECT_EQ(dec.phi_at(0, 2), 0.0);
    EXPECT_EQ(dec.phi_at(0, 1), 1.0);
}

TEST(Decomposition, WeakestDmRankedFirst) {
    const auto l = matrix(3, {2, -1, -1, -1, 2, -1, -1, -1, 2});
    const auto dec = ms::decompose(pencil(l, vector({1, 2, 4})));
    double previous = -1e300;
    for (int k = 1; k <= 2; ++k) {
        const double margin = dec.spring_margin(dec.mode_by_label("DM" + std::to_string(k)));
        EXPECT_GE(margin, previous);
        previous = margin;
    }
    EXPECT_EQ(*dec.first_dm_index(), dec.mode_by_label("DM1"));
}

TEST(Decomposition, UnknownLabelThrows) {
    const auto dec = ms::decompose(pencil(two_bus_l(), ms::Vector::Ones(2)));
    EXPECT_THROW((void)dec.mode_by_label("DM7"), ms::Error);
}

class PencilInvariants : public ::testing::TestWithParam<int> {};

TEST_P(PencilInvariants, EigenpairsBiorthogonalityAndReconstruction) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
    std::uniform_real_distribution<double> w(0.1, 5.0), sdist(0.1, 10.0), gdist(0.01, 100.0);
    const int n = 2 + GetParam() % 9;
    ms::Matrix l = ms::Matrix::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
        const double b = w(rng);
        l(i, j) -= b;
        l(j, i) -= b;
        l(i, i) += b;
        l(j, j) += b;
    }
    ms::Vector s(n);
    for (int i = 0; i < n; ++i) s[i] = sdist(rng);
    const auto sol = ms::normalize_eigenvectors(ms::solve_pencil(l, s));
    const double scale = std::max(1.0, sol.eigenvalues.cwiseAbs().maxCoeff());

    for (Eigen::Index k = 0; k < n; ++k) {
        const ms::Vector phi = sol.phi.col(k), psi = sol.psi.col(k);
        EXPECT_LT((l * phi - sol.eigenvalues[k] * s.cwiseProduct(phi)).cwiseAbs().maxCoeff(), 1e-8 * scale);
        EXPECT_LT((l.transpose() * psi - sol.eigenvalues[k] * s.cwiseProduct(psi)).cwiseAbs().maxCoeff(), 1e-8 * scale);
        EXPECT_NEAR(phi.cwiseAbs().maxCoeff(), 1.0, 1e-12);
        EXPECT_NEAR(psi.cwiseAbs().maxCoeff(), 1.0, 1e-12);
    }
    const ms::Matrix ms_ = sol.psi.transpose() * s.asDiagonal() * sol.phi;
    const ms::Matrix ml = sol.psi.transpose() * l * sol.phi;
    const double ds = ms_.diagonal().cwiseAbs().maxCoeff();
    const double dl = std::max(1.0, ml.diagonal().cwiseAbs().maxCoeff());
    EXPECT_LT((ms_ - ms::Matrix(ms_.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-8 * ds);
    EXPECT_LT((ml - ms::Matrix(ml.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-8 * dl);

    for (int trial = 0; trial < 20; ++trial) {
        const double g = gdist(rng);
        const ms::Matrix direct = (ms::Matrix(s.asDiagonal()) * g + l).partialPivLu().inverse();
        ms::Matrix modal = ms::Matrix::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            modal += sol.phi.col(k) * sol.psi.col(k).transpose() / (sol.s_m[k] * g + sol.l_m[k]);
        }
        EXPECT_LT((modal - direct).norm() / direct.norm(), 1e-8);
    }
}

INSTANTIATE_TEST_SUITE_P(RandomTrees, PencilInvariants, ::testing::Range(1, 41));
