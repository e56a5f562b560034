#include "support.hpp"

#include <modal_strength/error.hpp>
#include <modal_strength/strength_metrics.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace ms = modal_strength;
using namespace test_support;

namespace {

ms::ModalDecomposition case1(double j0, double d0, const ms::Vector& s, std::vector<bool> boundary = {}) {
    return ms::decompose(pencil(two_bus_l(), s, std::move(boundary), j0, d0));
}

/// Static load-only voltage pencil: every retained bus consumes q, springs -2 q.
ms::ModalDecomposition load_pencil(const ms::Matrix& l, const ms::Vector& q, std::vector<bool> boundary) {
    std::vector<ms::BusId> ids;
    for (Eigen::Index i = 0; i < l.rows(); ++i) ids.push_back(static_cast<ms::BusId>(i + 1));
    ms::Vector s = ms::Vector::Zero(l.rows());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!boundary[static_cast<std::size_t>(i)]) s[i] = -2.0 * q[k++];
    }
    auto p = ms::make_pencil_problem(ms::Side::Voltage, ids, l, s, boundary);
    p.static_only = true;
    p.nominal_spring = 1.0;
    p.network_gain = 1.0;
    return ms::decompose(p);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(BusModalParams, Case1aSameBus) {
    const auto dec = case1(10, 10, ms::Vector::Ones(2));
    EXPECT_NEAR(ms::bus_modal_params(dec, dec.mode_by_label("DM1"), 1, 1).inertia, 20.0, 1e-12);
}

TEST(BusModalParams, Case1aAntiPhase) {
    const auto dec = case1(10, 10, ms::Vector::Ones(2));
    EXPECT_NEAR(ms::bus_modal_params(dec, dec.mode_by_label("DM1"), 1, 2).inertia, -20.0, 1e-12);
}

TEST(BusModalParams, CommonModeUnchangedAnywhere) {
    const auto dec = case1(10, 10, ms::Vector::Ones(2));
    const auto cm = *dec.cm_index();
    for (ms::BusId i : {1, 2}) {
        for (ms::BusId j : {1, 2}) {
            const auto p = ms::bus_modal_params(dec, cm, i, j);
            EXPECT_DOUBLE_EQ(p.inertia, dec.params[static_cast<std::size_t>(cm)].inertia);
            EXPECT_DOUBLE_EQ(p.damping, dec.params[static_cast<std::size_t>(cm)].damping);
        }
    }
}

TEST(NodalInertia, TwoDeviceCases) {
    EXPECT_NEAR(ms::nodal_inertia(case1(10, 10, ms::Vector::Ones(2)), 1, 1), 10.0, 1e-12);
    EXPECT_NEAR(ms::nodal_inertia(case1(2, 20, ms::Vector::Ones(2)), 1, 1), 2.0, 1e-12);
    EXPECT_NEAR(ms::nodal_inertia(case1(10, 10, ms::Vector::Ones(2) * 1.0, {false, true}), 1, 1), 10.0, 1e-12);
    EXPECT_NEAR(ms::nodal_inertia(case1(10, 10, vector({1.0, 0.0})), 1, 1), 10.0, 1e-12);
}

TEST(NodalInertia, CrossBusIsInfinite) {
    EXPECT_EQ(ms::nodal_inertia(case1(10, 10, ms::Vector::Ones(2)), 1, 2), kInf);
    EXPECT_EQ(ms::nodal_inertia(case1(10, 10, vector({1, 2})), 2, 1), kInf);
}

TEST(InertiaSlots, InfiniteAndAbsentEntries) {
    const auto c = ms::modal_inertia_slots(case1(10, 10, vector({1.0, 1.0}), {false, true}), 1, 2);
    ASSERT_TRUE(c[0] && c[1]);
    EXPECT_EQ(*c[0], kInf);
    EXPECT_NEAR(*c[1], 10.0, 1e-12);
    const auto d = ms::modal_inertia_slots(case1(10, 10, vector({1.0, 0.0})), 1, 2);
    ASSERT_TRUE(d[0]);
    EXPECT_NEAR(*d[0], 10.0, 1e-12);
    EXPECT_FALSE(d[1].has_value());
}

TEST(CmVoltageEstimate, Values) {
    const std::vector<double> k{10, 10}, q{0.4, 0.4}, none{};
    EXPECT_NEAR(ms::cm_voltage_spring_estimate(k, q), 18.4, 1e-14);
    EXPECT_DOUBLE_EQ(ms::cm_voltage_spring_estimate(k, none), 20.0);
    const std::vector<double> balanced{5, 5};
    EXPECT_DOUBLE_EQ(ms::cm_voltage_spring_estimate(k, balanced), 0.0);
}

TEST(Gscr, SingleLoadAndScaling) {
    const auto l22 = matrix(1, {3});
    EXPECT_DOUBLE_EQ(ms::gscr(l22, vector({1})), 3.0);
    EXPECT_DOUBLE_EQ(ms::gscr(l22, vector({2})), 1.5);
    EXPECT_THROW((void)ms::gscr(l22, vector({0})), ms::Error);
}

TEST(Gscr, FromLoadOnlyPencil) {
    const auto dec = load_pencil(two_bus_l(), vector({1.0}), {false, true});
    EXPECT_DOUBLE_EQ(ms::gscr(dec.problem), 3.0);
}

TEST(GscrBridge, SpringAndFormsAtGscrThree) {
    const auto dec = load_pencil(two_bus_l(), vector({1.0}), {false, true});
    const auto r = ms::gscr_spring_bridge(dec, 3.0);
    EXPECT_NEAR(r.l22_form, 3.0, 1e-12);
    EXPECT_NEAR(r.printed_estimate, 3.0, 1e-12);
    // K = -2 Q + L22 with Q = 1, L22 = 3.
    EXPECT_NEAR(r.k_mv, 1.0, 1e-12);
    EXPECT_NEAR(r.exact_estimate, r.k_mv, 1e-12);
    EXPECT_TRUE(r.signs_agree);
}

TEST(GscrBridge, BoundaryAtGscrTwo) {
    const auto dec = load_pencil(two_bus_l(), vector({1.5}), {false, true});
    const double g = ms::gscr(dec.problem);
    EXPECT_DOUBLE_EQ(g, 2.0);
    const auto r = ms::gscr_spring_bridge(dec, g);
    EXPECT_NEAR(r.k_mv, 0.0, 1e-12);
    EXPECT_NEAR(r.printed_estimate, 0.0, 1e-12);
}

TEST(GscrBridge, MultiLoadExactFormMatches) {
    const auto l = matrix(4, {4, -1, -2, -1, -1, 3, -1, -1, -2, -1, 3, 0, -1, -1, 0, 2});
    const auto dec = load_pencil(l, vector({0.5, 0.8}), {true, true, false, false});
    const double g = ms::gscr(dec.problem);
    const auto r = ms::gscr_spring_bridge(dec, g);
    EXPECT_NEAR(r.exact_estimate, r.k_mv, 1e-10 * std::max(1.0, std::abs(r.k_mv)));
}

TEST(TwoDeviceOracle, Case1aInertia) {
    const auto o = ms::two_device_oracle(3, 3, 1, 1, {10, 10, 0}, {1, 1}, 1.0);
    EXPECT_DOUBLE_EQ(o.freq_cm.inertia, 20.0);
    EXPECT_DOUBLE_EQ(o.freq_dm.inertia, 20.0);
    const auto [j1, j2] = ms::two_device_bus1_inertia(10, 10, 1, 1);
    EXPECT_DOUBLE_EQ(j1, 20.0);
    EXPECT_DOUBLE_EQ(j2, 20.0);
}

TEST(TwoDeviceOracle, DmThreshold) {
    EXPECT_NEAR(ms::two_device_dm_threshold(3.0, 10.0), -3.0 / 1.3, 1e-15);
    EXPECT_NEAR(ms::two_device_dm_threshold(3.0, 10.0), -2.3076923076923075, 1e-15);
    EXPECT_NEAR(ms::two_device_dm_threshold(3.0, 1e15), -3.0, 1e-12);
}

TEST(StrengthReport, CollapseFlagsOnNegativeSprings) {
    const auto ok = ms::build_strength_report(load_pencil(two_bus_l(), vector({1.0}), {false, true}));
    ASSERT_EQ(ok.modes.size(), 1u);
    EXPECT_FALSE(ok.modes[0].collapse);
    ASSERT_TRUE(ok.gscr.has_value());
    EXPECT_DOUBLE_EQ(*ok.gscr, 3.0);
    const auto weak = ms::build_strength_report(load_pencil(two_bus_l(), vector({2.0}), {false, true}));
    EXPECT_TRUE(weak.modes[0].collapse);
}

TEST(StrengthReport, FrequencyEntries) {
    const auto rep = ms::build_strength_report(case1(10, 10, ms::Vector::Ones(2)));
    EXPECT_EQ(rep.side, ms::Side::Frequency);
    EXPECT_EQ(rep.modes.size(), 2u);
    EXPECT_EQ(rep.nodal_inertia.size(), 4u);
    EXPECT_FALSE(rep.bus_specific.empty());
}
