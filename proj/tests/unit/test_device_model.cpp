#include <modal_strength/device_model.hpp>
#include <modal_strength/error.hpp>

#include <gtest/gtest.h>

namespace ms = modal_strength;

namespace {

ms::DeviceSet homogeneous_set(const std::vector<double>& s_theta, const std::vector<double>& s_v) {
    ms::DeviceSet set;
    set.nominal_freq = {10.0, 10.0, 0.0};
    set.nominal_volt = {5.0, 10.0};
    for (std::size_t i = 0; i < s_theta.size(); ++i) {
        ms::DeviceEntry e;
        e.bus = static_cast<ms::BusId>(i + 1);
        e.s_theta = s_theta[i];
        e.s_v = s_v[i];
        e.params = ms::scaled_nominal(e.s_theta, e.s_v, set.nominal_freq, set.nominal_volt);
        set.entries.push_back(e);
    }
    return set;
}

}  // namespace

TEST(ReduceToUnified, SwingOnly) {
    const auto u = ms::reduce_to_unified({10.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(u.j_ptheta, 10.0);
    EXPECT_DOUBLE_EQ(u.d_ptheta, 10.0);
    EXPECT_DOUBLE_EQ(u.k_ptheta, 0.0);
}

TEST(ReduceToUnified, DroopWithFilter) {
    const auto u = ms::reduce_to_unified({1.0, 1.0, 0.0, 0.0, 0.0, 10.0, 0.5});
    EXPECT_DOUBLE_EQ(u.d_qv, 5.0);
    EXPECT_DOUBLE_EQ(u.k_qv, 10.0);
}

TEST(ReduceToUnified, InstantGovernorAddsToDamping) {
    const auto u = ms::reduce_to_unified({1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0});
    EXPECT_DOUBLE_EQ(u.d_ptheta, 5.0);
}

TEST(AssembleDevices, TwoIdentical) {
    const auto set = homogeneous_set({1, 1}, {1, 1});
    const std::vector<ms::BusId> order{1, 2};
    const auto dm = ms::assemble_device_matrices(set, order);
    EXPECT_EQ(dm.s_theta, ms::Vector::Ones(2));
    EXPECT_EQ(dm.s_v, ms::Vector::Ones(2));
}

TEST(AssembleDevices, FourVsgScalings) {
    const auto set = homogeneous_set({1, 1, 2, 1}, {1, 1, 1, 10});
    const std::vector<ms::BusId> order{1, 2, 3, 4};
    const auto dm = ms::assemble_device_matrices(set, order);
    ms::Vector expected(4);
    expected << 1, 1, 2, 1;
    EXPECT_EQ(dm.s_theta, expected);
    EXPECT_DOUBLE_EQ(dm.s_v[3], 10.0);
}

TEST(AssembleDevices, SingleDevice) {
    const auto set = homogeneous_set({1}, {1});
    const std::vector<ms::BusId> order{1};
    const auto dm = ms::assemble_device_matrices(set, order);
    ASSERT_EQ(dm.s_theta.size(), 1);
    EXPECT_DOUBLE_EQ(dm.s_theta[0], 1.0);
}

TEST(AssembleDevices, HeterogeneousRejectedWhenDeclaredHomogeneous) {
    auto set = homogeneous_set({1, 1}, {1, 1});
    set.entries[1].params.d_ptheta = 7.0;
    EXPECT_EQ(ms::heterogeneous_entries(set), std::vector<ms::BusId>{2});
    const std::vector<ms::BusId> order{1, 2};
    try {
        (void)ms::assemble_device_matrices(set, order);
        FAIL() << "heterogeneous set accepted";
    } catch (const ms::Error& e) {
        EXPECT_EQ(e.kind(), ms::ErrorKind::Consistency);
    }
}

TEST(AssembleDevices, MissingDeviceIsInputError) {
    const auto set = homogeneous_set({1}, {1});
    const std::vector<ms::BusId> order{1, 2};
    EXPECT_THROW((void)ms::assemble_device_matrices(set, order), ms::Error);
}

TEST(ShiftLoadSpring, ZeroShift) {
    const auto set = homogeneous_set({1}, {1});
    const std::vector<ms::BusId> order{1};
    const auto eff = ms::shift_load_spring(set, order, ms::Vector::Zero(1));
    EXPECT_DOUBLE_EQ(eff[0].k, 10.0);
}

TEST(ShiftLoadSpring, ConstantReactiveLoad) {
    ms::DeviceSet set;
    ms::DeviceEntry load;
    load.bus = 3;
    load.kind = ms::DeviceKind::Crpl;
    load.params = {};
    set.entries.push_back(load);
    set.homogeneous = false;
    const std::vector<ms::BusId> order{3};
    const auto eff = ms::shift_load_spring(set, order, ms::Vector::Constant(1, -0.4));
    EXPECT_DOUBLE_EQ(eff[0].k, -0.8);
}

TEST(ShiftLoadSpring, GeneratorInjection) {
    const auto set = homogeneous_set({1}, {1});
    const std::vector<ms::BusId> order{1};
    const auto eff = ms::shift_load_spring(set, order, ms::Vector::Constant(1, 0.2));
    EXPECT_DOUBLE_EQ(eff[0].k, 10.4);
}
