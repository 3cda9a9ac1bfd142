#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "eknit/bus/bus_model.hpp"
#include "eknit/sim/reference.hpp"

using namespace eknit;
using namespace eknit::bus;

namespace {

BusModel reference_bus() { return BusModel(sim::reference_layout(), sim::kReferenceHub); }

LineFault sleeve_short(double from, double to, Channel a = Channel::SdaP, Channel b = Channel::SdaN) {
    LineFault f;
    f.id = "short";
    f.type = FaultType::ShortAdjacent;
    f.channel_a = a;
    f.channel_b = b;
    f.span = {"l_sleeve", from, to};
    return f;
}

}  // namespace

TEST(Module, AddressRange) {
    auto d = make_imu(0x07);
    EXPECT_THROW(validate(d), ValidationError);
    d.address = 0x78;
    EXPECT_THROW(validate(d), ValidationError);
    d.address = 0x77;
    EXPECT_NO_THROW(validate(d));
}

TEST(Module, TemperatureCountsInvertTheMap) {
    const TemperatureSensorMap map;
    for (double t = -5.0; t < 60.0; t += 0.37) {
        const auto c = temperature_to_counts(map, t);
        EXPECT_LE(std::abs(map.slope_c_per_count * c + map.intercept_c - t), 0.5 * map.slope_c_per_count + 1e-12);
    }
}

TEST(Bus, AttachRejectsOccupiedSiteAndDuplicateId) {
    auto bus = reference_bus();
    bus.attach("a", "l_wrist", make_imu(0x10));
    EXPECT_THROW(bus.attach("b", "l_wrist", make_imu(0x11)), ValidationError);
    EXPECT_THROW(bus.attach("a", "r_wrist", make_imu(0x11)), ValidationError);
    EXPECT_THROW(bus.attach("c", "nowhere", make_imu(0x11)), ValidationError);
    EXPECT_TRUE(bus.detach("a"));
    EXPECT_FALSE(bus.detach("a"));
}

TEST(Bus, ScanEqualsAttachedAndOthersNack) {
    auto bus = reference_bus();
    bus.attach("a", "l_wrist", make_imu(0x10));
    bus.attach("b", "belly", make_temperature(0x48));
    bus.attach("c", "hem_l", make_imu(0x11));
    EXPECT_EQ(scan(bus), (std::vector<std::uint8_t>{0x10, 0x11, 0x48}));
    for (int a = 0x08; a <= 0x77; ++a) {
        const auto t = transact(bus, read_request(static_cast<std::uint8_t>(a), 0x00, 1));
        const bool present = a == 0x10 || a == 0x11 || a == 0x48;
        EXPECT_EQ(t.result, present ? ResultKind::Ack : ResultKind::NackAddr) << a;
    }
}

TEST(Bus, WhoAmI) {
    auto bus = reference_bus();
    bus.attach("imu", "chest", make_imu(0x10));
    bus.attach("t", "waist", make_temperature(0x11));
    EXPECT_EQ(transact(bus, read_request(0x10, reg::kWhoAmI, 1)).data, std::vector<std::uint8_t>{reg::kImuWhoAmIValue});
    EXPECT_EQ(transact(bus, read_request(0x11, reg::kTempWhoAmI, 1)).data, std::vector<std::uint8_t>{reg::kTempWhoAmIValue});
}

TEST(Bus, MissingRegisterIsNackData) {
    auto bus = reference_bus();
    bus.attach("imu", "chest", make_imu(0x10));
    EXPECT_EQ(transact(bus, read_request(0x10, 0x7F, 1)).result, ResultKind::NackData);
}

TEST(Bus, WriteThenRead) {
    auto bus = reference_bus();
    bus.attach("imu", "chest", make_imu(0x10));
    bus.find_module("imu")->descriptor.registers[0x60] = 0;
    bus.find_module("imu")->descriptor.registers[0x61] = 0;
    const std::vector<std::uint8_t> data = {0xAB, 0xCD};
    EXPECT_EQ(transact(bus, write_request(0x10, 0x60, data)).result, ResultKind::Ack);
    EXPECT_EQ(transact(bus, read_request(0x10, 0x60, 2)).data, data);
    // Writing past the map touches nothing.
    const std::vector<std::uint8_t> three = {1, 2, 3};
    EXPECT_EQ(transact(bus, write_request(0x10, 0x60, three)).result, ResultKind::NackData);
    EXPECT_EQ(transact(bus, read_request(0x10, 0x60, 2)).data, data);
}

TEST(Bus, ConflictingAddressesWireAnd) {
    auto bus = reference_bus();
    auto d1 = make_imu(0x10);
    auto d2 = make_imu(0x10);
    d1.registers[0x70] = 0b1100'1010;
    d2.registers[0x70] = 0b1010'0110;
    bus.attach("a", "chest", d1);
    bus.attach("b", "waist", d2);
    const auto conflicts = detect_conflicts(bus);
    ASSERT_EQ(conflicts.size(), 1u);
    EXPECT_EQ(conflicts[0].address, 0x10);
    EXPECT_EQ(conflicts[0].sites, (std::vector<std::string>{"chest", "waist"}));
    EXPECT_EQ(transact(bus, read_request(0x10, 0x70, 1)).data, std::vector<std::uint8_t>{0b1000'0010});
}

TEST(Bus, ImuReadRoundTripsWithinOneLsb) {
    auto bus = reference_bus();
    bus.attach("imu", "r_forearm", make_imu(0x12));
    const auto truth = imu_sample_for_flexion(40.0, 25.0);
    bus.find_module("imu")->imu = truth;
    const auto r = read_imu(bus, 0x12);
    ASSERT_TRUE(r.ok());
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(r.value.accel_mps2[i], truth.accel_mps2[i], 0.5 / reg::kAccelLsbPerMps2 + 1e-12);
        EXPECT_NEAR(r.value.gyro_dps[i], truth.gyro_dps[i], 0.5 / reg::kGyroLsbPerDps + 1e-12);
        EXPECT_NEAR(r.value.mag_ut[i], truth.mag_ut[i], 0.5 / reg::kMagLsbPerUt + 1e-12);
    }
}

TEST(Bus, ReadHelpersReportWrongKindAndAbsence) {
    auto bus = reference_bus();
    bus.attach("t", "belly", make_temperature(0x48));
    EXPECT_EQ(read_imu(bus, 0x48).status, ReadStatus::WrongKind);
    EXPECT_EQ(read_imu(bus, 0x49).status, ReadStatus::NackAddr);
    bus.find_module("t")->temperature_c = 33.3;
    const auto raw = read_temperature_raw(bus, 0x48);
    ASSERT_TRUE(raw.ok());
    EXPECT_EQ(raw.value, temperature_to_counts(TemperatureSensorMap{}, 33.3));
}

TEST(Bus, MarginsAllPositiveOnReferenceLayout) {
    const auto bus = reference_bus();
    for (const auto& s : bus.layout().sites()) {
        const auto& l = bus.link(s.id);
        ASSERT_TRUE(l.margin_v()) << s.id;
        EXPECT_GT(*l.margin_v(), 0.0);
        EXPECT_TRUE(l.responsive());
    }
}

TEST(Bus, OpenOnPowerKillsDownstreamSites) {
    auto bus = reference_bus();
    bus.attach("w", "l_wrist", make_imu(0x10));
    bus.attach("e", "l_elbow", make_imu(0x11));
    LineFault f;
    f.id = "cut";
    f.type = FaultType::Open;
    f.channel_a = Channel::Gnd;
    f.span = {"l_sleeve", 20.0, 21.0};
    bus.inject_fault(f);
    EXPECT_EQ(scan(bus), std::vector<std::uint8_t>{0x11});
    EXPECT_FALSE(bus.link("l_wrist").powered());
    EXPECT_TRUE(bus.clear_fault("cut"));
    EXPECT_EQ(scan(bus), (std::vector<std::uint8_t>{0x10, 0x11}));
}

TEST(Bus, ShortFailsOnlyRoutesThroughIt) {
    auto bus = reference_bus();
    bus.attach("w", "l_wrist", make_imu(0x10));
    bus.attach("f", "l_forearm", make_imu(0x11));
    bus.attach("c", "chest", make_imu(0x12));
    bus.inject_fault(sleeve_short(5.0, 10.0));
    const auto t = transact(bus, read_request(0x10, 0, 1));
    EXPECT_EQ(t.result, ResultKind::BusFault);
    EXPECT_EQ(t.fault, BusFaultKind::Short);
    EXPECT_EQ(transact(bus, read_request(0x11, 0, 1)).result, ResultKind::Ack);
    EXPECT_EQ(transact(bus, read_request(0x12, 0, 1)).result, ResultKind::Ack);
}

TEST(Bus, ShortBetweenNonAdjacentChannelsRejected) {
    auto bus = reference_bus();
    EXPECT_THROW(bus.inject_fault(sleeve_short(1.0, 2.0, Channel::Vcc, Channel::SclN)), ValidationError);
    EXPECT_THROW(bus.inject_fault(sleeve_short(5.0, 1.0)), ValidationError);
}

TEST(Bus, ClearingFaultRestoresState) {
    auto bus = reference_bus();
    const auto before = bus.link("l_wrist").margin_v();
    bus.inject_fault(sleeve_short(5.0, 10.0));
    EXPECT_TRUE(bus.link("l_wrist").shorted);
    bus.clear_fault("short");
    EXPECT_FALSE(bus.link("l_wrist").shorted);
    EXPECT_EQ(bus.link("l_wrist").margin_v(), before);
}

TEST(Bus, BitAccurateModeIsErrorFreeOnCleanLine) {
    auto bus = reference_bus();
    bus.attach("w", "l_wrist", make_imu(0x10));
    bus.set_bit_accurate(true);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(transact(bus, read_request(0x10, reg::kImuData, 18)).result, ResultKind::Ack);
}

TEST(Bus, BitAccurateModeFlagsNoisyFrames) {
    auto bus = reference_bus();
    bus.attach("w", "l_wrist", make_imu(0x10));
    signal::LinkNoise noise;
    noise.leg_sigma_v = 4.0;
    noise.seed = 3;
    bus.set_bit_accurate(true, noise);
    const auto t = transact(bus, read_request(0x10, reg::kImuData, 18));
    EXPECT_EQ(t.result, ResultKind::BusFault);
    EXPECT_EQ(t.fault, BusFaultKind::BitError);
}

TEST(Bus, TransactionLogIsJsonLines) {
    auto bus = reference_bus();
    bus.attach("w", "l_wrist", make_imu(0x10));
    std::vector<TransactionRecord> log = {{0.5, transact(bus, read_request(0x10, 0, 1))},
                                          {1.0, transact(bus, read_request(0x20, 0, 1))}};
    const auto text = transaction_log_jsonl(log);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    EXPECT_NE(text.find("\"nack_addr\""), std::string::npos);
}
