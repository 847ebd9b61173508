#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "fedmeta/cost_model.hpp"
#include "fedmeta/random.hpp"

using namespace fedmeta;

TEST(ShannonRate, ExperimentChannel) {
    const ChannelConfig ch;
    EXPECT_DOUBLE_EQ(shannon_rate(ch), 5000.0 * std::log2(5.0));
    EXPECT_NEAR(shannon_rate(ch), 11609.64, 0.005);
}

TEST(ShannonRate, ZeroPowerGivesZeroRate) { EXPECT_EQ(shannon_rate(5000.0, 0.0, 1e-4), 0.0); }

TEST(ShannonRate, LinearInBandwidthAtFixedSnr) {
    const double r1 = shannon_rate(1000.0, 1.0, 1e-4);  // SNR 10
    const double r2 = shannon_rate(2000.0, 2.0, 1e-4);  // SNR 10
    EXPECT_DOUBLE_EQ(r2, 2.0 * r1);
}

TEST(ShannonRate, SnrOfExperimentChannelIsSixDecibels) {
    // P / (N0 B) = 4
    EXPECT_NEAR(snr_db(ChannelConfig{}), 6.0206, 1e-4);
}

TEST(ChannelConfig, RejectsNonPositiveFields) {
    ChannelConfig ch;
    ch.tx_power_w = 0.0;
    EXPECT_THROW(shannon_rate(ch), error);
    ch = {};
    ch.bandwidth_hz = -1.0;
    EXPECT_THROW(ch.validate(), error);
}

TEST(TransferCost, MnistModelOverExperimentChannel) {
    const auto c = transfer_cost(6442, ChannelConfig{});
    EXPECT_DOUBLE_EQ(c.time_s, 206144.0 / (5000.0 * std::log2(5.0)));
    EXPECT_NEAR(c.time_s, 17.756, 5e-4);
    EXPECT_NEAR(c.energy_j, 35.51, 5e-3);
}

TEST(TransferCost, ProportionalToModelSize) {
    const auto a = transfer_cost(1761, ChannelConfig{});
    const auto b = transfer_cost(3522, ChannelConfig{});
    EXPECT_DOUBLE_EQ(b.time_s, 2.0 * a.time_s);
    EXPECT_DOUBLE_EQ(b.energy_j, 2.0 * a.energy_j);
}

TEST(RecordRound, EmptyRoundIsAllZero) {
    CostLedger ledger;
    record_round(ledger, 0, 0, 0, 10, ChannelConfig{}, 0, 0.0, 15.0);
    const auto& r = ledger.rounds().front();
    EXPECT_EQ(r.bits(), 0u);
    EXPECT_EQ(r.comm_time_s, 0.0);
    EXPECT_EQ(r.comm_energy_j, 0.0);
    EXPECT_EQ(r.grad_evals, 0u);
    EXPECT_EQ(r.compute_energy_j, 0.0);
}

TEST(RecordRound, ComputeEnergyIsWallTimeTimesWatts) {
    CostLedger ledger;
    record_round(ledger, 3, 1, 1, 10, ChannelConfig{}, 4, 0.5, 15.0);
    EXPECT_DOUBLE_EQ(ledger.rounds().front().compute_energy_j, 7.5);
    EXPECT_DOUBLE_EQ(ledger.rounds().front().comm_energy_j, 2.0 * ledger.rounds().front().comm_time_s);
}

TEST(RecordRound, MetaBackwardMessageAudit) {
    // N = 3 agents, K = 50: one upload round, then 50 rounds of (broadcast, upload).
    const ChannelConfig ch;
    CostLedger ledger;
    record_round(ledger, 50, 3, 0, 6442, ch, 0, 0.0, 15.0);
    for (long k = 49; k >= 0; --k) record_round(ledger, k, 3, ch.downlink_transfers(3), 6442, ch, 3, 0.0, 15.0);
    const auto t = ledger.totals();
    EXPECT_EQ(t.uplinks, 153u);
    EXPECT_EQ(t.downlinks, 150u);
    const double audit = ch.tx_power_w * static_cast<double>(t.bits()) / shannon_rate(ch);
    EXPECT_NEAR(t.comm_energy_j, audit, 1e-9 * audit);
    EXPECT_NEAR(t.comm_energy_j, 303 * 35.5126, 0.1);
}

TEST(RecordRound, SingleBroadcastAccounting) {
    ChannelConfig ch;
    ch.broadcast = BroadcastAccounting::single;
    EXPECT_EQ(ch.downlink_transfers(7), 1u);
}

TEST(CostLedger, TwoIdenticalRoundsDoubleTotals) {
    CostLedger one, two;
    record_round(one, 1, 3, 3, 100, ChannelConfig{}, 9, 0.25, 15.0);
    record_round(two, 1, 3, 3, 100, ChannelConfig{}, 9, 0.25, 15.0);
    record_round(two, 1, 3, 3, 100, ChannelConfig{}, 9, 0.25, 15.0);
    EXPECT_EQ(two.totals().bits(), 2 * one.totals().bits());
    EXPECT_EQ(two.totals().grad_evals, 2 * one.totals().grad_evals);
    EXPECT_DOUBLE_EQ(two.totals().comm_energy_j, 2 * one.totals().comm_energy_j);
    EXPECT_DOUBLE_EQ(two.totals().compute_energy_j, 2 * one.totals().compute_energy_j);
}

TEST(CostLedger, TotalsInvariantToRecordOrder) {
    Rng rng(4);
    std::uniform_int_distribution<int> count(0, 9);
    std::vector<std::array<int, 3>> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({count(rng), count(rng), count(rng)});
    auto build = [&](const std::vector<std::array<int, 3>>& order) {
        CostLedger l;
        for (const auto& r : order)
            record_round(l, 0, static_cast<std::uint64_t>(r[0]), static_cast<std::uint64_t>(r[1]), 1761,
                         ChannelConfig{}, static_cast<std::uint64_t>(r[2]), 0.125 * r[2], 15.0);
        return l.totals();
    };
    const auto forward = build(rows);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto shuffled = build(rows);
    EXPECT_EQ(forward.bits(), shuffled.bits());
    EXPECT_EQ(forward.grad_evals, shuffled.grad_evals);
    EXPECT_NEAR(forward.comm_energy_j, shuffled.comm_energy_j, 1e-9 * forward.comm_energy_j);
    EXPECT_DOUBLE_EQ(forward.wall_time_s, shuffled.wall_time_s);
}

TEST(CostLedger, CsvHasOneRowPerRoundPlusTotal) {
    CostLedger l;
    record_round(l, 2, 1, 0, 10, ChannelConfig{}, 1, 0.0, 15.0);
    record_round(l, 1, 1, 1, 10, ChannelConfig{}, 1, 0.0, 15.0);
    std::ostringstream os;
    l.write_costs_csv(os);
    const std::string text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_NE(text.find("\ntotal,960,"), std::string::npos);
}
