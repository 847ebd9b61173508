#pragma once

// Communication and computation accounting for simulated federated runs.
//
// Link model: AWGN channel per agent with Shannon rate R = B log2(1 + P/(N0 B)).
// Sending a d-element model costs tau = bits_per_element * d / R seconds and
// P * tau joules. Communication time in the ledger is summed over transfers
// (agent-seconds), so comm_energy == P * comm_time always holds.
//
// Compute energy is wall-clock seconds times a nominal device wattage; the
// gradient-evaluation count is the hardware-independent compute measure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedmeta/csv.hpp"
#include "fedmeta/error.hpp"

namespace fedmeta {

enum class BroadcastAccounting {
    per_agent, // a PS broadcast to N agents is charged as N unicast transfers
    single,    // one transfer per broadcast
};

struct ChannelConfig {
    double bandwidth_hz = 5000.0;
    double tx_power_w = 2.0;
    double noise_psd = 1e-4;
    std::uint32_t bits_per_element = 32;
    BroadcastAccounting broadcast = BroadcastAccounting::per_agent;

    void validate() const {
        require(bandwidth_hz > 0.0 && std::isfinite(bandwidth_hz), errc::invalid_config, "bandwidth must be positive");
        require(tx_power_w > 0.0 && std::isfinite(tx_power_w), errc::invalid_config, "transmit power must be positive");
        require(noise_psd > 0.0 && std::isfinite(noise_psd), errc::invalid_config, "noise PSD must be positive");
        require(bits_per_element >= 1, errc::invalid_config, "bits per element must be >= 1");
    }

    std::size_t downlink_transfers(std::size_t agents) const {
        return broadcast == BroadcastAccounting::per_agent ? agents : 1;
    }
};

struct CostSettings {
    ChannelConfig channel;
    double device_watts = 15.0;
};

inline double shannon_rate(double bandwidth_hz, double tx_power_w, double noise_psd) {
    return bandwidth_hz * std::log2(1.0 + tx_power_w / (noise_psd * bandwidth_hz));
}

inline double shannon_rate(const ChannelConfig& ch) {
    ch.validate();
    return shannon_rate(ch.bandwidth_hz, ch.tx_power_w, ch.noise_psd);
}

inline double snr_db(const ChannelConfig& ch) {
    return 10.0 * std::log10(ch.tx_power_w / (ch.noise_psd * ch.bandwidth_hz));
}

struct TransferCost {
    double time_s = 0.0;
    double energy_j = 0.0;
};

inline TransferCost transfer_cost(std::size_t model_size, const ChannelConfig& ch) {
    require(model_size >= 1, errc::invalid_argument, "model size must be >= 1");
    const double bits = static_cast<double>(ch.bits_per_element) * static_cast<double>(model_size);
    const double tau = bits / shannon_rate(ch);
    return {tau, ch.tx_power_w * tau};
}

struct RoundRecord {
    long round = 0;
    std::uint64_t uplinks = 0;
    std::uint64_t downlinks = 0;
    std::uint64_t uplink_bits = 0;
    std::uint64_t downlink_bits = 0;
    double comm_time_s = 0.0;
    double comm_energy_j = 0.0;
    std::uint64_t grad_evals = 0;
    double wall_time_s = 0.0;
    double compute_energy_j = 0.0;

    std::uint64_t bits() const noexcept { return uplink_bits + downlink_bits; }
    std::uint64_t transfers() const noexcept { return uplinks + downlinks; }

    RoundRecord& operator+=(const RoundRecord& r) noexcept {
        uplinks += r.uplinks;
        downlinks += r.downlinks;
        uplink_bits += r.uplink_bits;
        downlink_bits += r.downlink_bits;
        comm_time_s += r.comm_time_s;
        comm_energy_j += r.comm_energy_j;
        grad_evals += r.grad_evals;
        wall_time_s += r.wall_time_s;
        compute_energy_j += r.compute_energy_j;
        return *this;
    }
};

class CostLedger {
public:
    const std::vector<RoundRecord>& rounds() const noexcept { return rounds_; }
    std::size_t size() const noexcept { return rounds_.size(); }

    void append(const RoundRecord& r) { rounds_.push_back(r); }

    RoundRecord totals() const { return prefix_totals(rounds_.size()); }

    /// Totals over the first `n` records.
    RoundRecord prefix_totals(std::size_t n) const {
        RoundRecord t;
        t.round = -1;
        for (std::size_t i = 0; i < n && i < rounds_.size(); ++i) t += rounds_[i];
        return t;
    }

    CostLedger prefix(std::size_t n) const {
        CostLedger out;
        for (std::size_t i = 0; i < n && i < rounds_.size(); ++i) out.append(rounds_[i]);
        return out;
    }

    /// Deterministic columns only: round,bits,time_s,comm_j,grad_evals,uplinks,downlinks.
    /// The last row, labelled "total", holds the ledger totals.
    void write_costs_csv(std::ostream& os) const {
        os << "round,bits,time_s,comm_j,grad_evals,uplinks,downlinks\n";
        auto row = [&](const std::string& label, const RoundRecord& r) {
            os << label << ',' << r.bits() << ',' << format_double(r.comm_time_s) << ','
               << format_double(r.comm_energy_j) << ',' << r.grad_evals << ',' << r.uplinks << ',' << r.downlinks
               << '\n';
        };
        for (const auto& r : rounds_) row(std::to_string(r.round), r);
        row("total", totals());
    }

    /// Measured columns: round,wall_time_s,compute_j (varies between runs).
    void write_timing_csv(std::ostream& os) const {
        os << "round,wall_time_s,compute_j\n";
        auto row = [&](const std::string& label, const RoundRecord& r) {
            os << label << ',' << format_double(r.wall_time_s) << ',' << format_double(r.compute_energy_j) << '\n';
        };
        for (const auto& r : rounds_) row(std::to_string(r.round), r);
        row("total", totals());
    }

private:
    std::vector<RoundRecord> rounds_;
};

inline void record_round(CostLedger& ledger, long round, std::uint64_t uplinks, std::uint64_t downlinks,
                         std::size_t model_size, const ChannelConfig& ch, std::uint64_t grad_evals,
                         double wall_time_s, double device_watts) {
    require(wall_time_s >= 0.0 && device_watts > 0.0, errc::invalid_argument,
            "wall time must be >= 0 and device wattage > 0");
    RoundRecord r;
    r.round = round;
    r.uplinks = uplinks;
    r.downlinks = downlinks;
    const std::uint64_t per_transfer = std::uint64_t{ch.bits_per_element} * model_size;
    r.uplink_bits = uplinks * per_transfer;
    r.downlink_bits = downlinks * per_transfer;
    const TransferCost one = transfer_cost(model_size, ch);
    r.comm_time_s = static_cast<double>(uplinks + downlinks) * one.time_s;
    r.comm_energy_j = ch.tx_power_w * r.comm_time_s;
    r.grad_evals = grad_evals;
    r.wall_time_s = wall_time_s;
    r.compute_energy_j = wall_time_s * device_watts;
    ledger.append(r);
}

/// Monotonic stopwatch for the compute sections of a round.
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace fedmeta
