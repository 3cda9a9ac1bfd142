#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eknit/bus/module.hpp"
#include "eknit/common.hpp"
#include "eknit/signal/link.hpp"
#include "eknit/topology/graph.hpp"
#include "eknit/topology/layout.hpp"

namespace eknit::bus {

enum class FaultType : std::uint8_t { Open, ShortAdjacent };

/// A line defect on one group. Open uses `channel_a` only.
struct LineFault {
    std::string id;
    FaultType type = FaultType::Open;
    Channel channel_a = Channel::SdaP;
    Channel channel_b = Channel::SdaN;
    topology::GroupSpan span;

    bool operator==(const LineFault&) const = default;
};

void validate(const LineFault& fault, const topology::GarmentLayout& layout);

struct AttachedModule {
    std::string id;
    std::string site;
    ModuleDescriptor descriptor;
    ImuSample imu;
    double temperature_c = 25.0;

    bool operator==(const AttachedModule&) const = default;
};

/// Electrical view of one site as seen from the hub.
struct SiteLink {
    std::array<bool, kChannelCount> reachable{};
    std::optional<signal::PairPath> sda;
    std::optional<signal::PairPath> scl;
    std::optional<signal::EyeReport> sda_eye;
    std::optional<signal::EyeReport> scl_eye;
    bool shorted = false;

    bool powered() const;
    bool signals_reachable() const;
    /// Smaller of the two pair margins; nullopt when a signal channel is cut.
    std::optional<double> margin_v() const;
    bool decodable() const;
    bool responsive() const { return powered() && signals_reachable() && decodable() && !shorted; }
};

struct Transaction;

/// Attached modules plus line conditions over a fixed garment layout. The
/// layout itself never changes; faults are overlays, so clearing a fault
/// restores the previous electrical state exactly.

class BusModel {
  public:
    BusModel(topology::GarmentLayout layout, std::string hub_site, signal::LinkConfig link = {});

    const topology::GarmentLayout& layout() const { return *layout_; }
    const std::string& hub() const { return hub_; }
    const signal::LinkConfig& link_config() const { return link_; }

    void attach(const std::string& module_id, const std::string& site, ModuleDescriptor descriptor);
    bool detach(std::string_view module_id);
    const std::map<std::string, AttachedModule, std::less<>>& modules() const { return modules_; }
    AttachedModule* find_module(std::string_view module_id);
    const AttachedModule* find_module(std::string_view module_id) const;
    std::optional<std::string> occupant(std::string_view site) const;

    void inject_fault(LineFault fault);
    bool clear_fault(std::string_view fault_id);
    const std::vector<LineFault>& faults() const { return faults_; }

    const SiteLink& link(std::size_t site) const;
    const SiteLink& link(std::string_view site) const;

    /// Run frames through the full waveform chain instead of the cached eye check.
    void set_bit_accurate(bool on, signal::LinkNoise noise = {});
    bool bit_accurate() const { return bit_accurate_; }
    const signal::LinkNoise& bit_noise() const { return bit_noise_; }

  private:
    struct Cache;
    const Cache& cache() const;

    std::shared_ptr<const topology::GarmentLayout> layout_;
    std::string hub_;
    signal::LinkConfig link_;
    std::map<std::string, AttachedModule, std::less<>> modules_;
    std::vector<LineFault> faults_;
    bool bit_accurate_ = false;
    signal::LinkNoise bit_noise_;
    std::uint64_t frames_sent_ = 0;
    mutable std::shared_ptr<const Cache> cache_;

    friend Transaction transact(BusModel& bus, Transaction t);
};

enum class Direction : std::uint8_t { Read, Write };
enum class ResultKind : std::uint8_t { Pending, Ack, NackAddr, NackData, BusFault };
enum class BusFaultKind : std::uint8_t { None, Short, BitError };

std::string_view result_name(ResultKind r);
std::string_view bus_fault_name(BusFaultKind k);

/// Frame-level transfer. Reads send `payload[0]` as the register pointer
/// (0 when empty) and return `read_length` bytes; writes send the pointer
/// followed by data.
struct Transaction {
    std::uint8_t address = 0;
    Direction direction = Direction::Read;
    std::vector<std::uint8_t> payload;
    std::size_t read_length = 1;

    ResultKind result = ResultKind::Pending;
    BusFaultKind fault = BusFaultKind::None;
    std::vector<std::uint8_t> data;

    bool operator==(const Transaction&) const = default;
};

Transaction read_request(std::uint8_t address, std::uint8_t reg, std::size_t length);
Transaction write_request(std::uint8_t address, std::uint8_t reg, std::span<const std::uint8_t> data);

/// Responding addresses, ascending and unique.
std::vector<std::uint8_t> scan(const BusModel& bus);

/// Never throws for bus-level problems; they are encoded in the result.
Transaction transact(BusModel& bus, Transaction t);

struct AddressConflict {
    std::uint8_t address = 0;
    std::vector<std::string> sites;

    bool operator==(const AddressConflict&) const = default;
};

std::vector<AddressConflict> detect_conflicts(const BusModel& bus);

enum class ReadStatus : std::uint8_t { Ok, NackAddr, WrongKind, BusFault };

template <typename T>
struct ReadResult {
    ReadStatus status = ReadStatus::NackAddr;
    T value{};

    bool ok() const { return status == ReadStatus::Ok; }
};

ReadResult<ImuSample> read_imu(BusModel& bus, std::uint8_t address);
ReadResult<std::int32_t> read_temperature_raw(BusModel& bus, std::uint8_t address);

struct TransactionRecord {
    double time_s = 0.0;
    Transaction transaction;
};

/// One JSON object per line: time_s, address, direction, result, fault, data.
std::string transaction_log_jsonl(std::span<const TransactionRecord> log);

}  // namespace eknit::bus
