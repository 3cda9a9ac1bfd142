#include "eknit/bus/bus_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "eknit/random.hpp"

namespace eknit::bus {

using topology::ChannelNetwork;
using topology::ConductanceGraph;
using topology::GarmentLayout;
using topology::OpenCut;
using topology::ResistanceTable;

void validate(const LineFault& fault, const GarmentLayout& layout) {
    if (fault.id.empty()) throw ValidationError("fault id must not be empty");
    const auto g = layout.group_index(fault.span.group_id);
    if (!g) throw ValidationError("fault " + fault.id + ": unknown group '" + fault.span.group_id + "'");
    const auto& group = layout.groups()[*g];
    const double from = fault.span.x_from_cm;
    const double to = fault.span.x_to_cm;
    if (!(from < to) || from < group.x_start_cm || to > group.x_end_cm) {
        throw ValidationError("fault " + fault.id + ": span must lie inside group '" + group.id + "'");
    }
    if (fault.type == FaultType::ShortAdjacent && !are_adjacent(fault.channel_a, fault.channel_b)) {
        throw ValidationError("fault " + fault.id + ": shorted channels must be adjacent");
    }
}

bool SiteLink::powered() const {
    return reachable[channel_slot(Channel::Vcc)] && reachable[channel_slot(Channel::Gnd)];
}

bool SiteLink::signals_reachable() const {
    for (auto c : {Channel::SdaP, Channel::SdaN, Channel::SclP, Channel::SclN}) {
        if (!reachable[channel_slot(c)]) return false;
    }
    return true;
}

std::optional<double> SiteLink::margin_v() const {
    if (!sda_eye || !scl_eye) return std::nullopt;
    return std::min(sda_eye->margin_v, scl_eye->margin_v);
}

bool SiteLink::decodable() const {
    return sda_eye && scl_eye && sda_eye->decodable && scl_eye->decodable;
}

struct BusModel::Cache {
    std::vector<SiteLink> links;
};

BusModel::BusModel(GarmentLayout layout, std::string hub_site, signal::LinkConfig link)
    : layout_(std::make_shared<const GarmentLayout>(std::move(layout))),
      hub_(std::move(hub_site)),
      link_(link) {
    layout_->require_site(hub_);
    signal::validate(link_);
}

void BusModel::attach(const std::string& module_id, const std::string& site, ModuleDescriptor descriptor) {
    if (module_id.empty()) throw ValidationError("module id must not be empty");
    layout_->require_site(site);
    validate(descriptor);
    if (modules_.contains(module_id)) throw ValidationError("module '" + module_id + "' is already attached");
    if (auto who = occupant(site)) {
        throw ValidationError("site '" + site + "' already holds module '" + *who + "'");
    }
    modules_.emplace(module_id, AttachedModule{module_id, site, std::move(descriptor), {}, 25.0});
}

bool BusModel::detach(std::string_view module_id) {
    const auto it = modules_.find(module_id);
    if (it == modules_.end()) return false;
    modules_.erase(it);
    return true;
}

AttachedModule* BusModel::find_module(std::string_view module_id) {
    const auto it = modules_.find(module_id);
    return it == modules_.end() ? nullptr : &it->second;
}

const AttachedModule* BusModel::find_module(std::string_view module_id) const {
    const auto it = modules_.find(module_id);
    return it == modules_.end() ? nullptr : &it->second;
}

std::optional<std::string> BusModel::occupant(std::string_view site) const {
    for (const auto& [id, m] : modules_) {
        if (m.site == site) return id;
    }
    return std::nullopt;
}

void BusModel::inject_fault(LineFault fault) {
    validate(fault, *layout_);
    for (const auto& f : faults_) {
        if (f.id == fault.id) throw ValidationError("fault '" + fault.id + "' already exists");
    }
    faults_.push_back(std::move(fault));
    cache_.reset();
}

bool BusModel::clear_fault(std::string_view fault_id) {
    const auto it = std::find_if(faults_.begin(), faults_.end(),
                                 [&](const LineFault& f) { return f.id == fault_id; });
    if (it == faults_.end()) return false;
    faults_.erase(it);
    cache_.reset();
    return true;
}

void BusModel::set_bit_accurate(bool on, signal::LinkNoise noise) {
    bit_accurate_ = on;
    bit_noise_ = noise;
}

const BusModel::Cache& BusModel::cache() const {
    if (cache_) return *cache_;

    std::vector<OpenCut> cuts;
    for (const auto& f : faults_) {
        if (f.type == FaultType::Open) cuts.push_back({f.channel_a, f.span});
    }
    const ConductanceGraph graph(*layout_, cuts);
    const std::size_t hub = layout_->require_site(hub_);
    const std::size_t n_sites = layout_->sites().size();

    auto cache = std::make_shared<Cache>();
    cache->links.resize(n_sites);

    const Channel signal_channels[] = {Channel::SdaP, Channel::SdaN, Channel::SclP, Channel::SclN};
    std::array<std::optional<ResistanceTable>, kChannelCount> tables;
    for (auto c : signal_channels) tables[channel_slot(c)].emplace(graph.channel(c));

    for (std::size_t s = 0; s < n_sites; ++s) {
        SiteLink& link = cache->links[s];
        for (auto c : kAllChannels) {
            const ChannelNetwork& net = graph.channel(c);
            link.reachable[channel_slot(c)] = net.connected(net.site_node(hub), net.site_node(s));
        }
        if (!link.signals_reachable()) continue;

        const auto leg = [&](Channel c) {
            const ChannelNetwork& net = graph.channel(c);
            const std::size_t a = net.site_node(hub);
            const std::size_t b = net.site_node(s);
            return signal::LegPath{tables[channel_slot(c)]->between(a, b).value_or(0.0),
                                   net.path_length_m(a, b).value_or(0.0)};
        };
        link.sda = signal::PairPath{leg(Channel::SdaP), leg(Channel::SdaN)};
        link.scl = signal::PairPath{leg(Channel::SclP), leg(Channel::SclN)};
        link.sda_eye = signal::pair_eye(*link.sda, link_);
        link.scl_eye = signal::pair_eye(*link.scl, link_);

        // A short matters only where the conducting route to the hub crosses it.
        for (const auto& f : faults_) {
            if (f.type != FaultType::ShortAdjacent || link.shorted) continue;
            const std::size_t g = *layout_->group_index(f.span.group_id);
            for (auto c : {f.channel_a, f.channel_b}) {
                if (!is_signal_channel(c)) continue;
                const ChannelNetwork& net = graph.channel(c);
                const auto route = net.shortest_route(net.site_node(hub), net.site_node(s));
                if (!route) continue;
                for (std::size_t e : *route) {
                    if (net.edges()[e].overlaps(g, f.span.x_from_cm, f.span.x_to_cm)) link.shorted = true;
                }
            }
        }
    }
    cache_ = std::move(cache);
    return *cache_;
}

const SiteLink& BusModel::link(std::size_t site) const {
    const auto& links = cache().links;
    if (site >= links.size()) throw ValidationError("site index out of range");
    return links[site];
}

const SiteLink& BusModel::link(std::string_view site) const {
    return link(layout_->require_site(site));
}

std::string_view result_name(ResultKind r) {
    switch (r) {
        case ResultKind::Pending: return "pending";
        case ResultKind::Ack: return "ack";
        case ResultKind::NackAddr: return "nack_addr";
        case ResultKind::NackData: return "nack_data";
        case ResultKind::BusFault: return "bus_fault";
    }
    return "?";
}

std::string_view bus_fault_name(BusFaultKind k) {
    switch (k) {
        case BusFaultKind::None: return "none";
        case BusFaultKind::Short: return "short";
        case BusFaultKind::BitError: return "bit_error";
    }
    return "?";
}

Transaction read_request(std::uint8_t address, std::uint8_t reg, std::size_t length) {
    Transaction t;
    t.address = address;
    t.direction = Direction::Read;
    t.payload = {reg};
    t.read_length = length;
    return t;
}

Transaction write_request(std::uint8_t address, std::uint8_t reg, std::span<const std::uint8_t> data) {
    Transaction t;
    t.address = address;
    t.direction = Direction::Write;
    t.payload.reserve(data.size() + 1);
    t.payload.push_back(reg);
    for (auto b : data) t.payload.push_back(b);
    t.read_length = 0;
    return t;
}

std::vector<std::uint8_t> scan(const BusModel& bus) {
    std::vector<std::uint8_t> out;
    for (const auto& [id, m] : bus.modules()) {
        if (bus.link(m.site).responsive()) out.push_back(m.descriptor.address);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

void put_i16(std::map<std::uint8_t, std::uint8_t>& regs, std::uint8_t at, double value) {
    const long v = std::clamp(std::lround(value), -32768L, 32767L);
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
    regs[at] = static_cast<std::uint8_t>(u >> 8);
    regs[static_cast<std::uint8_t>(at + 1)] = static_cast<std::uint8_t>(u & 0xFF);
}

std::int16_t get_i16(const std::vector<std::uint8_t>& d, std::size_t at) {
    return static_cast<std::int16_t>(static_cast<std::uint16_t>((d[at] << 8) | d[at + 1]));
}

// Live sensor values are latched into the data registers just before a read.
void refresh_registers(AttachedModule& m) {
    auto& regs = m.descriptor.registers;
    if (m.descriptor.kind == ModuleKind::Imu) {
        for (int i = 0; i < 3; ++i) {
            const auto k = static_cast<std::uint8_t>(reg::kImuData + 2 * i);
            put_i16(regs, k, m.imu.accel_mps2[i] * reg::kAccelLsbPerMps2);
            put_i16(regs, static_cast<std::uint8_t>(k + 6), m.imu.gyro_dps[i] * reg::kGyroLsbPerDps);
            put_i16(regs, static_cast<std::uint8_t>(k + 12), m.imu.mag_ut[i] * reg::kMagLsbPerUt);
        }
    } else {
        put_i16(regs, reg::kTempData, temperature_to_counts(m.descriptor.sensor, m.temperature_c));
    }
}

Transaction finish(Transaction t, ResultKind r, BusFaultKind f = BusFaultKind::None) {
    t.result = r;
    t.fault = f;
    if (r != ResultKind::Ack) t.data.clear();
    return t;
}

}  // namespace

Transaction transact(BusModel& bus, Transaction t) {
    t.data.clear();
    std::vector<AttachedModule*> responders;
    bool short_on_path = false;
    for (auto& [id, m] : bus.modules_) {
        if (m.descriptor.address != t.address) continue;
        const SiteLink& link = bus.link(m.site);
        if (link.responsive()) {
            responders.push_back(&m);
        } else if (link.powered() && link.signals_reachable() && link.shorted) {
            short_on_path = true;
        }
    }
    if (responders.empty()) {
        return short_on_path ? finish(std::move(t), ResultKind::BusFault, BusFaultKind::Short)
                             : finish(std::move(t), ResultKind::NackAddr);
    }
    if (short_on_path) return finish(std::move(t), ResultKind::BusFault, BusFaultKind::Short);

    const bool is_read = t.direction == Direction::Read;
    if ((is_read && (t.read_length == 0 || t.payload.size() > 1)) || (!is_read && t.payload.empty())) {
        return finish(std::move(t), ResultKind::NackData);
    }
    const std::uint8_t ptr = t.payload.empty() ? 0 : t.payload[0];

    std::vector<std::uint8_t> data;
    if (is_read) {
        // Open-drain bus: simultaneous responders pull low together.
        data.assign(t.read_length, 0xFF);
        for (AttachedModule* m : responders) {
            refresh_registers(*m);
            const auto& regs = m->descriptor.registers;
            for (std::size_t i = 0; i < t.read_length; ++i) {
                const auto it = regs.find(static_cast<std::uint8_t>(ptr + i));
                if (ptr + i > 0xFF || it == regs.end()) return finish(std::move(t), ResultKind::NackData);
                data[i] &= it->second;
            }
        }
    } else {
        for (AttachedModule* m : responders) {
            for (std::size_t i = 1; i < t.payload.size(); ++i) {
                if (ptr + i - 1 > 0xFF || !m->descriptor.registers.contains(static_cast<std::uint8_t>(ptr + i - 1))) {
                    return finish(std::move(t), ResultKind::NackData);
                }
            }
        }
        for (AttachedModule* m : responders) {
            for (std::size_t i = 1; i < t.payload.size(); ++i) {
                m->descriptor.registers[static_cast<std::uint8_t>(ptr + i - 1)] = t.payload[i];
            }
        }
    }

    if (bus.bit_accurate_) {
        std::vector<std::uint8_t> frame{static_cast<std::uint8_t>((t.address << 1) | (is_read ? 1 : 0))};
        frame.insert(frame.end(), t.payload.begin(), t.payload.end());
        frame.insert(frame.end(), data.begin(), data.end());
        const auto bits = signal::bytes_to_bits(frame);
        signal::LinkNoise noise = bus.bit_noise_;
        noise.seed = derive_seed(noise.seed, fnv1a("frame"), bus.frames_sent_++);
        for (AttachedModule* m : responders) {
            const SiteLink& link = bus.link(m->site);
            const auto rx = signal::transfer_bits(bits, *link.sda, *link.scl, bus.link_config(), noise);
            if (rx.received != bits) return finish(std::move(t), ResultKind::BusFault, BusFaultKind::BitError);
        }
    }

    t.data = std::move(data);
    return finish(std::move(t), ResultKind::Ack);
}

std::vector<AddressConflict> detect_conflicts(const BusModel& bus) {
    std::map<std::uint8_t, std::vector<std::string>> by_address;
    for (const auto& [id, m] : bus.modules()) by_address[m.descriptor.address].push_back(m.site);
    std::vector<AddressConflict> out;
    for (auto& [addr, sites] : by_address) {
        if (sites.size() < 2) continue;
        std::sort(sites.begin(), sites.end());
        out.push_back({addr, std::move(sites)});
    }
    return out;
}

namespace {

template <typename T>
ReadResult<T> check_kind(const BusModel& bus, std::uint8_t address, ModuleKind kind) {
    for (const auto& [id, m] : bus.modules()) {
        if (m.descriptor.address == address && bus.link(m.site).responsive() && m.descriptor.kind != kind) {
            return {ReadStatus::WrongKind, {}};
        }
    }
    return {ReadStatus::Ok, {}};
}

ReadStatus status_of(const Transaction& t) {
    switch (t.result) {
        case ResultKind::Ack: return ReadStatus::Ok;
        case ResultKind::BusFault: return ReadStatus::BusFault;
        case ResultKind::NackData: return ReadStatus::WrongKind;
        default: return ReadStatus::NackAddr;
    }
}

}  // namespace

ReadResult<ImuSample> read_imu(BusModel& bus, std::uint8_t address) {
    auto r = check_kind<ImuSample>(bus, address, ModuleKind::Imu);
    if (!r.ok()) return r;
    const auto t = transact(bus, read_request(address, reg::kImuData, reg::kImuDataLength));
    r.status = status_of(t);
    if (!r.ok()) return r;
    for (int i = 0; i < 3; ++i) {
        r.value.accel_mps2[i] = get_i16(t.data, 2 * i) / reg::kAccelLsbPerMps2;
        r.value.gyro_dps[i] = get_i16(t.data, 6 + 2 * i) / reg::kGyroLsbPerDps;
        r.value.mag_ut[i] = get_i16(t.data, 12 + 2 * i) / reg::kMagLsbPerUt;
    }
    return r;
}

ReadResult<std::int32_t> read_temperature_raw(BusModel& bus, std::uint8_t address) {
    auto r = check_kind<std::int32_t>(bus, address, ModuleKind::Temperature);
    if (!r.ok()) return r;
    const auto t = transact(bus, read_request(address, reg::kTempData, 2));
    r.status = status_of(t);
    if (r.ok()) r.value = get_i16(t.data, 0);
    return r;
}

std::string transaction_log_jsonl(std::span<const TransactionRecord> log) {
    std::string out;
    for (const auto& rec : log) {
        const Transaction& t = rec.transaction;
        nlohmann::json j = {
            {"time_s", rec.time_s},
            {"address", t.address},
            {"direction", t.direction == Direction::Read ? "read" : "write"},
            {"payload", t.payload},
            {"result", std::string(result_name(t.result))},
        };
        if (t.direction == Direction::Read) j["read_length"] = t.read_length;
        if (t.result == ResultKind::BusFault) j["fault"] = std::string(bus_fault_name(t.fault));
        if (t.result == ResultKind::Ack) j["data"] = t.data;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace eknit::bus
