#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spamwall/message.hpp"
#include "spamwall/util.hpp"

namespace spamwall {

enum class AlertKind { GroupMailStorm, QueueSaturation, LatencyDegradation };

const char* alert_kind_name(AlertKind k);

struct Alert {
    AlertKind kind = AlertKind::GroupMailStorm;
    std::string subject;  // sender or host the alert is about
    std::string evidence;
    int64_t raised_at = 0;
};

struct MonitorConfig {
    int window_secs = 60;
    int storm_windows = 3;  // consecutive windows of group mail before alerting
    int queue_capacity = 1000;
    double queue_fraction = 0.8;
    double latency_factor = 3.0;
    double latency_baseline_ms = 50.0;
};

struct TrafficEvent {
    int64_t ts = 0;
    std::string sender;  // lowercased address
    bool to_group = false;
    double latency_ms = 0.0;
    int queue_depth = 0;
};

struct TrafficWindow {
    int64_t index = -1;  // window number (ts / width)
    std::map<std::string, int> per_sender;
    std::map<std::string, int> per_sender_group;  // messages addressed to a group id
    int queue_depth = 0;                          // last observed gauge value
};

/// Sliding-window traffic metrics. Windows advance by whole widths; alerts are
/// debounced to one per (kind, subject) per window.
class Monitor {
public:
    explicit Monitor(MonitorConfig cfg) : cfg_(cfg) {}

    std::vector<Alert> observe(const TrafficEvent& event);
    /// Closes every window ending at or before now.
    std::vector<Alert> flush(int64_t now);
    /// Counters of the window currently being filled.
    TrafficWindow current_window() const;

private:
    struct SenderState {
        int64_t last_group_window = -1;
        int consecutive = 0;
        int64_t alerted_window = -1;
    };
    struct WindowState {
        int64_t index = -1;
        TrafficWindow counts;
        int min_queue_depth = INT32_MAX;
        bool queue_seen = false;
        double latency_sum = 0.0;
        uint64_t latency_count = 0;
    };

    void close_window(std::vector<Alert>& out);
    void roll_to(int64_t window_index, std::vector<Alert>& out);

    MonitorConfig cfg_;
    mutable std::mutex mu_;
    std::map<std::string, SenderState> senders_;
    WindowState window_;
};

enum class AliasMode { BounceOld, SilentDropOld };

struct AliasEntry {
    std::string new_address;  // lowercased
    int64_t remapped_at = 0;
    AliasMode mode = AliasMode::BounceOld;
};

struct RemapOutcome {
    bool ok = false;
    std::string new_address;
    std::string error;  // "already remapped" when ok is false
};

/// old-address -> replacement map; no chains (a new address never reappears
/// as an old key), enforced at remap time.
class AliasTable {
public:
    RemapOutcome remap(const EmailAddress& old_address, int64_t now,
                       AliasMode mode = AliasMode::BounceOld);
    std::optional<AliasEntry> lookup(const std::string& old_address_key) const;
    bool empty() const { return entries_.empty(); }
    const std::map<std::string, AliasEntry>& entries() const { return entries_; }
    /// True when no new address appears as an old key (walked, for tests).
    bool acyclic() const;

    /// Lines: "<old>\t<new>\t<epoch>\t<bounce|drop>".
    bool load(const std::filesystem::path& path, std::string* err = nullptr);
    bool save(const std::filesystem::path& path, std::string* err = nullptr) const;

private:
    std::map<std::string, AliasEntry> entries_;
    std::set<std::string> new_addresses_;
};

/// Local "_"-splitting rule for remapped group names: allstaff -> all_staff,
/// sales -> sales_.
std::string remapped_local_part(const std::string& local);

/// Mutable mitigation state the pipeline consults ahead of every filter stage.
class GuardState {
public:
    bool quarantine_host(Ipv4 ip);  // idempotent; true when newly added
    bool release_host(Ipv4 ip);
    bool is_quarantined(Ipv4 ip) const;
    std::vector<Ipv4> quarantined_hosts() const;

    RemapOutcome remap_group(const EmailAddress& old_address, int64_t now, AliasMode mode);
    std::optional<AliasEntry> alias_for(const std::string& old_address_key) const;
    const AliasTable& aliases() const { return aliases_; }

    bool load(const std::filesystem::path& quarantine_path,
              const std::filesystem::path& alias_path, std::string* err = nullptr);
    bool save(const std::filesystem::path& quarantine_path,
              const std::filesystem::path& alias_path, std::string* err = nullptr) const;

private:
    mutable std::mutex mu_;
    std::set<uint32_t> quarantined_;
    AliasTable aliases_;
};

/// Appends "<epoch>\t<kind>\t<subject>\t<evidence>" lines.
bool append_alerts(const std::filesystem::path& path, const std::vector<Alert>& alerts);
std::vector<Alert> load_alerts(const std::filesystem::path& path);

}  // namespace spamwall
