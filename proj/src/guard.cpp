#include "spamwall/guard.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace spamwall {

const char* alert_kind_name(AlertKind k) {
    switch (k) {
        case AlertKind::GroupMailStorm: return "group-mail-storm";
        case AlertKind::QueueSaturation: return "queue-saturation";
        case AlertKind::LatencyDegradation: return "latency-degradation";
    }
    return "?";
}

void Monitor::close_window(std::vector<Alert>& out) {
    if (window_.index < 0) return;
    int64_t window_end = (window_.index + 1) * cfg_.window_secs;
    if (window_.queue_seen &&
        window_.min_queue_depth > cfg_.queue_fraction * cfg_.queue_capacity) {
        out.push_back(Alert{AlertKind::QueueSaturation, "server",
                            "queue depth held above " +
                                std::to_string(static_cast<int>(cfg_.queue_fraction * 100)) +
                                "% of capacity for a full window",
                            window_end});
    }
    if (window_.latency_count > 0) {
        double mean = window_.latency_sum / static_cast<double>(window_.latency_count);
        if (mean > cfg_.latency_baseline_ms * cfg_.latency_factor) {
            out.push_back(Alert{AlertKind::LatencyDegradation, "pipeline",
                                "mean latency " + std::to_string(mean) + " ms vs baseline " +
                                    std::to_string(cfg_.latency_baseline_ms) + " ms",
                                window_end});
        }
    }
}

void Monitor::roll_to(int64_t window_index, std::vector<Alert>& out) {
    if (window_index == window_.index) return;
    close_window(out);
    window_ = WindowState{};
    window_.index = window_index;
    window_.counts.index = window_index;
}

std::vector<Alert> Monitor::observe(const TrafficEvent& event) {
    std::lock_guard lock(mu_);
    std::vector<Alert> out;
    int64_t idx = event.ts / cfg_.window_secs;
    roll_to(idx, out);

    window_.queue_seen = true;
    window_.min_queue_depth = std::min(window_.min_queue_depth, event.queue_depth);
    window_.latency_sum += event.latency_ms;
    window_.latency_count += 1;
    window_.counts.queue_depth = event.queue_depth;
    if (!event.sender.empty()) {
        window_.counts.per_sender[event.sender] += 1;
        if (event.to_group) window_.counts.per_sender_group[event.sender] += 1;
    }

    if (event.to_group && !event.sender.empty()) {
        auto& s = senders_[event.sender];
        if (s.last_group_window != idx) {
            s.consecutive = (s.last_group_window == idx - 1) ? s.consecutive + 1 : 1;
            s.last_group_window = idx;
        }
        if (s.consecutive >= cfg_.storm_windows && s.alerted_window != idx) {
            s.alerted_window = idx;
            out.push_back(Alert{AlertKind::GroupMailStorm, event.sender,
                                "group mail in " + std::to_string(s.consecutive) +
                                    " consecutive windows",
                                event.ts});
        }
    }
    return out;
}

std::vector<Alert> Monitor::flush(int64_t now) {
    std::lock_guard lock(mu_);
    std::vector<Alert> out;
    roll_to(now / cfg_.window_secs, out);
    return out;
}

TrafficWindow Monitor::current_window() const {
    std::lock_guard lock(mu_);
    return window_.counts;
}

std::string remapped_local_part(const std::string& local) {
    static const std::vector<std::string> kSuffixes = {"admins", "users", "staff",
                                                       "group",  "team",  "dept", "list"};
    std::string lower = to_lower(local);
    for (const auto& suffix : kSuffixes) {
        if (lower.size() > suffix.size() &&
            lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return local.substr(0, local.size() - suffix.size()) + "_" +
                   local.substr(local.size() - suffix.size());
        }
    }
    return local + "_";
}

RemapOutcome AliasTable::remap(const EmailAddress& old_address, int64_t now, AliasMode mode) {
    std::string old_key = old_address.key();
    if (entries_.count(old_key) || new_addresses_.count(old_key))
        return {false, "", "already remapped"};

    EmailAddress candidate{remapped_local_part(old_address.local_part), old_address.domain};
    while (entries_.count(candidate.key()) || new_addresses_.count(candidate.key()) ||
           candidate.key() == old_key)
        candidate.local_part += "_";

    std::string new_key = candidate.key();
    entries_[old_key] = AliasEntry{new_key, now, mode};
    new_addresses_.insert(new_key);
    return {true, new_key, ""};
}

std::optional<AliasEntry> AliasTable::lookup(const std::string& old_address_key) const {
    auto it = entries_.find(to_lower(old_address_key));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool AliasTable::acyclic() const {
    for (const auto& [old_key, entry] : entries_)
        if (entries_.count(entry.new_address)) return false;
    return true;
}

bool AliasTable::load(const std::filesystem::path& path, std::string* err) {
    entries_.clear();
    new_addresses_.clear();
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open alias table " + path.string();
        return false;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 4) continue;
        int64_t epoch = 0;
        if (std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), epoch).ec !=
            std::errc{})
            continue;
        AliasMode mode = fields[3] == "drop" ? AliasMode::SilentDropOld : AliasMode::BounceOld;
        std::string old_key = to_lower(fields[0]);
        std::string new_key = to_lower(fields[1]);
        entries_[old_key] = AliasEntry{new_key, epoch, mode};
        new_addresses_.insert(new_key);
    }
    return true;
}

bool AliasTable::save(const std::filesystem::path& path, std::string* err) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        if (err) *err = "cannot write alias table " + path.string();
        return false;
    }
    for (const auto& [old_key, entry] : entries_)
        out << old_key << '\t' << entry.new_address << '\t' << entry.remapped_at << '\t'
            << (entry.mode == AliasMode::SilentDropOld ? "drop" : "bounce") << '\n';
    return static_cast<bool>(out);
}

bool GuardState::quarantine_host(Ipv4 ip) {
    std::lock_guard lock(mu_);
    return quarantined_.insert(ip.value).second;
}

bool GuardState::release_host(Ipv4 ip) {
    std::lock_guard lock(mu_);
    return quarantined_.erase(ip.value) > 0;
}

bool GuardState::is_quarantined(Ipv4 ip) const {
    std::lock_guard lock(mu_);
    return quarantined_.count(ip.value) > 0;
}

std::vector<Ipv4> GuardState::quarantined_hosts() const {
    std::lock_guard lock(mu_);
    std::vector<Ipv4> out;
    for (uint32_t v : quarantined_) out.push_back(Ipv4{v});
    return out;
}

RemapOutcome GuardState::remap_group(const EmailAddress& old_address, int64_t now,
                                     AliasMode mode) {
    std::lock_guard lock(mu_);
    return aliases_.remap(old_address, now, mode);
}

std::optional<AliasEntry> GuardState::alias_for(const std::string& old_address_key) const {
    std::lock_guard lock(mu_);
    return aliases_.lookup(old_address_key);
}

bool GuardState::load(const std::filesystem::path& quarantine_path,
                      const std::filesystem::path& alias_path, std::string* err) {
    std::lock_guard lock(mu_);
    quarantined_.clear();
    if (std::filesystem::exists(quarantine_path)) {
        std::ifstream in(quarantine_path);
        if (!in) {
            if (err) *err = "cannot open " + quarantine_path.string();
            return false;
        }
        std::string line;
        while (std::getline(in, line)) {
            auto fields = split(trim(line), '\t');
            if (fields.empty()) continue;
            if (auto ip = Ipv4::parse(fields[0])) quarantined_.insert(ip->value);
        }
    }
    if (std::filesystem::exists(alias_path)) return aliases_.load(alias_path, err);
    return true;
}

bool GuardState::save(const std::filesystem::path& quarantine_path,
                      const std::filesystem::path& alias_path, std::string* err) const {
    std::lock_guard lock(mu_);
    std::ofstream out(quarantine_path, std::ios::trunc);
    if (!out) {
        if (err) *err = "cannot write " + quarantine_path.string();
        return false;
    }
    for (uint32_t v : quarantined_) out << Ipv4{v}.to_string() << '\n';
    if (!out) {
        if (err) *err = "cannot write " + quarantine_path.string();
        return false;
    }
    return aliases_.save(alias_path, err);
}

bool append_alerts(const std::filesystem::path& path, const std::vector<Alert>& alerts) {
    if (alerts.empty()) return true;
    std::ofstream out(path, std::ios::app);
    if (!out) return false;
    for (const auto& a : alerts)
        out << a.raised_at << '\t' << alert_kind_name(a.kind) << '\t' << a.subject << '\t'
            << a.evidence << '\n';
    return static_cast<bool>(out);
}

std::vector<Alert> load_alerts(const std::filesystem::path& path) {
    std::vector<Alert> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        auto fields = split(line, '\t');
        if (fields.size() != 4) continue;
        Alert a;
        if (std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a.raised_at)
                .ec != std::errc{})
            continue;
        if (fields[1] == alert_kind_name(AlertKind::QueueSaturation))
            a.kind = AlertKind::QueueSaturation;
        else if (fields[1] == alert_kind_name(AlertKind::LatencyDegradation))
            a.kind = AlertKind::LatencyDegradation;
        else
            a.kind = AlertKind::GroupMailStorm;
        a.subject = fields[2];
        a.evidence = fields[3];
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace spamwall
