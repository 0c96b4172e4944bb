#include "spamwall/greylist.hpp"

#include <charconv>

#include "spamwall/util.hpp"

namespace spamwall {

namespace {

void apply_event(std::map<GreylistKey, GreylistEntry>& entries, int64_t epoch,
                 std::string_view kind, const GreylistKey& key) {
    if (kind == "PENDING") {
        entries[key] = GreylistEntry{GreylistState::Pending, epoch, epoch, 0};
    } else if (kind == "CONFIRMED") {
        auto it = entries.find(key);
        if (it == entries.end())
            it = entries.emplace(key, GreylistEntry{GreylistState::Pending, epoch, epoch, 0}).first;
        GreylistEntry& e = it->second;
        e.state = GreylistState::Confirmed;
        e.last_seen = epoch;
        e.pass_count += 1;
    } else if (kind == "RESET") {
        auto& e = entries[key];
        e.state = GreylistState::Pending;
        e.first_seen = epoch;
        e.last_seen = epoch;
    }
}

}  // namespace

std::map<GreylistKey, GreylistEntry> GreylistStore::replay_file(const std::filesystem::path& path) {
    std::map<GreylistKey, GreylistEntry> entries;
    std::ifstream in(path);
    if (!in) return entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 5) continue;  // tolerate torn writes
        int64_t epoch = 0;
        auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), epoch);
        if (ec != std::errc{} || p != fields[0].data() + fields[0].size()) continue;
        apply_event(entries, epoch, fields[1], GreylistKey{fields[2], fields[3], fields[4]});
    }
    return entries;
}

bool GreylistStore::open(const std::filesystem::path& path, int64_t now, int prune_days,
                         std::string* err) {
    std::lock_guard lock(mu_);
    entries_ = replay_file(path);
    // Confirmed entries expire after prune_days of inactivity.
    int64_t cutoff = now - static_cast<int64_t>(prune_days) * 86400;
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (it->second.state == GreylistState::Confirmed && it->second.last_seen < cutoff)
            it = entries_.erase(it);
        else
            ++it;
    }
    log_.open(path, std::ios::app);
    if (!log_) {
        if (err) *err = "cannot open greylist log " + path.string();
        return false;
    }
    path_ = path;
    persistent_ = true;
    return true;
}

bool GreylistStore::append_line(int64_t epoch, const char* kind, const GreylistKey& key) {
    if (fail_appends_) return false;
    if (!persistent_) return true;
    log_ << epoch << '\t' << kind << '\t' << key.client_ip << '\t' << key.sender << '\t'
         << key.recipient << '\n';
    log_.flush();
    return static_cast<bool>(log_);
}

GreylistResult GreylistStore::check(const GreylistKey& key, int64_t now, int64_t min_delay_secs,
                                    int64_t max_window_secs) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        entries_[key] = GreylistEntry{GreylistState::Pending, now, now, 0};
        bool ok = append_line(now, "PENDING", key);
        return {GreylistDecision::TempReject, ok};
    }
    GreylistEntry& e = it->second;
    if (e.state == GreylistState::Confirmed) {
        e.pass_count += 1;
        e.last_seen = now;
        bool ok = append_line(now, "CONFIRMED", key);
        return {GreylistDecision::Accept, ok};
    }
    int64_t age = now - e.first_seen;
    if (age < min_delay_secs) return {GreylistDecision::TempReject, true};  // no state change
    if (age > max_window_secs) {
        e.first_seen = now;
        e.last_seen = now;
        bool ok = append_line(now, "RESET", key);
        return {GreylistDecision::TempReject, ok};
    }
    e.state = GreylistState::Confirmed;
    e.pass_count = 1;
    e.last_seen = now;
    bool ok = append_line(now, "CONFIRMED", key);
    return {GreylistDecision::Accept, ok};
}

std::optional<GreylistEntry> GreylistStore::lookup(const GreylistKey& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::map<GreylistKey, GreylistEntry> GreylistStore::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

size_t GreylistStore::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

bool GreylistStore::compact(std::string* err) {
    std::lock_guard lock(mu_);
    if (!persistent_) return true;
    log_.close();
    auto tmp = path_;
    tmp += ".compact";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            if (err) *err = "cannot write " + tmp.string();
            log_.open(path_, std::ios::app);
            return false;
        }
        for (const auto& [key, e] : entries_) {
            out << e.first_seen << "\tPENDING\t" << key.client_ip << '\t' << key.sender << '\t'
                << key.recipient << '\n';
            if (e.state == GreylistState::Confirmed)
                out << e.last_seen << "\tCONFIRMED\t" << key.client_ip << '\t' << key.sender
                    << '\t' << key.recipient << '\n';
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path_, ec);
    log_.open(path_, std::ios::app);
    if (ec) {
        if (err) *err = "compaction rename failed: " + ec.message();
        return false;
    }
    return static_cast<bool>(log_);
}

}  // namespace spamwall
