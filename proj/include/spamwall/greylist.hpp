#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace spamwall {

struct GreylistKey {
    std::string client_ip;
    std::string sender;     // lowercased address
    std::string recipient;  // lowercased address

    auto operator<=>(const GreylistKey&) const = default;
};

enum class GreylistState { Pending, Confirmed };
enum class GreylistDecision { TempReject, Accept };

struct GreylistEntry {
    GreylistState state = GreylistState::Pending;
    int64_t first_seen = 0;
    int64_t last_seen = 0;
    uint32_t pass_count = 0;

    bool operator==(const GreylistEntry&) const = default;
};

struct GreylistResult {
    GreylistDecision decision = GreylistDecision::TempReject;
    bool store_ok = true;  // false on log I/O failure; the pipeline degrades open
};

/// Triplet store with an append-only transition log:
///   "<epoch>\t<PENDING|CONFIRMED|RESET>\t<ip>\t<sender>\t<recipient>"
/// State is reconstructed by replay at startup. All mutations are serialized
/// behind one mutex, which subsumes the single-writer-per-key contract.
class GreylistStore {
public:
    GreylistStore() = default;  // memory-only store

    /// Opens (creating if needed) the log, replays it, prunes confirmed
    /// entries inactive longer than prune_days.
    bool open(const std::filesystem::path& path, int64_t now, int prune_days = 30,
              std::string* err = nullptr);

    GreylistResult check(const GreylistKey& key, int64_t now, int64_t min_delay_secs = 10,
                         int64_t max_window_secs = 12 * 3600);

    std::optional<GreylistEntry> lookup(const GreylistKey& key) const;
    std::map<GreylistKey, GreylistEntry> snapshot() const;
    size_t size() const;

    /// Rewrites the log to just the live set. first_seen/last_seen/state are
    /// preserved exactly; pass_count collapses to 1 for confirmed entries.
    bool compact(std::string* err = nullptr);

    /// Pure replay of a log file (no store needed); used at open() and by tests.
    static std::map<GreylistKey, GreylistEntry> replay_file(const std::filesystem::path& path);

    /// Failure injection: makes every append report an I/O error.
    void set_fail_appends(bool fail) { fail_appends_ = fail; }

private:
    bool append_line(int64_t epoch, const char* kind, const GreylistKey& key);

    mutable std::mutex mu_;
    std::map<GreylistKey, GreylistEntry> entries_;
    std::ofstream log_;
    std::filesystem::path path_;
    bool persistent_ = false;
    bool fail_appends_ = false;
};

}  // namespace spamwall
