#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spamwall/source_filters.hpp"
#include "spamwall/stage.hpp"

namespace spamwall {

/// Merged configuration for every subsystem. Unknown keys are fatal at load
/// so filter tuning stays auditable; every field below is the documented default.
struct AppConfig {
    struct Dns {
        std::string zone_file;  // static zone; takes precedence over server
        std::string server;     // "ip:port" for the UDP client
        int timeout_ms = 2000;
        int retries = 1;
    } dns;

    struct Dnsbl {
        bool enabled = true;
        std::vector<BlocklistConfig> lists;  // from "name:zone[:weight]" triples
        int threshold = 1;
    } dnsbl;

    struct Surbl {
        bool enabled = true;
        std::vector<BlocklistConfig> lists;
        int threshold = 1;
        int max_domains = 10;
    } surbl;

    struct Rdns {
        bool enabled = true;
        bool reject_missing_ptr = true;
        bool reject_helo_mismatch = true;
    } rdns;

    struct Greylist {
        bool enabled = true;
        int64_t min_delay_secs = 10;
        int64_t max_window_secs = 12 * 3600;
        std::string path;  // empty: in-memory only
        int prune_days = 30;
    } greylist;

    struct Spf {
        bool enabled = true;
        bool reject_softfail = true;
        int max_dns = 10;
    } spf;

    struct Content {
        bool enabled = true;
        std::string rules_file;  // empty: built-in default rules
        std::string blocked_extensions = "exe,scr,pif,bat,com";
        bool block_double_extension = true;
        int64_t flag_size_min = 140 * 1024;
        int64_t flag_size_max = 180 * 1024;
    } content;

    struct Policy {
        bool enabled = true;
        int max_rcpt = 20;
        int64_t max_attachment_bytes = 10 * 1024 * 1024;
        int trap_retention_days = 30;
        std::set<std::string> group_ids;                              // lowercased addresses
        std::map<std::string, std::set<std::string>> group_allow;     // group -> senders
    } policy;

    struct Bayes {
        bool enabled = true;
        double threshold = 0.9;
        std::string dictionary;  // empty: stage passes everything
    } bayes;

    struct Pipeline {
        int64_t session_secs = 3 * 3600;
    } pipeline;

    struct Serve {
        std::string listen = "127.0.0.1:2525";
        int64_t max_data_bytes = 1024 * 1024;
        std::string inbox_dir = "inbox";
        std::string trap_dir = "trap";
    } serve;

    struct Guard {
        int window_secs = 60;
        int storm_windows = 3;
        int queue_capacity = 1000;
        double queue_fraction = 0.8;
        double latency_factor = 3.0;
        double latency_baseline_ms = 50.0;
        bool auto_mitigate = false;
        std::string alias_path = "aliases.tsv";
        std::string alerts_path = "alerts.log";
        std::string quarantine_path = "quarantine.txt";
        std::string remap_mode = "bounce";  // or "drop"
    } guard;

    struct Sim {
        int users = 200;
        int groups = 20;
        double p_exec = 0.5;
        int server_capacity = 50;
        int queue_limit = 500;
        int duration_minutes = 900;
        int session_minutes = 180;
        int spam_rate = 10;
        double spam_url_fraction = 0.6;
        std::set<Stage> defenses;  // parsed from "all", "none" or stage names
        uint64_t seed = 42;
        int seed_infections = 1;
        std::optional<std::pair<int, int>> surbl_off_sessions;  // 1-based inclusive
        int mitigate_minute = -1;                               // <0: never
    } sim;

    AppConfig();  // sets sim.defenses to all stages
};

/// Loads INI-style "key = value" sections. Unknown keys, malformed values and
/// out-of-range settings all fail with the offending key in the message.
std::optional<AppConfig> load_config_file(const std::string& path, std::string* err = nullptr);
std::optional<AppConfig> parse_config(std::string_view text, std::string* err = nullptr);

/// Applies one "section.key=value" override on top of a loaded config.
bool apply_config_override(AppConfig& cfg, std::string_view assignment, std::string* err = nullptr);

std::optional<std::vector<BlocklistConfig>> parse_blocklists(std::string_view value,
                                                             BlocklistKind kind,
                                                             std::string* err = nullptr);
std::optional<std::set<Stage>> parse_stage_set(std::string_view value, std::string* err = nullptr);

}  // namespace spamwall
