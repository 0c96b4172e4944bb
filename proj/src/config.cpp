#include "spamwall/config.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "spamwall/message.hpp"

namespace spamwall {

std::optional<Stage> stage_from_name(std::string_view name) {
    for (Stage s : kStageOrder)
        if (name == stage_name(s)) return s;
    return std::nullopt;
}

AppConfig::AppConfig() {
    for (Stage s : kStageOrder) sim.defenses.insert(s);
}

std::optional<std::vector<BlocklistConfig>> parse_blocklists(std::string_view value,
                                                             BlocklistKind kind,
                                                             std::string* err) {
    std::vector<BlocklistConfig> lists;
    for (const auto& item : split(value, ',')) {
        std::string entry = trim(item);
        if (entry.empty()) continue;
        auto fields = split(entry, ':');
        if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
            if (err) *err = "expected name:zone[:weight], got \"" + entry + "\"";
            return std::nullopt;
        }
        BlocklistConfig cfg;
        cfg.name = fields[0];
        cfg.zone = to_lower(fields[1]);
        cfg.kind = kind;
        if (fields.size() == 3) {
            auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(),
                                           cfg.weight);
            if (ec != std::errc{} || p != fields[2].data() + fields[2].size() || cfg.weight < 1) {
                if (err) *err = "list weight must be a positive integer: \"" + entry + "\"";
                return std::nullopt;
            }
        }
        lists.push_back(std::move(cfg));
    }
    return lists;
}

std::optional<std::set<Stage>> parse_stage_set(std::string_view value, std::string* err) {
    std::set<Stage> stages;
    std::string text = to_lower(trim(value));
    if (text == "all") {
        for (Stage s : kStageOrder) stages.insert(s);
        return stages;
    }
    if (text == "none" || text.empty()) return stages;
    for (const auto& item : split(text, ',')) {
        auto s = stage_from_name(trim(item));
        if (!s) {
            if (err) *err = "unknown stage \"" + trim(item) + "\"";
            return std::nullopt;
        }
        stages.insert(*s);
    }
    return stages;
}

namespace {

bool parse_bool(const std::string& v, bool& out) {
    std::string s = to_lower(trim(v));
    if (s == "true" || s == "yes" || s == "on" || s == "1") { out = true; return true; }
    if (s == "false" || s == "no" || s == "off" || s == "0") { out = false; return true; }
    return false;
}

template <typename T>
bool parse_int(const std::string& v, T& out) {
    std::string s = trim(v);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(const std::string& v, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(trim(v), &pos);
        return pos == trim(v).size();
    } catch (...) {
        return false;
    }
}

bool set_group_ids(AppConfig& c, const std::string& v, std::string* err) {
    c.policy.group_ids.clear();
    for (const auto& item : split(v, ',')) {
        std::string addr = trim(item);
        if (addr.empty()) continue;
        auto parsed = EmailAddress::parse(addr);
        if (!parsed) {
            if (err) *err = "not an email address: \"" + addr + "\"";
            return false;
        }
        c.policy.group_ids.insert(parsed->key());
    }
    return true;
}

bool set_sessions_range(AppConfig& c, const std::string& v, std::string* err) {
    std::string s = trim(v);
    if (s.empty()) {
        c.sim.surbl_off_sessions.reset();
        return true;
    }
    auto parts = split(s, '-');
    int lo = 0, hi = 0;
    if (parts.size() == 1 && parse_int(parts[0], lo)) hi = lo;
    else if (parts.size() == 2 && parse_int(parts[0], lo) && parse_int(parts[1], hi)) {
    } else {
        if (err) *err = "expected <n> or <lo>-<hi>, got \"" + v + "\"";
        return false;
    }
    if (lo < 1 || hi < lo) {
        if (err) *err = "session range must be 1-based and ordered";
        return false;
    }
    c.sim.surbl_off_sessions = std::make_pair(lo, hi);
    return true;
}

using FieldRef = std::function<bool(AppConfig&, const std::string&, std::string*)>;

std::map<std::string, FieldRef> build_table() {
    std::map<std::string, FieldRef> t;

    auto add_bool = [&](const char* key, auto accessor) {
        t[key] = [accessor](AppConfig& c, const std::string& v, std::string* err) {
            if (!parse_bool(v, accessor(c))) {
                if (err) *err = "expected a boolean, got \"" + v + "\"";
                return false;
            }
            return true;
        };
    };
    auto add_int = [&](const char* key, auto accessor, int64_t min_value) {
        t[key] = [accessor, min_value](AppConfig& c, const std::string& v, std::string* err) {
            auto& field = accessor(c);
            if (!parse_int(v, field) || static_cast<int64_t>(field) < min_value) {
                if (err) *err = "expected an integer >= " + std::to_string(min_value);
                return false;
            }
            return true;
        };
    };
    auto add_double = [&](const char* key, auto accessor, double lo, double hi) {
        t[key] = [accessor, lo, hi](AppConfig& c, const std::string& v, std::string* err) {
            auto& field = accessor(c);
            if (!parse_double(v, field) || field < lo || field > hi) {
                if (err) *err = "expected a number in [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]";
                return false;
            }
            return true;
        };
    };
    auto add_string = [&](const char* key, auto accessor) {
        t[key] = [accessor](AppConfig& c, const std::string& v, std::string*) {
            accessor(c) = trim(v);
            return true;
        };
    };

    add_string("dns.zone_file", [](AppConfig& c) -> std::string& { return c.dns.zone_file; });
    add_string("dns.server", [](AppConfig& c) -> std::string& { return c.dns.server; });
    add_int("dns.timeout_ms", [](AppConfig& c) -> int& { return c.dns.timeout_ms; }, 1);
    add_int("dns.retries", [](AppConfig& c) -> int& { return c.dns.retries; }, 0);

    add_bool("dnsbl.enabled", [](AppConfig& c) -> bool& { return c.dnsbl.enabled; });
    t["dnsbl.lists"] = [](AppConfig& c, const std::string& v, std::string* err) {
        auto lists = parse_blocklists(v, BlocklistKind::IpList, err);
        if (!lists) return false;
        c.dnsbl.lists = std::move(*lists);
        return true;
    };
    add_int("dnsbl.threshold", [](AppConfig& c) -> int& { return c.dnsbl.threshold; }, 1);

    add_bool("surbl.enabled", [](AppConfig& c) -> bool& { return c.surbl.enabled; });
    t["surbl.lists"] = [](AppConfig& c, const std::string& v, std::string* err) {
        auto lists = parse_blocklists(v, BlocklistKind::DomainList, err);
        if (!lists) return false;
        c.surbl.lists = std::move(*lists);
        return true;
    };
    add_int("surbl.threshold", [](AppConfig& c) -> int& { return c.surbl.threshold; }, 1);
    add_int("surbl.max_domains", [](AppConfig& c) -> int& { return c.surbl.max_domains; }, 1);

    add_bool("rdns.enabled", [](AppConfig& c) -> bool& { return c.rdns.enabled; });
    add_bool("rdns.reject_missing_ptr",
             [](AppConfig& c) -> bool& { return c.rdns.reject_missing_ptr; });
    add_bool("rdns.reject_helo_mismatch",
             [](AppConfig& c) -> bool& { return c.rdns.reject_helo_mismatch; });

    add_bool("greylist.enabled", [](AppConfig& c) -> bool& { return c.greylist.enabled; });
    add_int("greylist.min_delay_secs",
            [](AppConfig& c) -> int64_t& { return c.greylist.min_delay_secs; }, 0);
    add_int("greylist.max_window_secs",
            [](AppConfig& c) -> int64_t& { return c.greylist.max_window_secs; }, 1);
    add_string("greylist.path", [](AppConfig& c) -> std::string& { return c.greylist.path; });
    add_int("greylist.prune_days", [](AppConfig& c) -> int& { return c.greylist.prune_days; }, 1);

    add_bool("spf.enabled", [](AppConfig& c) -> bool& { return c.spf.enabled; });
    add_bool("spf.reject_softfail", [](AppConfig& c) -> bool& { return c.spf.reject_softfail; });
    add_int("spf.max_dns", [](AppConfig& c) -> int& { return c.spf.max_dns; }, 1);

    add_bool("content.enabled", [](AppConfig& c) -> bool& { return c.content.enabled; });
    add_string("content.rules_file",
               [](AppConfig& c) -> std::string& { return c.content.rules_file; });
    add_string("content.blocked_extensions",
               [](AppConfig& c) -> std::string& { return c.content.blocked_extensions; });
    add_bool("content.block_double_extension",
             [](AppConfig& c) -> bool& { return c.content.block_double_extension; });
    add_int("content.flag_size_min",
            [](AppConfig& c) -> int64_t& { return c.content.flag_size_min; }, 0);
    add_int("content.flag_size_max",
            [](AppConfig& c) -> int64_t& { return c.content.flag_size_max; }, 0);

    add_bool("policy.enabled", [](AppConfig& c) -> bool& { return c.policy.enabled; });
    add_int("policy.max_rcpt", [](AppConfig& c) -> int& { return c.policy.max_rcpt; }, 1);
    add_int("policy.max_attachment_bytes",
            [](AppConfig& c) -> int64_t& { return c.policy.max_attachment_bytes; }, 1);
    add_int("policy.trap_retention_days",
            [](AppConfig& c) -> int& { return c.policy.trap_retention_days; }, 1);
    t["policy.group_ids"] = set_group_ids;

    add_bool("bayes.enabled", [](AppConfig& c) -> bool& { return c.bayes.enabled; });
    add_double("bayes.threshold", [](AppConfig& c) -> double& { return c.bayes.threshold; }, 0.0,
               1.0);
    add_string("bayes.dictionary", [](AppConfig& c) -> std::string& { return c.bayes.dictionary; });

    add_int("pipeline.session_secs",
            [](AppConfig& c) -> int64_t& { return c.pipeline.session_secs; }, 1);

    add_string("serve.listen", [](AppConfig& c) -> std::string& { return c.serve.listen; });
    add_int("serve.max_data_bytes",
            [](AppConfig& c) -> int64_t& { return c.serve.max_data_bytes; }, 1);
    add_string("serve.inbox_dir", [](AppConfig& c) -> std::string& { return c.serve.inbox_dir; });
    add_string("serve.trap_dir", [](AppConfig& c) -> std::string& { return c.serve.trap_dir; });

    add_int("guard.window_secs", [](AppConfig& c) -> int& { return c.guard.window_secs; }, 1);
    add_int("guard.storm_windows", [](AppConfig& c) -> int& { return c.guard.storm_windows; }, 1);
    add_int("guard.queue_capacity", [](AppConfig& c) -> int& { return c.guard.queue_capacity; }, 1);
    add_double("guard.queue_fraction",
               [](AppConfig& c) -> double& { return c.guard.queue_fraction; }, 0.0, 1.0);
    add_double("guard.latency_factor",
               [](AppConfig& c) -> double& { return c.guard.latency_factor; }, 1.0, 1e9);
    add_double("guard.latency_baseline_ms",
               [](AppConfig& c) -> double& { return c.guard.latency_baseline_ms; }, 0.0, 1e9);
    add_bool("guard.auto_mitigate", [](AppConfig& c) -> bool& { return c.guard.auto_mitigate; });
    add_string("guard.alias_path", [](AppConfig& c) -> std::string& { return c.guard.alias_path; });
    add_string("guard.alerts_path",
               [](AppConfig& c) -> std::string& { return c.guard.alerts_path; });
    add_string("guard.quarantine_path",
               [](AppConfig& c) -> std::string& { return c.guard.quarantine_path; });
    t["guard.remap_mode"] = [](AppConfig& c, const std::string& v, std::string* err) {
        std::string mode = to_lower(trim(v));
        if (mode != "bounce" && mode != "drop") {
            if (err) *err = "remap_mode must be bounce or drop";
            return false;
        }
        c.guard.remap_mode = mode;
        return true;
    };

    add_int("sim.users", [](AppConfig& c) -> int& { return c.sim.users; }, 1);
    add_int("sim.groups", [](AppConfig& c) -> int& { return c.sim.groups; }, 1);
    add_double("sim.p_exec", [](AppConfig& c) -> double& { return c.sim.p_exec; }, 0.0, 1.0);
    add_int("sim.server_capacity", [](AppConfig& c) -> int& { return c.sim.server_capacity; }, 1);
    add_int("sim.queue_limit", [](AppConfig& c) -> int& { return c.sim.queue_limit; }, 1);
    add_int("sim.duration_minutes", [](AppConfig& c) -> int& { return c.sim.duration_minutes; }, 1);
    add_int("sim.session_minutes", [](AppConfig& c) -> int& { return c.sim.session_minutes; }, 1);
    add_int("sim.spam_rate", [](AppConfig& c) -> int& { return c.sim.spam_rate; }, 0);
    add_double("sim.spam_url_fraction",
               [](AppConfig& c) -> double& { return c.sim.spam_url_fraction; }, 0.0, 1.0);
    t["sim.defenses"] = [](AppConfig& c, const std::string& v, std::string* err) {
        auto stages = parse_stage_set(v, err);
        if (!stages) return false;
        c.sim.defenses = std::move(*stages);
        return true;
    };
    add_int("sim.seed", [](AppConfig& c) -> uint64_t& { return c.sim.seed; }, 0);
    add_int("sim.seed_infections", [](AppConfig& c) -> int& { return c.sim.seed_infections; }, 0);
    t["sim.surbl_off_sessions"] = set_sessions_range;
    t["sim.mitigate_minute"] = [](AppConfig& c, const std::string& v, std::string* err) {
        if (!parse_int(v, c.sim.mitigate_minute)) {
            if (err) *err = "expected an integer";
            return false;
        }
        return true;
    };

    return t;
}

const std::map<std::string, FieldRef>& table() {
    static const std::map<std::string, FieldRef> kTable = build_table();
    return kTable;
}

bool apply_key(AppConfig& cfg, const std::string& key, const std::string& value,
               std::string* err) {
    // policy.allow.<group> is the one dynamic key family.
    if (key.rfind("policy.allow.", 0) == 0) {
        std::string group = to_lower(key.substr(strlen("policy.allow.")));
        auto parsed = EmailAddress::parse(group);
        if (!parsed) {
            if (err) *err = "config key \"" + key + "\": group is not an email address";
            return false;
        }
        auto& allow = cfg.policy.group_allow[parsed->key()];
        for (const auto& item : split(value, ',')) {
            std::string addr = trim(item);
            if (addr.empty()) continue;
            auto sender = EmailAddress::parse(addr);
            if (!sender) {
                if (err) *err = "config key \"" + key + "\": bad sender \"" + addr + "\"";
                return false;
            }
            allow.insert(sender->key());
        }
        return true;
    }
    auto it = table().find(key);
    if (it == table().end()) {
        if (err) *err = "unknown config key \"" + key + "\"";
        return false;
    }
    std::string detail;
    if (!it->second(cfg, value, &detail)) {
        if (err) *err = "config key \"" + key + "\": " + detail;
        return false;
    }
    return true;
}

bool validate(const AppConfig& cfg, std::string* err) {
    if (cfg.content.flag_size_min > cfg.content.flag_size_max) {
        if (err) *err = "content.flag_size_min exceeds content.flag_size_max";
        return false;
    }
    return true;
}

}  // namespace

std::optional<AppConfig> parse_config(std::string_view text, std::string* err) {
    AppConfig cfg;
    std::string section;
    size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = to_lower(trim(std::string_view(line).substr(1, line.size() - 2)));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (err) *err = "line " + std::to_string(lineno) + ": expected key = value";
            return std::nullopt;
        }
        std::string key = to_lower(trim(std::string_view(line).substr(0, eq)));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (!section.empty()) key = section + "." + key;
        if (!apply_key(cfg, key, value, err)) return std::nullopt;
    }
    if (!validate(cfg, err)) return std::nullopt;
    return cfg;
}

std::optional<AppConfig> load_config_file(const std::string& path, std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open config file " + path;
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), err);
}

bool apply_config_override(AppConfig& cfg, std::string_view assignment, std::string* err) {
    size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        if (err) *err = "override must look like section.key=value";
        return false;
    }
    std::string key = to_lower(trim(assignment.substr(0, eq)));
    std::string value = trim(assignment.substr(eq + 1));
    return apply_key(cfg, key, value, err);
}

}  // namespace spamwall
