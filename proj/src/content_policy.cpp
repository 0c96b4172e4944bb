#include "spamwall/content_policy.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

namespace spamwall {

namespace {

const std::set<std::string>& executable_extensions() {
    static const std::set<std::string> kSet = {"exe", "scr", "pif", "bat", "com"};
    return kSet;
}

std::vector<std::string> name_suffixes(const std::string& filename) {
    auto parts = split(filename, '.');
    parts.erase(parts.begin());  // base name is not a suffix
    return parts;
}

}  // namespace

std::vector<RuleHit> content_match(const Message& msg, const std::vector<ContentRule>& rules) {
    std::vector<RuleHit> hits;
    for (const auto& rule : rules) {
        bool fired = false;
        for (const auto& pattern : rule.patterns) {
            switch (rule.target) {
                case RuleTarget::Subject:
                    fired = icontains(msg.subject, pattern);
                    break;
                case RuleTarget::Body:
                    fired = icontains(msg.body_text, pattern);
                    break;
                case RuleTarget::AttachmentName:
                    for (const auto& att : msg.attachments)
                        if (icontains(att.filename, pattern)) {
                            fired = true;
                            break;
                        }
                    break;
            }
            if (fired) break;
        }
        if (fired) hits.push_back(RuleHit{rule.id, rule.action});
    }
    return hits;
}

std::vector<AttachmentViolation> attachment_check(const Message& msg, const AttachmentRule& rule) {
    bool blocked = false, doubled = false, suspicious = false;
    for (const auto& att : msg.attachments) {
        auto suffixes = name_suffixes(att.filename);
        if (!suffixes.empty()) {
            std::string final_ext = to_lower(suffixes.back());
            if (rule.blocked_extensions.count(final_ext)) blocked = true;
            if (rule.block_double_extension && suffixes.size() >= 2 &&
                executable_extensions().count(final_ext))
                doubled = true;
        }
        if (rule.flag_size_range && att.size_bytes >= rule.flag_size_range->first &&
            att.size_bytes <= rule.flag_size_range->second)
            suspicious = true;
    }
    std::vector<AttachmentViolation> out;
    if (blocked) out.push_back(AttachmentViolation::BlockedExtension);
    if (doubled) out.push_back(AttachmentViolation::DoubleExtension);
    if (suspicious) out.push_back(AttachmentViolation::SuspiciousSize);
    return out;
}

std::vector<PolicyViolation> policy_check(const Message& msg, const PolicyConfig& policy,
                                          const std::set<std::string>& group_ids) {
    std::vector<PolicyViolation> out;
    std::string sender = msg.envelope.mail_from.key();
    bool group_denied = false;
    for (const auto& rcpt : msg.envelope.rcpt_to) {
        std::string key = rcpt.key();
        if (!group_ids.count(key)) continue;
        auto it = policy.group_send_allowlist.find(key);
        if (it == policy.group_send_allowlist.end() || !it->second.count(sender))
            group_denied = true;
    }
    if (group_denied) out.push_back(PolicyViolation::GroupSendDenied);
    if (static_cast<int>(msg.envelope.rcpt_to.size()) > policy.max_rcpt_per_message)
        out.push_back(PolicyViolation::TooManyRecipients);
    for (const auto& att : msg.attachments)
        if (att.size_bytes > policy.max_attachment_bytes) {
            out.push_back(PolicyViolation::AttachmentTooLarge);
            break;
        }
    return out;
}

int prune_trap(const std::filesystem::path& trap_dir, int64_t now, int retention_days,
               std::vector<std::string>* errors) {
    namespace fs = std::filesystem;
    using namespace std::chrono;

    int deleted = 0;
    int64_t cutoff = now - static_cast<int64_t>(retention_days) * 86400;
    int64_t wall_now = duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
    auto fs_now = fs::file_time_type::clock::now();

    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(trap_dir, ec)) {
        if (!entry.is_regular_file()) continue;
        std::error_code fec;
        auto mtime = fs::last_write_time(entry.path(), fec);
        if (fec) {
            if (errors) errors->push_back(entry.path().string() + ": " + fec.message());
            continue;
        }
        // Age relative to the filesystem clock, anchored to the caller's notion of now.
        int64_t age = duration_cast<seconds>(fs_now - mtime).count();
        int64_t mtime_epoch = wall_now - age;
        if (mtime_epoch >= cutoff) continue;
        if (!fs::remove(entry.path(), fec) || fec) {
            if (errors) errors->push_back(entry.path().string() + ": " + fec.message());
            continue;
        }
        ++deleted;
    }
    if (ec && errors) errors->push_back(trap_dir.string() + ": " + ec.message());
    return deleted;
}

std::vector<ContentRule> default_content_rules() {
    return {
        ContentRule{"subject-worm", RuleTarget::Subject,
                    {"test", "server report", "status", "helo"}, RuleAction::Quarantine},
        ContentRule{"body-spam", RuleTarget::Body,
                    {"viagra", "install updates", "customer support service"},
                    RuleAction::Quarantine},
    };
}

AttachmentRule default_attachment_rule() {
    AttachmentRule rule;
    rule.blocked_extensions = executable_extensions();
    rule.block_double_extension = true;
    rule.flag_size_range = {140 * 1024, 180 * 1024};
    return rule;
}

std::optional<std::vector<ContentRule>> load_rules_file(const std::filesystem::path& path,
                                                        std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open rules file " + path.string();
        return std::nullopt;
    }
    std::vector<ContentRule> rules;
    std::set<std::string> ids;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        auto bad = [&](const std::string& what) {
            if (err) *err = "rules line " + std::to_string(lineno) + ": " + what;
        };
        auto fields = split(text, '|');
        if (fields.size() != 4) {
            bad("expected <id>|<target>|<action>|<patterns>");
            return std::nullopt;
        }
        ContentRule rule;
        rule.id = trim(fields[0]);
        if (rule.id.empty() || !ids.insert(rule.id).second) {
            bad("rule id missing or duplicate: " + rule.id);
            return std::nullopt;
        }
        std::string target = to_lower(trim(fields[1]));
        if (target == "subject")
            rule.target = RuleTarget::Subject;
        else if (target == "body")
            rule.target = RuleTarget::Body;
        else if (target == "attachment")
            rule.target = RuleTarget::AttachmentName;
        else {
            bad("target must be subject, body or attachment");
            return std::nullopt;
        }
        std::string action = to_lower(trim(fields[2]));
        if (action == "reject")
            rule.action = RuleAction::Reject;
        else if (action == "quarantine")
            rule.action = RuleAction::Quarantine;
        else {
            bad("action must be reject or quarantine");
            return std::nullopt;
        }
        for (const auto& part : split(fields[3], ',')) {
            std::string pattern = trim(part);
            if (!pattern.empty()) rule.patterns.push_back(std::move(pattern));
        }
        if (rule.patterns.empty()) {
            bad("rule needs at least one pattern");
            return std::nullopt;
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

}  // namespace spamwall
