#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spamwall/message.hpp"

namespace spamwall {

enum class RuleTarget { Subject, Body, AttachmentName };
enum class RuleAction { Reject, Quarantine };

struct ContentRule {
    std::string id;
    RuleTarget target = RuleTarget::Body;
    std::vector<std::string> patterns;  // literal, matched case-insensitively
    RuleAction action = RuleAction::Quarantine;
};

struct AttachmentRule {
    std::set<std::string> blocked_extensions;  // lowercase, no dot
    bool block_double_extension = true;
    std::optional<std::pair<uint64_t, uint64_t>> flag_size_range;  // inclusive bounds
};

struct PolicyConfig {
    std::map<std::string, std::set<std::string>> group_send_allowlist;  // keys/values lowercased
    int max_rcpt_per_message = 20;
    uint64_t max_attachment_bytes = 10 * 1024 * 1024;
    int trap_retention_days = 30;
};

struct RuleHit {
    std::string rule_id;
    RuleAction action = RuleAction::Quarantine;

    bool operator==(const RuleHit&) const = default;
};

enum class AttachmentViolation { BlockedExtension, DoubleExtension, SuspiciousSize };
enum class PolicyViolation { GroupSendDenied, TooManyRecipients, AttachmentTooLarge };

/// A rule fires when any of its patterns occurs, case-insensitively, in the
/// target field; hits come back in rule-set order.
std::vector<RuleHit> content_match(const Message& msg, const std::vector<ContentRule>& rules);

std::vector<AttachmentViolation> attachment_check(const Message& msg, const AttachmentRule& rule);

std::vector<PolicyViolation> policy_check(const Message& msg, const PolicyConfig& policy,
                                          const std::set<std::string>& group_ids);

/// Deletes quarantined messages older than the retention window; returns the
/// number removed. Per-file errors are collected but do not stop the sweep.
int prune_trap(const std::filesystem::path& trap_dir, int64_t now, int retention_days,
               std::vector<std::string>* errors = nullptr);

/// The shipped signature set: worm subjects, known spam phrases, executable
/// double extensions, and the 140-180 KB size flag.
std::vector<ContentRule> default_content_rules();
AttachmentRule default_attachment_rule();

/// Rules file: "<id>|<target>|<action>|<pattern>[,<pattern>...]", "#" comments.
std::optional<std::vector<ContentRule>> load_rules_file(const std::filesystem::path& path,
                                                        std::string* err = nullptr);

}  // namespace spamwall
