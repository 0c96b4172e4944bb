#include "spamwall/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "spamwall/config.hpp"

namespace spamwall {

const char* decision_name(Decision d) {
    switch (d) {
        case Decision::Pass: return "pass";
        case Decision::TempReject: return "temp-reject";
        case Decision::Reject: return "reject";
        case Decision::Quarantine: return "quarantine";
        case Decision::Skipped: return "skipped";
        case Decision::Unavailable: return "unavailable";
    }
    return "?";
}

const char* final_verdict_name(FinalVerdict f) {
    switch (f) {
        case FinalVerdict::Delivered: return "delivered";
        case FinalVerdict::TempRejected: return "temp-rejected";
        case FinalVerdict::Rejected: return "rejected";
        case FinalVerdict::Quarantined: return "quarantined";
    }
    return "?";
}

std::optional<Stage> Verdict::trap_stage() const {
    for (const auto& o : outcomes)
        if (o.decision == Decision::Quarantine) return o.stage;
    return std::nullopt;
}

PipelineContext::PipelineContext(const PipelineContext& o)
    : stage_enabled(o.stage_enabled),
      dnsbl_lists(o.dnsbl_lists),
      surbl_lists(o.surbl_lists),
      dnsbl_threshold(o.dnsbl_threshold),
      surbl_threshold(o.surbl_threshold),
      surbl_max_domains(o.surbl_max_domains),
      reject_missing_ptr(o.reject_missing_ptr),
      reject_helo_mismatch(o.reject_helo_mismatch),
      greylist_min_delay(o.greylist_min_delay),
      greylist_max_window(o.greylist_max_window),
      spf_reject_softfail(o.spf_reject_softfail),
      spf_max_dns(o.spf_max_dns),
      content_rules(o.content_rules),
      attachment_rule(o.attachment_rule),
      policy(o.policy),
      group_ids(o.group_ids),
      dictionary(o.dictionary),
      bayes_threshold(o.bayes_threshold),
      resolver(o.resolver),
      greylist(o.greylist),
      guard(o.guard),
      surbl_dropped_domains(o.surbl_dropped_domains.load()) {}

PipelineContext& PipelineContext::operator=(const PipelineContext& o) {
    if (this == &o) return *this;
    stage_enabled = o.stage_enabled;
    dnsbl_lists = o.dnsbl_lists;
    surbl_lists = o.surbl_lists;
    dnsbl_threshold = o.dnsbl_threshold;
    surbl_threshold = o.surbl_threshold;
    surbl_max_domains = o.surbl_max_domains;
    reject_missing_ptr = o.reject_missing_ptr;
    reject_helo_mismatch = o.reject_helo_mismatch;
    greylist_min_delay = o.greylist_min_delay;
    greylist_max_window = o.greylist_max_window;
    spf_reject_softfail = o.spf_reject_softfail;
    spf_max_dns = o.spf_max_dns;
    content_rules = o.content_rules;
    attachment_rule = o.attachment_rule;
    policy = o.policy;
    group_ids = o.group_ids;
    dictionary = o.dictionary;
    bayes_threshold = o.bayes_threshold;
    resolver = o.resolver;
    greylist = o.greylist;
    guard = o.guard;
    surbl_dropped_domains.store(o.surbl_dropped_domains.load());
    return *this;
}

std::optional<PipelineContext> make_pipeline_context(const AppConfig& cfg, std::string* err) {
    PipelineContext ctx;
    ctx.set_enabled(Stage::Dnsbl, cfg.dnsbl.enabled);
    ctx.set_enabled(Stage::Rdns, cfg.rdns.enabled);
    ctx.set_enabled(Stage::Greylist, cfg.greylist.enabled);
    ctx.set_enabled(Stage::Spf, cfg.spf.enabled);
    ctx.set_enabled(Stage::Surbl, cfg.surbl.enabled);
    ctx.set_enabled(Stage::Content, cfg.content.enabled);
    ctx.set_enabled(Stage::Policy, cfg.policy.enabled);
    ctx.set_enabled(Stage::Bayes, cfg.bayes.enabled);

    ctx.dnsbl_lists = cfg.dnsbl.lists;
    ctx.surbl_lists = cfg.surbl.lists;
    ctx.dnsbl_threshold = cfg.dnsbl.threshold;
    ctx.surbl_threshold = cfg.surbl.threshold;
    ctx.surbl_max_domains = cfg.surbl.max_domains;

    ctx.reject_missing_ptr = cfg.rdns.reject_missing_ptr;
    ctx.reject_helo_mismatch = cfg.rdns.reject_helo_mismatch;
    ctx.greylist_min_delay = cfg.greylist.min_delay_secs;
    ctx.greylist_max_window = cfg.greylist.max_window_secs;
    ctx.spf_reject_softfail = cfg.spf.reject_softfail;
    ctx.spf_max_dns = cfg.spf.max_dns;

    if (cfg.content.rules_file.empty()) {
        ctx.content_rules = default_content_rules();
    } else {
        auto rules = load_rules_file(cfg.content.rules_file, err);
        if (!rules) return std::nullopt;
        ctx.content_rules = std::move(*rules);
    }
    ctx.attachment_rule.blocked_extensions.clear();
    for (const auto& ext : split(cfg.content.blocked_extensions, ','))
        if (!trim(ext).empty()) ctx.attachment_rule.blocked_extensions.insert(to_lower(trim(ext)));
    ctx.attachment_rule.block_double_extension = cfg.content.block_double_extension;
    ctx.attachment_rule.flag_size_range = {static_cast<uint64_t>(cfg.content.flag_size_min),
                                           static_cast<uint64_t>(cfg.content.flag_size_max)};

    ctx.policy.group_send_allowlist = cfg.policy.group_allow;
    ctx.policy.max_rcpt_per_message = cfg.policy.max_rcpt;
    ctx.policy.max_attachment_bytes = static_cast<uint64_t>(cfg.policy.max_attachment_bytes);
    ctx.policy.trap_retention_days = cfg.policy.trap_retention_days;
    ctx.group_ids = cfg.policy.group_ids;

    ctx.bayes_threshold = cfg.bayes.threshold;
    return ctx;
}

namespace {

std::string join_listed(const ListVerdict& v) {
    std::string out;
    for (const auto& [name, status] : v.per_list) {
        if (status != ListStatus::Listed) continue;
        if (!out.empty()) out += ",";
        out += name;
    }
    return out;
}

bool all_unavailable(const ListVerdict& v) {
    if (v.per_list.empty()) return false;
    return std::all_of(v.per_list.begin(), v.per_list.end(),
                       [](const auto& kv) { return kv.second == ListStatus::Unavailable; });
}

StageOutcome eval_dnsbl(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Dnsbl, Decision::Pass, ""};
    // Guard mitigations gate the connection before any filter or DNS query.
    if (ctx.guard) {
        if (ctx.guard->is_quarantined(msg.envelope.client_ip)) {
            o.decision = Decision::Reject;
            o.detail = "local-quarantine " + msg.envelope.client_ip.to_string();
            return o;
        }
        for (const auto& rcpt : msg.envelope.rcpt_to) {
            if (auto alias = ctx.guard->alias_for(rcpt.key())) {
                if (alias->mode == AliasMode::BounceOld) {
                    o.decision = Decision::Reject;
                    o.detail = "alias-bounce " + rcpt.key();
                } else {
                    o.decision = Decision::Quarantine;
                    o.detail = "alias-drop " + rcpt.key();
                }
                return o;
            }
        }
    }
    if (!ctx.enabled(Stage::Dnsbl) || ctx.dnsbl_lists.empty()) {
        o.detail = ctx.enabled(Stage::Dnsbl) ? "no lists" : "disabled";
        return o;
    }
    ListVerdict v = dnsbl_check(msg.envelope.client_ip, ctx.dnsbl_lists, *ctx.resolver,
                                ctx.dnsbl_threshold);
    if (v.listed) {
        o.decision = Decision::Reject;
        o.detail = "listed: " + join_listed(v) + " score=" + std::to_string(v.score);
    } else if (all_unavailable(v)) {
        o.decision = Decision::Unavailable;
        o.detail = "all lists unavailable";
    }
    return o;
}

StageOutcome eval_rdns(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Rdns, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Rdns)) {
        o.detail = "disabled";
        return o;
    }
    switch (rdns_check(msg.envelope.client_ip, msg.envelope.helo_host, *ctx.resolver)) {
        case RdnsResult::Ok:
            break;
        case RdnsResult::NoPtr:
            if (ctx.reject_missing_ptr) {
                o.decision = Decision::Reject;
                o.detail = "no PTR record";
            } else {
                o.detail = "no PTR record (allowed)";
            }
            break;
        case RdnsResult::HeloMismatch:
            if (ctx.reject_helo_mismatch) {
                o.decision = Decision::Reject;
                o.detail = "PTR does not match HELO " + msg.envelope.helo_host;
            } else {
                o.detail = "PTR/HELO mismatch (allowed)";
            }
            break;
        case RdnsResult::Unavailable:
            o.decision = Decision::Unavailable;
            o.detail = "PTR lookup unavailable";
            break;
    }
    return o;
}

StageOutcome eval_greylist(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Greylist, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Greylist) || !ctx.greylist) {
        o.detail = ctx.enabled(Stage::Greylist) ? "no store" : "disabled";
        return o;
    }
    GreylistKey key{msg.envelope.client_ip.to_string(), msg.envelope.mail_from.key(),
                    msg.envelope.rcpt_to.front().key()};
    GreylistResult r = ctx.greylist->check(key, msg.received_at, ctx.greylist_min_delay,
                                           ctx.greylist_max_window);
    if (!r.store_ok) {
        o.decision = Decision::Unavailable;
        o.detail = "store I/O failure";
    } else if (r.decision == GreylistDecision::TempReject) {
        o.decision = Decision::TempReject;
        o.detail = "greylisted, try again later";
    }
    return o;
}

StageOutcome eval_spf(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Spf, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Spf)) {
        o.detail = "disabled";
        return o;
    }
    SpfResult r = spf_evaluate(msg.envelope.client_ip, msg.envelope.mail_from.domain,
                               *ctx.resolver, ctx.spf_max_dns);
    o.detail = spf_result_name(r);
    switch (r) {
        case SpfResult::Fail:
            o.decision = Decision::Reject;
            break;
        case SpfResult::SoftFail:
            if (ctx.spf_reject_softfail) o.decision = Decision::Reject;
            break;
        case SpfResult::TempError:
            o.decision = Decision::Unavailable;
            break;
        case SpfResult::PermError:  // treated as neutral
        case SpfResult::Pass:
        case SpfResult::Neutral:
        case SpfResult::None:
            break;
    }
    return o;
}

StageOutcome eval_surbl(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Surbl, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Surbl) || ctx.surbl_lists.empty()) {
        o.detail = ctx.enabled(Stage::Surbl) ? "no lists" : "disabled";
        return o;
    }
    uint64_t dropped = 0;
    ListVerdict v = surbl_check(msg, ctx.surbl_lists, *ctx.resolver, ctx.surbl_threshold,
                                ctx.surbl_max_domains, &dropped);
    if (dropped) ctx.surbl_dropped_domains.fetch_add(dropped, std::memory_order_relaxed);
    if (v.listed) {
        o.decision = Decision::Quarantine;
        o.detail = "listed URL: " + join_listed(v) + " score=" + std::to_string(v.score);
    } else if (all_unavailable(v)) {
        o.decision = Decision::Unavailable;
        o.detail = "all lists unavailable";
    } else if (v.per_list.empty()) {
        o.detail = "no URLs";
    }
    return o;
}

StageOutcome eval_content(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Content, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Content)) {
        o.detail = "disabled";
        return o;
    }
    auto hits = content_match(msg, ctx.content_rules);
    auto violations = attachment_check(msg, ctx.attachment_rule);

    bool reject = false, quarantine = false;
    std::string detail;
    for (const auto& hit : hits) {
        (hit.action == RuleAction::Reject ? reject : quarantine) = true;
        if (!detail.empty()) detail += ",";
        detail += hit.rule_id;
    }
    for (auto v : violations) {
        if (!detail.empty()) detail += ",";
        switch (v) {
            case AttachmentViolation::BlockedExtension:
                quarantine = true;
                detail += "blocked-extension";
                break;
            case AttachmentViolation::DoubleExtension:
                quarantine = true;
                detail += "double-extension";
                break;
            case AttachmentViolation::SuspiciousSize:
                // size alone is a weak signal: quarantine, never reject
                quarantine = true;
                detail += "suspicious-size";
                break;
        }
    }
    if (reject)
        o.decision = Decision::Reject;
    else if (quarantine)
        o.decision = Decision::Quarantine;
    o.detail = detail;
    return o;
}

StageOutcome eval_policy(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Policy, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Policy)) {
        o.detail = "disabled";
        return o;
    }
    auto violations = policy_check(msg, ctx.policy, ctx.group_ids);
    if (violations.empty()) return o;
    o.decision = Decision::Quarantine;
    for (auto v : violations) {
        if (!o.detail.empty()) o.detail += ",";
        switch (v) {
            case PolicyViolation::GroupSendDenied: o.detail += "group-send-denied"; break;
            case PolicyViolation::TooManyRecipients: o.detail += "too-many-recipients"; break;
            case PolicyViolation::AttachmentTooLarge: o.detail += "attachment-too-large"; break;
        }
    }
    return o;
}

StageOutcome eval_bayes(const Message& msg, const PipelineContext& ctx) {
    StageOutcome o{Stage::Bayes, Decision::Pass, ""};
    if (!ctx.enabled(Stage::Bayes)) {
        o.detail = "disabled";
        return o;
    }
    if (!ctx.dictionary || !ctx.dictionary->trained()) {
        o.detail = "no dictionary";
        return o;
    }
    auto result = classify(msg, *ctx.dictionary, ctx.bayes_threshold);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "p=%.4f", result.score.probability);
    o.detail = buf;
    if (result.is_spam) o.decision = Decision::Quarantine;
    return o;
}

}  // namespace

StageOutcome eval_stage(Stage stage, const Message& msg, const PipelineContext& ctx) {
    switch (stage) {
        case Stage::Dnsbl: return eval_dnsbl(msg, ctx);
        case Stage::Rdns: return eval_rdns(msg, ctx);
        case Stage::Greylist: return eval_greylist(msg, ctx);
        case Stage::Spf: return eval_spf(msg, ctx);
        case Stage::Surbl: return eval_surbl(msg, ctx);
        case Stage::Content: return eval_content(msg, ctx);
        case Stage::Policy: return eval_policy(msg, ctx);
        case Stage::Bayes: return eval_bayes(msg, ctx);
    }
    return StageOutcome{stage, Decision::Skipped, ""};
}

Verdict assemble_verdict(std::array<StageOutcome, kStageOrder.size()> outcomes) {
    Verdict verdict;
    verdict.outcomes = std::move(outcomes);
    verdict.final = FinalVerdict::Delivered;
    for (const auto& o : verdict.outcomes) {
        if (o.decision == Decision::Reject) {
            verdict.final = FinalVerdict::Rejected;
            break;
        }
        if (o.decision == Decision::TempReject) {
            verdict.final = FinalVerdict::TempRejected;
            break;
        }
        if (o.decision == Decision::Quarantine) verdict.final = FinalVerdict::Quarantined;
    }
    switch (verdict.final) {
        case FinalVerdict::Rejected: verdict.smtp_code = 550; break;
        case FinalVerdict::TempRejected: verdict.smtp_code = 451; break;
        case FinalVerdict::Delivered:
        case FinalVerdict::Quarantined: verdict.smtp_code = 250; break;
    }
    return verdict;
}

Verdict run_pipeline(const Message& msg, const PipelineContext& ctx) {
    std::array<StageOutcome, kStageOrder.size()> outcomes;
    for (size_t i = 0; i < kStageOrder.size(); ++i)
        outcomes[i] = StageOutcome{kStageOrder[i], Decision::Skipped, ""};

    bool terminated = false;
    for (size_t i = 0; i < kStageOrder.size() && !terminated; ++i) {
        Stage stage = kStageOrder[i];
        StageOutcome outcome = eval_stage(stage, msg, ctx);
        outcomes[i] = outcome;
        switch (outcome.decision) {
            case Decision::Reject:
            case Decision::TempReject:
                terminated = true;
                break;
            case Decision::Quarantine:
                // An alias silent-drop swallows the message outright; ordinary
                // quarantines let the remaining stages run for attribution.
                if (stage == Stage::Dnsbl && outcome.detail.rfind("alias-drop", 0) == 0)
                    terminated = true;
                break;
            case Decision::Pass:
            case Decision::Unavailable:  // degrade open
            case Decision::Skipped:
                break;
        }
    }
    return assemble_verdict(std::move(outcomes));
}

SessionEvent to_session_event(const Message& msg, const Verdict& verdict) {
    return SessionEvent{msg.received_at, verdict.final, verdict.trap_stage()};
}

std::vector<SessionStats> record_sessions(std::vector<SessionEvent> events, int64_t session_len) {
    std::vector<SessionStats> sessions;
    if (events.empty() || session_len <= 0) return sessions;
    int64_t t0 = events.front().received_at;
    for (const auto& e : events) t0 = std::min(t0, e.received_at);

    int64_t max_idx = 0;
    for (const auto& e : events) max_idx = std::max(max_idx, (e.received_at - t0) / session_len);
    sessions.resize(static_cast<size_t>(max_idx) + 1);
    for (size_t i = 0; i < sessions.size(); ++i) {
        sessions[i].session_start = t0 + static_cast<int64_t>(i) * session_len;
        sessions[i].session_len = session_len;
    }
    for (const auto& e : events) {
        auto& s = sessions[static_cast<size_t>((e.received_at - t0) / session_len)];
        switch (e.final) {
            case FinalVerdict::Delivered:
                s.delivered += 1;
                break;
            case FinalVerdict::Quarantined:
                s.trapped += 1;
                if (e.trap_stage) s.trapped_by_stage[*e.trap_stage] += 1;
                break;
            case FinalVerdict::Rejected:
            case FinalVerdict::TempRejected:
                s.rejected += 1;
                break;
        }
    }
    return sessions;
}

const char* const kSessionCsvHeader =
    "session_start,delivered,trapped,rejected,trap_dnsbl,trap_rdns,trap_spf,trap_surbl,"
    "trap_content,trap_policy,trap_bayes";

std::string session_csv_row(const SessionStats& s) {
    auto trap = [&](Stage stage) -> uint64_t {
        auto it = s.trapped_by_stage.find(stage);
        return it == s.trapped_by_stage.end() ? 0 : it->second;
    };
    std::ostringstream os;
    os << s.session_start << ',' << s.delivered << ',' << s.trapped << ',' << s.rejected << ','
       << trap(Stage::Dnsbl) << ',' << trap(Stage::Rdns) << ',' << trap(Stage::Spf) << ','
       << trap(Stage::Surbl) << ',' << trap(Stage::Content) << ',' << trap(Stage::Policy) << ','
       << trap(Stage::Bayes);
    return os.str();
}

std::string sessions_to_csv(std::span<const SessionStats> sessions) {
    std::string out = kSessionCsvHeader;
    out += '\n';
    for (const auto& s : sessions) {
        out += session_csv_row(s);
        out += '\n';
    }
    return out;
}

}  // namespace spamwall
