#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spamwall/bayes.hpp"
#include "spamwall/content_policy.hpp"
#include "spamwall/greylist.hpp"
#include "spamwall/guard.hpp"
#include "spamwall/message.hpp"
#include "spamwall/source_filters.hpp"
#include "spamwall/stage.hpp"

namespace spamwall {

struct AppConfig;

enum class Decision { Pass, TempReject, Reject, Quarantine, Skipped, Unavailable };
enum class FinalVerdict { Delivered, TempRejected, Rejected, Quarantined };

const char* decision_name(Decision d);
const char* final_verdict_name(FinalVerdict f);

struct StageOutcome {
    Stage stage = Stage::Dnsbl;
    Decision decision = Decision::Skipped;
    std::string detail;
};

struct Verdict {
    FinalVerdict final = FinalVerdict::Delivered;
    std::array<StageOutcome, kStageOrder.size()> outcomes;  // execution order
    int smtp_code = 250;

    std::optional<Stage> trap_stage() const;  // first quarantining stage
};

/// Everything one message evaluation needs. Config-derived values are plain
/// members; the resolver, greylist store and guard state are shared handles.
/// Safe to use from concurrent workers (the stores serialize internally).
struct PipelineContext {
    std::array<bool, kStageOrder.size()> stage_enabled{};

    std::vector<BlocklistConfig> dnsbl_lists;
    std::vector<BlocklistConfig> surbl_lists;
    int dnsbl_threshold = 1;
    int surbl_threshold = 1;
    int surbl_max_domains = 10;

    bool reject_missing_ptr = true;
    bool reject_helo_mismatch = true;

    int64_t greylist_min_delay = 10;
    int64_t greylist_max_window = 12 * 3600;

    bool spf_reject_softfail = true;
    int spf_max_dns = 10;

    std::vector<ContentRule> content_rules;
    AttachmentRule attachment_rule;

    PolicyConfig policy;
    std::set<std::string> group_ids;

    const BayesDictionary* dictionary = nullptr;
    double bayes_threshold = 0.9;

    Resolver* resolver = nullptr;
    GreylistStore* greylist = nullptr;
    const GuardState* guard = nullptr;

    mutable std::atomic<uint64_t> surbl_dropped_domains{0};

    bool enabled(Stage s) const { return stage_enabled[static_cast<size_t>(s)]; }
    void enable_all() { stage_enabled.fill(true); }
    void set_enabled(Stage s, bool on) { stage_enabled[static_cast<size_t>(s)] = on; }

    PipelineContext() { enable_all(); }
    PipelineContext(const PipelineContext& o);
    PipelineContext& operator=(const PipelineContext& o);
};

/// Fills the config-derived parts (lists, toggles, rules, policy); the caller
/// wires resolver/greylist/dictionary/guard handles afterwards. Fails only
/// when a configured rules file cannot be loaded.
std::optional<PipelineContext> make_pipeline_context(const AppConfig& cfg,
                                                     std::string* err = nullptr);

/// Runs the stages in order. Reject/TempReject terminate immediately;
/// quarantines are recorded and the remaining stages still run.
Verdict run_pipeline(const Message& msg, const PipelineContext& ctx);

/// One stage in isolation; the SMTP front end drives its own walk so the
/// connection stages can run at RCPT time. Stage::Dnsbl also applies the
/// guard pre-gate (host quarantine, alias dispositions).
StageOutcome eval_stage(Stage stage, const Message& msg, const PipelineContext& ctx);

/// Derives the final verdict and SMTP code from a full outcome array.
Verdict assemble_verdict(std::array<StageOutcome, kStageOrder.size()> outcomes);

/// Stages evaluated on the envelope, before message data.
inline constexpr size_t kConnectionStages = 4;  // Dnsbl, Rdns, Greylist, Spf

struct SessionStats {
    int64_t session_start = 0;
    int64_t session_len = 3 * 3600;
    uint64_t delivered = 0;
    uint64_t trapped = 0;
    uint64_t rejected = 0;  // includes temporary rejects
    std::map<Stage, uint64_t> trapped_by_stage;
};

struct SessionEvent {
    int64_t received_at = 0;
    FinalVerdict final = FinalVerdict::Delivered;
    std::optional<Stage> trap_stage;
};

SessionEvent to_session_event(const Message& msg, const Verdict& verdict);

/// Buckets events into consecutive fixed-length sessions anchored at the
/// earliest timestamp; gaps produce empty sessions.
std::vector<SessionStats> record_sessions(std::vector<SessionEvent> events, int64_t session_len);

extern const char* const kSessionCsvHeader;
std::string session_csv_row(const SessionStats& s);
std::string sessions_to_csv(std::span<const SessionStats> sessions);

}  // namespace spamwall
