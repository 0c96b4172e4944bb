#include "spamwall/sim.hpp"

#include <algorithm>

namespace spamwall {

namespace {

constexpr const char* kVictimDomain = "corp.example";
constexpr const char* kSurblZone = "surbl.sim.test";
constexpr const char* kDnsblZone = "bl.sim.test";
constexpr const char* kWormDomain = "xtinmdesachlion.com";
constexpr const char* kServerIp = "10.0.0.10";

std::string user_address(int uid) { return "user" + std::to_string(uid) + "@" + kVictimDomain; }
std::string group_address(int gid) { return "group" + std::to_string(gid) + "@" + kVictimDomain; }

Ipv4 user_ip(int uid) {
    // 10.0.X.Y pool, 250 hosts per /24
    return Ipv4{(10u << 24) | (static_cast<uint32_t>(1 + uid / 250) << 8) |
                static_cast<uint32_t>(uid % 250 + 1)};
}

Ipv4 spam_ip(uint64_t seq) {
    return Ipv4{(198u << 24) | (18u << 16) | (static_cast<uint32_t>(seq / 250 % 250) << 8) |
                static_cast<uint32_t>(seq % 250 + 1)};
}

// A quarter of the background spam comes through relays that do have reverse
// DNS; those reuse a small pool with pre-published PTRs.
constexpr uint64_t kSpamPtrModulus = 4;
constexpr int kSpamRelayPool = 250;

Ipv4 spam_relay_ip(uint64_t seq) {
    return Ipv4{(198u << 24) | (19u << 16) |
                static_cast<uint32_t>(seq / kSpamPtrModulus % kSpamRelayPool + 1)};
}

std::string spam_relay_helo(uint64_t seq) {
    return "mx" + std::to_string(seq / kSpamPtrModulus % kSpamRelayPool) + ".bulkmail.example";
}

enum class MsgKind { Worm, Spam };

struct QueuedMessage {
    Message msg;
    MsgKind kind = MsgKind::Spam;
    bool listed_url = false;
    int target_group = -1;
};

}  // namespace

const char* const kWormAttachmentName = "Update_KB2546_*86.BAK.exe";

const std::vector<std::string>& sim_worm_subjects() {
    static const std::vector<std::string> kSubjects = {"test", "server report", "status", "helo"};
    return kSubjects;
}

const std::vector<std::string>& sim_worm_url_hosts() {
    static const std::vector<std::string> kHosts = {
        std::string("www2.") + kWormDomain, std::string("www3.") + kWormDomain,
        std::string("www4.") + kWormDomain, std::string("www6.") + kWormDomain};
    return kHosts;
}

StaticZone make_sim_zone(int users) {
    StaticZone zone;
    zone.add_a(std::string(kWormDomain) + "." + kSurblZone, Ipv4{0x7f000002});  // 127.0.0.2
    zone.add_txt(kVictimDomain, std::string("v=spf1 ip4:") + kServerIp + " -all");
    zone.add_ptr(reverse_name(*Ipv4::parse(kServerIp)), std::string("mail.") + kVictimDomain);
    zone.add_a(std::string("mail.") + kVictimDomain, *Ipv4::parse(kServerIp));
    for (int uid = 0; uid < users; ++uid)
        zone.add_ptr(reverse_name(user_ip(uid)),
                     "host" + std::to_string(uid) + "." + kVictimDomain);
    for (int slot = 0; slot < kSpamRelayPool; ++slot)
        zone.add_ptr(reverse_name(spam_relay_ip(static_cast<uint64_t>(slot) * kSpamPtrModulus)),
                     spam_relay_helo(static_cast<uint64_t>(slot) * kSpamPtrModulus));
    return zone;
}

std::vector<BlocklistConfig> sim_dnsbl_lists() {
    return {BlocklistConfig{"bl-sim", kDnsblZone, BlocklistKind::IpList, 1, true}};
}

std::vector<BlocklistConfig> sim_surbl_lists() {
    return {BlocklistConfig{"ws-sim", kSurblZone, BlocklistKind::DomainList, 1, true}};
}

namespace {

class Simulator {
public:
    explicit Simulator(const AppConfig& cfg)
        : cfg_(cfg),
          rng_(cfg.sim.seed),
          zone_(make_sim_zone(cfg.sim.users)),
          infected_(cfg.sim.users, 0) {
        group_size_ = (cfg_.sim.users + cfg_.sim.groups - 1) / cfg_.sim.groups;
        for (int i = 0; i < std::min(cfg_.sim.seed_infections, cfg_.sim.users); ++i)
            infected_[static_cast<size_t>(i)] = 1;

        base_ctx_ = build_context();
        int n_sessions =
            (cfg_.sim.duration_minutes + cfg_.sim.session_minutes - 1) / cfg_.sim.session_minutes;
        report_.sessions.resize(static_cast<size_t>(n_sessions));
        for (int s = 0; s < n_sessions; ++s) {
            auto& row = report_.sessions[static_cast<size_t>(s)];
            row.stats.session_start = static_cast<int64_t>(s) * cfg_.sim.session_minutes * 60;
            row.stats.session_len = static_cast<int64_t>(cfg_.sim.session_minutes) * 60;
        }
    }

    SimReport run() {
        for (int minute = 0; minute < cfg_.sim.duration_minutes; ++minute) step(minute);
        report_.final_infected = infected_count();
        report_.totals.queued_worm_end = count_queued_worm();
        return std::move(report_);
    }

private:
    PipelineContext build_context() {
        PipelineContext ctx;
        for (Stage s : kStageOrder) ctx.set_enabled(s, cfg_.sim.defenses.count(s) > 0);
        ctx.dnsbl_lists = sim_dnsbl_lists();
        ctx.surbl_lists = sim_surbl_lists();
        ctx.dnsbl_threshold = cfg_.dnsbl.threshold;
        ctx.surbl_threshold = cfg_.surbl.threshold;
        ctx.surbl_max_domains = cfg_.surbl.max_domains;
        ctx.reject_missing_ptr = cfg_.rdns.reject_missing_ptr;
        ctx.reject_helo_mismatch = cfg_.rdns.reject_helo_mismatch;
        ctx.greylist_min_delay = cfg_.greylist.min_delay_secs;
        ctx.greylist_max_window = cfg_.greylist.max_window_secs;
        ctx.spf_reject_softfail = cfg_.spf.reject_softfail;
        ctx.spf_max_dns = cfg_.spf.max_dns;
        ctx.content_rules = default_content_rules();
        ctx.attachment_rule = default_attachment_rule();
        ctx.group_ids.clear();
        for (int g = 0; g < cfg_.sim.groups; ++g) {
            auto addr = EmailAddress::parse(group_address(g));
            ctx.group_ids.insert(addr->key());
        }
        // Group sends are expected from members; the policy stage in the sim
        // watches recipient counts and attachment sizes only.
        for (const auto& gid : ctx.group_ids) ctx.policy.group_send_allowlist[gid] = {};
        ctx.policy.max_rcpt_per_message = cfg_.policy.max_rcpt;
        ctx.policy.max_attachment_bytes = static_cast<uint64_t>(cfg_.policy.max_attachment_bytes);
        ctx.resolver = &zone_;
        ctx.greylist = &greylist_;
        ctx.guard = &guard_;
        return ctx;
    }

    uint64_t infected_count() const {
        return static_cast<uint64_t>(std::count(infected_.begin(), infected_.end(), 1));
    }

    uint64_t count_queued_worm() const {
        uint64_t n = 0;
        for (const auto& q : queue_)
            if (q.kind == MsgKind::Worm) ++n;
        return n;
    }

    bool surbl_active(int minute) const {
        if (!cfg_.sim.surbl_off_sessions) return true;
        int session = minute / cfg_.sim.session_minutes + 1;  // 1-based
        return session < cfg_.sim.surbl_off_sessions->first ||
               session > cfg_.sim.surbl_off_sessions->second;
    }

    QueuedMessage make_worm_message(int minute, int uid, int gid, uint64_t ordinal) {
        QueuedMessage q;
        q.kind = MsgKind::Worm;
        q.listed_url = true;
        q.target_group = gid;

        Message& m = q.msg;
        m.received_at = static_cast<int64_t>(minute) * 60;
        m.envelope.client_ip = user_ip(uid);
        m.envelope.helo_host = "host" + std::to_string(uid) + "." + kVictimDomain;
        int fake = static_cast<int>(rng_.next_below(static_cast<uint64_t>(cfg_.sim.users)));
        m.envelope.mail_from = *EmailAddress::parse(user_address(fake));
        m.envelope.rcpt_to.push_back(*EmailAddress::parse(group_address(gid)));
        m.header_from = m.envelope.mail_from;

        const auto& subjects = sim_worm_subjects();
        m.subject = subjects[(static_cast<uint64_t>(minute) + ordinal) % subjects.size()];
        const auto& hosts = sim_worm_url_hosts();
        m.body_text = "Please run the attached antivirus update.\nMore at http://" +
                      hosts[ordinal % hosts.size()] + "/load";
        uint64_t size = 140 * 1024 + rng_.next_below(40 * 1024 + 1);
        m.attachments.push_back(Attachment{kWormAttachmentName, size, "application/octet-stream"});
        return q;
    }

    QueuedMessage make_spam_message(int minute) {
        QueuedMessage q;
        q.kind = MsgKind::Spam;
        uint64_t seq = spam_seq_++;

        Message& m = q.msg;
        m.received_at = static_cast<int64_t>(minute) * 60;
        if (seq % kSpamPtrModulus == 0) {
            // relay spam keeps a stable identity per slot and retries, the
            // greylist-bypassing kind; it reaches the content-side layers
            uint64_t slot = seq / kSpamPtrModulus % kSpamRelayPool;
            m.envelope.client_ip = spam_relay_ip(seq);
            m.envelope.helo_host = spam_relay_helo(seq);
            m.envelope.mail_from =
                *EmailAddress::parse("promo" + std::to_string(slot) + "@bulkmail.example");
            m.envelope.rcpt_to.push_back(
                *EmailAddress::parse(user_address(static_cast<int>(
                    slot % static_cast<uint64_t>(cfg_.sim.users)))));
        } else {
            m.envelope.client_ip = spam_ip(seq);
            m.envelope.helo_host = "mx" + std::to_string(seq % 100) + ".junk.example";
            m.envelope.mail_from =
                *EmailAddress::parse("bulk" + std::to_string(seq) + "@junkmail.example");
            int rcpt = static_cast<int>(rng_.next_below(static_cast<uint64_t>(cfg_.sim.users)));
            m.envelope.rcpt_to.push_back(*EmailAddress::parse(user_address(rcpt)));
        }
        m.header_from = m.envelope.mail_from;
        m.subject = "promo " + std::to_string(seq);

        q.listed_url = rng_.next_double() < cfg_.sim.spam_url_fraction;
        if (q.listed_url) {
            const auto& hosts = sim_worm_url_hosts();
            m.body_text = "Great deals today at http://" + hosts[seq % hosts.size()] + "/buy";
        } else {
            m.body_text = "Great deals today, reply to this mail for the catalogue.";
        }
        return q;
    }

    void step(int minute) {
        SimMinute row;
        row.minute = minute;
        row.queue_before = queue_.size();

        if (cfg_.sim.mitigate_minute >= 0 && minute == cfg_.sim.mitigate_minute) {
            for (int g = 0; g < cfg_.sim.groups; ++g)
                guard_.remap_group(*EmailAddress::parse(group_address(g)),
                                   static_cast<int64_t>(minute) * 60, AliasMode::BounceOld);
        }

        // Overload shedding: backlog beyond queue_limit is refused before this
        // minute's arrivals are admitted.
        while (queue_.size() > static_cast<size_t>(cfg_.sim.queue_limit)) {
            const QueuedMessage& dropped = queue_.front();
            if (dropped.kind == MsgKind::Worm) report_.totals.rejected_worm += 1;
            queue_.pop_front();
            row.shed += 1;
            row.rejected += 1;
        }

        // Emission: every infected host mails every group once per minute.
        std::vector<QueuedMessage> arrivals;
        uint64_t ordinal = 0;
        for (int uid = 0; uid < cfg_.sim.users; ++uid) {
            if (!infected_[static_cast<size_t>(uid)]) continue;
            for (int gid = 0; gid < cfg_.sim.groups; ++gid)
                arrivals.push_back(make_worm_message(minute, uid, gid, ordinal++));
        }
        for (int j = 0; j < cfg_.sim.spam_rate; ++j) arrivals.push_back(make_spam_message(minute));

        row.emitted = arrivals.size();
        for (const auto& a : arrivals)
            if (a.kind == MsgKind::Worm) ++row.emitted_worm;

        // Admission: alias-bounced mail is refused at the door, the rest queues.
        for (auto& a : arrivals) {
            bool bounced = false;
            for (const auto& rcpt : a.msg.envelope.rcpt_to) {
                auto alias = guard_.alias_for(rcpt.key());
                if (alias && alias->mode == AliasMode::BounceOld) {
                    bounced = true;
                    break;
                }
            }
            if (bounced) {
                row.rejected += 1;
                if (a.kind == MsgKind::Worm) report_.totals.rejected_worm += 1;
            } else {
                queue_.push_back(std::move(a));
            }
        }

        // Service: up to server_capacity messages clear the pipeline per minute.
        PipelineContext* ctx = &base_ctx_;
        PipelineContext off_ctx;
        if (!surbl_active(minute) && base_ctx_.enabled(Stage::Surbl)) {
            off_ctx = base_ctx_;
            off_ctx.set_enabled(Stage::Surbl, false);
            ctx = &off_ctx;
        }
        auto& session = report_.sessions[static_cast<size_t>(minute / cfg_.sim.session_minutes)];
        size_t budget = std::min(queue_.size(), static_cast<size_t>(cfg_.sim.server_capacity));
        for (size_t i = 0; i < budget; ++i) {
            QueuedMessage q = std::move(queue_.front());
            queue_.pop_front();
            Verdict v = run_pipeline(q.msg, *ctx);
            switch (v.final) {
                case FinalVerdict::Delivered:
                    row.delivered += 1;
                    if (q.kind == MsgKind::Worm) {
                        report_.totals.delivered_worm += 1;
                        session.delivered_worm += 1;
                        infect_group(q.target_group);
                    } else if (q.listed_url) {
                        session.delivered_url_spam += 1;
                    }
                    break;
                case FinalVerdict::Quarantined:
                    row.trapped += 1;
                    if (auto stage = v.trap_stage()) session.stats.trapped_by_stage[*stage] += 1;
                    if (q.kind == MsgKind::Worm) report_.totals.trapped_worm += 1;
                    break;
                case FinalVerdict::Rejected:
                case FinalVerdict::TempRejected:
                    row.rejected += 1;
                    if (q.kind == MsgKind::Worm) report_.totals.rejected_worm += 1;
                    break;
            }
        }

        row.queue_after = queue_.size();
        if (queue_.size() > static_cast<size_t>(cfg_.sim.queue_limit))
            overload_streak_ += 1;
        else
            overload_streak_ = 0;
        row.dos_active = overload_streak_ >= 5;
        if (row.dos_active && report_.first_dos_minute < 0) report_.first_dos_minute = minute;
        row.infected = infected_count();

        session.stats.delivered += row.delivered;
        session.stats.trapped += row.trapped;
        session.stats.rejected += row.rejected;
        session.dos_active = session.dos_active || row.dos_active;

        report_.totals.emitted += row.emitted;
        report_.totals.emitted_worm += row.emitted_worm;
        report_.totals.delivered += row.delivered;
        report_.totals.trapped += row.trapped;
        report_.totals.rejected += row.rejected;
        report_.totals.shed += row.shed;
        report_.timeline.push_back(row);
    }

    void infect_group(int gid) {
        if (gid < 0) return;
        int lo = gid * group_size_;
        int hi = std::min(cfg_.sim.users, lo + group_size_);
        for (int uid = lo; uid < hi; ++uid) {
            if (infected_[static_cast<size_t>(uid)]) continue;
            if (rng_.next_double() < cfg_.sim.p_exec) infected_[static_cast<size_t>(uid)] = 1;
        }
    }

    AppConfig cfg_;
    SplitMix64 rng_;
    StaticZone zone_;
    GreylistStore greylist_;
    GuardState guard_;
    PipelineContext base_ctx_;
    std::vector<char> infected_;
    std::deque<QueuedMessage> queue_;
    int group_size_ = 1;
    uint64_t spam_seq_ = 0;
    int overload_streak_ = 0;
    SimReport report_;
};

}  // namespace

std::string SimReport::csv() const {
    std::string out = kSessionCsvHeader;
    out += ",dos_active\n";
    for (const auto& row : sessions) {
        out += session_csv_row(row.stats);
        out += row.dos_active ? ",1\n" : ",0\n";
    }
    return out;
}

SimReport run_experiment(const AppConfig& cfg) { return Simulator(cfg).run(); }

}  // namespace spamwall
