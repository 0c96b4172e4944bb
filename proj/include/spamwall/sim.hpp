#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "spamwall/config.hpp"
#include "spamwall/dns.hpp"
#include "spamwall/guard.hpp"
#include "spamwall/pipeline.hpp"

namespace spamwall {

/// Per-minute trace row; the conservation identity is
///   emitted + queue_before == delivered + trapped + rejected + queue_after
/// where rejected includes pipeline rejects, alias bounces and overload shed.
struct SimMinute {
    int minute = 0;
    uint64_t emitted = 0;
    uint64_t emitted_worm = 0;
    uint64_t shed = 0;  // backlog dropped under overload, counted in rejected
    uint64_t delivered = 0;
    uint64_t trapped = 0;
    uint64_t rejected = 0;
    uint64_t queue_before = 0;
    uint64_t queue_after = 0;
    bool dos_active = false;
    uint64_t infected = 0;
};

struct SimSessionRow {
    SessionStats stats;
    bool dos_active = false;           // any minute of the session
    uint64_t delivered_url_spam = 0;   // delivered background spam carrying a listed URL
    uint64_t delivered_worm = 0;
};

struct SimTotals {
    uint64_t emitted = 0;
    uint64_t emitted_worm = 0;
    uint64_t delivered_worm = 0;
    uint64_t trapped_worm = 0;
    uint64_t rejected_worm = 0;  // includes bounced and shed worm messages
    uint64_t queued_worm_end = 0;
    uint64_t delivered = 0;
    uint64_t trapped = 0;
    uint64_t rejected = 0;
    uint64_t shed = 0;
};

struct SimReport {
    std::vector<SimSessionRow> sessions;
    std::vector<SimMinute> timeline;
    SimTotals totals;
    int first_dos_minute = -1;  // -1: never
    uint64_t final_infected = 0;

    /// Session CSV in the pipeline schema plus a dos_active column.
    std::string csv() const;
};

/// The deterministic zone the simulator resolves against: the worm download
/// domain is SURBL-listed, the victim domain publishes a strict SPF record,
/// internal hosts have matching PTR records (so faked internal mail is an SPF
/// problem, not an rDNS one), and most external spam hosts have none.
StaticZone make_sim_zone(int users = 200);
std::vector<BlocklistConfig> sim_dnsbl_lists();
std::vector<BlocklistConfig> sim_surbl_lists();

extern const char* const kWormAttachmentName;
extern const std::vector<std::string>& sim_worm_subjects();
extern const std::vector<std::string>& sim_worm_url_hosts();

/// Discrete-minute run of the worm-propagation attack against the real
/// pipeline. Single-threaded and fully determined by cfg.sim.seed.
SimReport run_experiment(const AppConfig& cfg);

}  // namespace spamwall
