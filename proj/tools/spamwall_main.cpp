#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "spamwall/batch.hpp"
#include "spamwall/config.hpp"
#include "spamwall/sim.hpp"
#include "spamwall/smtp_server.hpp"

namespace fs = std::filesystem;
using namespace spamwall;

namespace {

constexpr const char* kVersion = "spamwall 1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitOperational = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string zone_path;
};

int load_config(const CommonOptions& opts, AppConfig& cfg) {
    std::string path = opts.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("SPAMWALL_CONFIG")) path = env;
    }
    if (!path.empty()) {
        std::string err;
        auto loaded = load_config_file(path, &err);
        if (!loaded) {
            std::cerr << "error: " << err << "\n";
            return kExitUsage;
        }
        cfg = std::move(*loaded);
    }
    for (const auto& assignment : opts.overrides) {
        std::string err;
        if (!apply_config_override(cfg, assignment, &err)) {
            std::cerr << "error: --set " << assignment << ": " << err << "\n";
            return kExitUsage;
        }
    }
    if (!opts.zone_path.empty()) cfg.dns.zone_file = opts.zone_path;
    return kExitOk;
}

std::unique_ptr<Resolver> make_resolver(const AppConfig& cfg, std::string* err) {
    std::unique_ptr<Resolver> resolver;
    if (!cfg.dns.zone_file.empty()) {
        auto zone = StaticZone::load_file(cfg.dns.zone_file, err);
        if (!zone) return nullptr;
        resolver = std::make_unique<StaticZone>(std::move(*zone));
    } else if (!cfg.dns.server.empty()) {
        auto parts = split(cfg.dns.server, ':');
        auto ip = Ipv4::parse(parts[0]);
        int port = 53;
        if (parts.size() == 2) port = std::atoi(parts[1].c_str());
        if (!ip || port <= 0 || port > 65535) {
            if (err) *err = "dns.server must be <ip>[:<port>]";
            return nullptr;
        }
        resolver = std::make_unique<UdpResolver>(parts[0], static_cast<uint16_t>(port),
                                                 cfg.dns.retries);
    } else {
        if (err) *err = "no resolver configured: set dns.zone_file (or --zone) or dns.server";
        return nullptr;
    }
    resolver->set_default_timeout(std::chrono::milliseconds(cfg.dns.timeout_ms));
    return resolver;
}

struct Runtime {
    AppConfig cfg;
    std::unique_ptr<Resolver> resolver;
    std::unique_ptr<BayesDictionary> dictionary;
    GreylistStore greylist;
    GuardState guard;
    PipelineContext ctx;
};

int build_runtime(const CommonOptions& opts, const std::string& greylist_override, Runtime& rt) {
    int rc = load_config(opts, rt.cfg);
    if (rc != kExitOk) return rc;

    std::string err;
    auto ctx = make_pipeline_context(rt.cfg, &err);
    if (!ctx) {
        std::cerr << "error: " << err << "\n";
        return kExitUsage;
    }
    rt.ctx = std::move(*ctx);

    rt.resolver = make_resolver(rt.cfg, &err);
    if (!rt.resolver) {
        std::cerr << "error: " << err << "\n";
        return kExitUsage;
    }
    rt.ctx.resolver = rt.resolver.get();

    std::string greylist_path =
        greylist_override.empty() ? rt.cfg.greylist.path : greylist_override;
    if (!greylist_path.empty()) {
        int64_t now = static_cast<int64_t>(std::time(nullptr));
        if (!rt.greylist.open(greylist_path, now, rt.cfg.greylist.prune_days, &err)) {
            std::cerr << "error: " << err << "\n";
            return kExitOperational;
        }
    }
    rt.ctx.greylist = &rt.greylist;

    if (!rt.cfg.bayes.dictionary.empty()) {
        auto dict = load_dictionary(rt.cfg.bayes.dictionary, &err);
        if (!dict) {
            std::cerr << "error: " << err << "\n";
            return kExitOperational;
        }
        rt.dictionary = std::make_unique<BayesDictionary>(std::move(*dict));
        rt.ctx.dictionary = rt.dictionary.get();
    }

    rt.guard.load(rt.cfg.guard.quarantine_path, rt.cfg.guard.alias_path);
    rt.ctx.guard = &rt.guard;
    return kExitOk;
}

bool write_text_file(const fs::path& path, const std::string& text, std::string* err) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) {
        if (err) *err = "cannot write " + path.string();
        return false;
    }
    out << text;
    if (!out) {
        if (err) *err = "short write to " + path.string();
        return false;
    }
    return true;
}

int cmd_filter(const CommonOptions& opts, const std::string& in_dir, const std::string& inbox_dir,
               const std::string& trap_dir, const std::string& report_path,
               const std::string& greylist_path, bool serial) {
    Runtime rt;
    int rc = build_runtime(opts, greylist_path, rt);
    if (rc != kExitOk) return rc;

    if (!fs::is_directory(in_dir)) {
        std::cerr << "error: corpus directory " << in_dir << " does not exist\n";
        return kExitOperational;
    }
    std::vector<std::string> errors;
    auto messages = load_corpus_dir(in_dir, &errors);
    for (const auto& e : errors) std::cerr << "warning: " << e << "\n";

    auto verdicts = filter_corpus(messages, rt.ctx,
                                  serial ? ExecMode::Serial : ExecMode::Parallel);

    std::error_code ec;
    fs::create_directories(inbox_dir, ec);
    fs::create_directories(trap_dir, ec);
    uint64_t delivered = 0, trapped = 0, rejected = 0, seq = 0;
    std::vector<SessionEvent> events;
    events.reserve(messages.size());
    for (size_t i = 0; i < messages.size(); ++i) {
        events.push_back(to_session_event(messages[i], verdicts[i]));
        char name[32];
        std::snprintf(name, sizeof(name), "m%06llu.msg", static_cast<unsigned long long>(seq++));
        switch (verdicts[i].final) {
            case FinalVerdict::Delivered:
                ++delivered;
                write_message_file(fs::path(inbox_dir) / name, messages[i]);
                break;
            case FinalVerdict::Quarantined:
                ++trapped;
                write_message_file(fs::path(trap_dir) / name, messages[i]);
                break;
            case FinalVerdict::Rejected:
            case FinalVerdict::TempRejected:
                ++rejected;
                break;
        }
    }

    auto sessions = record_sessions(std::move(events), rt.cfg.pipeline.session_secs);
    std::string err;
    if (!report_path.empty() &&
        !write_text_file(report_path, sessions_to_csv(sessions), &err)) {
        std::cerr << "error: " << err << "\n";
        return kExitOperational;
    }

    // trap retention sweep (spam auto-deletes after the configured days)
    std::vector<std::string> prune_errors;
    int pruned = prune_trap(trap_dir, static_cast<int64_t>(std::time(nullptr)),
                            rt.cfg.policy.trap_retention_days, &prune_errors);
    for (const auto& e : prune_errors) std::cerr << "warning: " << e << "\n";

    std::cout << "processed " << messages.size() << " messages: " << delivered << " delivered, "
              << trapped << " trapped, " << rejected << " rejected\n";
    uint64_t dropped = rt.ctx.surbl_dropped_domains.load();
    if (dropped > 0)
        std::cout << "surbl: " << dropped << " URL domains beyond the per-message cap ignored\n";
    if (pruned > 0) std::cout << "pruned " << pruned << " expired trap messages\n";
    return kExitOk;
}

int cmd_serve(const CommonOptions& opts) {
    Runtime rt;
    int rc = build_runtime(opts, "", rt);
    if (rc != kExitOk) return rc;

    auto listen_parts = split(rt.cfg.serve.listen, ':');
    auto ip = Ipv4::parse(listen_parts[0]);
    int port = listen_parts.size() == 2 ? std::atoi(listen_parts[1].c_str()) : 2525;
    if (!ip || port < 0 || port > 65535) {
        std::cerr << "error: serve.listen must be <ip>:<port>\n";
        return kExitUsage;
    }

    SmtpServerConfig scfg;
    scfg.bind_ip = listen_parts[0];
    scfg.port = static_cast<uint16_t>(port);
    scfg.max_data_bytes = rt.cfg.serve.max_data_bytes;
    scfg.inbox_dir = rt.cfg.serve.inbox_dir;
    scfg.trap_dir = rt.cfg.serve.trap_dir;
    scfg.alerts_path = rt.cfg.guard.alerts_path;
    scfg.auto_mitigate = rt.cfg.guard.auto_mitigate;

    MonitorConfig mcfg;
    mcfg.window_secs = rt.cfg.guard.window_secs;
    mcfg.storm_windows = rt.cfg.guard.storm_windows;
    mcfg.queue_capacity = rt.cfg.guard.queue_capacity;
    mcfg.queue_fraction = rt.cfg.guard.queue_fraction;
    mcfg.latency_factor = rt.cfg.guard.latency_factor;
    mcfg.latency_baseline_ms = rt.cfg.guard.latency_baseline_ms;
    Monitor monitor(mcfg);

    if (fs::is_directory(rt.cfg.serve.trap_dir)) {
        std::vector<std::string> prune_errors;
        int pruned = prune_trap(rt.cfg.serve.trap_dir, static_cast<int64_t>(std::time(nullptr)),
                                rt.cfg.policy.trap_retention_days, &prune_errors);
        for (const auto& e : prune_errors) std::cerr << "warning: " << e << "\n";
        if (pruned > 0) std::cout << "pruned " << pruned << " expired trap messages\n";
    }

    SmtpServer server(scfg, rt.ctx, &monitor, &rt.guard);
    std::string err;
    if (!server.start(&err)) {
        std::cerr << "error: " << err << "\n";
        return kExitOperational;
    }
    std::cout << "listening on " << scfg.bind_ip << ":" << server.port() << "\n";
    // Foreground: "quit" on stdin stops; without a usable stdin, run until killed.
    std::string line;
    while (true) {
        if (std::getline(std::cin, line)) {
            if (line == "quit" || line == "stop") break;
        } else {
            std::this_thread::sleep_for(std::chrono::hours(1));
        }
    }
    server.stop();
    return kExitOk;
}

int cmd_simulate(const CommonOptions& opts, std::optional<uint64_t> seed,
                 const std::string& out_path) {
    AppConfig cfg;
    CommonOptions local = opts;
    int rc = load_config(local, cfg);
    if (rc != kExitOk) return rc;
    if (seed) cfg.sim.seed = *seed;

    SimReport report = run_experiment(cfg);
    std::string err;
    if (!out_path.empty() && !write_text_file(out_path, report.csv(), &err)) {
        std::cerr << "error: " << err << "\n";
        return kExitOperational;
    }
    std::cout << "simulated " << cfg.sim.duration_minutes << " minutes, "
              << report.sessions.size() << " sessions\n"
              << "emitted " << report.totals.emitted << " (worm " << report.totals.emitted_worm
              << "), delivered " << report.totals.delivered << ", trapped "
              << report.totals.trapped << ", rejected " << report.totals.rejected << "\n"
              << "infected hosts at end: " << report.final_infected << "\n";
    if (report.first_dos_minute >= 0)
        std::cout << "dos_active first at minute " << report.first_dos_minute << "\n";
    else
        std::cout << "no DoS condition during the run\n";
    return kExitOk;
}

int cmd_train(const std::string& spam_dir, const std::string& ham_dir,
              const std::string& out_path, bool serial) {
    for (const auto& dir : {spam_dir, ham_dir}) {
        if (!fs::is_directory(dir)) {
            std::cerr << "error: " << dir << " is not a directory\n";
            return kExitOperational;
        }
    }
    std::vector<std::pair<Message, MailLabel>> corpus;
    std::vector<std::string> errors;
    for (auto& msg : load_corpus_dir(spam_dir, &errors)) corpus.emplace_back(std::move(msg), MailLabel::Spam);
    for (auto& msg : load_corpus_dir(ham_dir, &errors)) corpus.emplace_back(std::move(msg), MailLabel::Ham);
    for (const auto& e : errors) std::cerr << "warning: " << e << "\n";
    if (corpus.empty()) {
        std::cerr << "error: no training messages found\n";
        return kExitOperational;
    }

    BayesDictionary dict =
        train_corpus(corpus, serial ? ExecMode::Serial : ExecMode::Parallel);
    std::string err;
    if (!save_dictionary(dict, out_path, &err)) {
        std::cerr << "error: " << err << "\n";
        return kExitOperational;
    }
    std::cout << "trained on " << dict.spam_msgs << " spam / " << dict.ham_msgs
              << " ham messages, " << dict.spam_counts.size() << "+" << dict.ham_counts.size()
              << " tokens -> " << out_path << "\n";
    return kExitOk;
}

int cmd_guard_status(const CommonOptions& opts) {
    AppConfig cfg;
    int rc = load_config(opts, cfg);
    if (rc != kExitOk) return rc;
    GuardState guard;
    guard.load(cfg.guard.quarantine_path, cfg.guard.alias_path);

    std::cout << "quarantined hosts:\n";
    auto hosts = guard.quarantined_hosts();
    if (hosts.empty()) std::cout << "  (none)\n";
    for (const auto& ip : hosts) std::cout << "  " << ip.to_string() << "\n";

    std::cout << "group aliases:\n";
    if (guard.aliases().empty()) std::cout << "  (none)\n";
    for (const auto& [old_key, entry] : guard.aliases().entries())
        std::cout << "  " << old_key << " -> " << entry.new_address << " ("
                  << (entry.mode == AliasMode::SilentDropOld ? "drop" : "bounce") << ")\n";

    auto alerts = load_alerts(cfg.guard.alerts_path);
    std::cout << "alerts (" << alerts.size() << " total";
    if (alerts.size() > 10) std::cout << ", last 10";
    std::cout << "):\n";
    if (alerts.empty()) std::cout << "  (none)\n";
    size_t start = alerts.size() > 10 ? alerts.size() - 10 : 0;
    for (size_t i = start; i < alerts.size(); ++i)
        std::cout << "  " << alerts[i].raised_at << " " << alert_kind_name(alerts[i].kind) << " "
                  << alerts[i].subject << ": " << alerts[i].evidence << "\n";
    return kExitOk;
}

int cmd_guard_remap(const CommonOptions& opts, const std::string& address) {
    AppConfig cfg;
    int rc = load_config(opts, cfg);
    if (rc != kExitOk) return rc;
    auto addr = EmailAddress::parse(address);
    if (!addr) {
        std::cerr << "error: not an email address: " << address << "\n";
        return kExitUsage;
    }
    GuardState guard;
    guard.load(cfg.guard.quarantine_path, cfg.guard.alias_path);
    AliasMode mode =
        cfg.guard.remap_mode == "drop" ? AliasMode::SilentDropOld : AliasMode::BounceOld;
    auto outcome = guard.remap_group(*addr, static_cast<int64_t>(std::time(nullptr)), mode);
    if (!outcome.ok) {
        std::cerr << "error: " << address << ": " << outcome.error << "\n";
        return kExitOperational;
    }
    std::string err;
    if (!guard.save(cfg.guard.quarantine_path, cfg.guard.alias_path, &err)) {
        std::cerr << "error: " << err << "\n";
        return kExitOperational;
    }
    std::cout << addr->key() << " -> " << outcome.new_address << "\n";
    return kExitOk;
}

int cmd_guard_host(const CommonOptions& opts, const std::string& ip_text, bool quarantine) {
    AppConfig cfg;
    int rc = load_config(opts, cfg);
    if (rc != kExitOk) return rc;
    auto ip = Ipv4::parse(ip_text);
    if (!ip) {
        std::cerr << "error: not an IPv4 address: " << ip_text << "\n";
        return kExitUsage;
    }
    GuardState guard;
    guard.load(cfg.guard.quarantine_path, cfg.guard.alias_path);
    bool changed = quarantine ? guard.quarantine_host(*ip) : guard.release_host(*ip);
    std::string err;
    if (!guard.save(cfg.guard.quarantine_path, cfg.guard.alias_path, &err)) {
        std::cerr << "error: " << err << "\n";
        return kExitOperational;
    }
    std::cout << ip->to_string() << (quarantine ? " quarantined" : " released")
              << (changed ? "" : " (no change)") << "\n";
    return kExitOk;
}

struct SessionCsv {
    bool has_dos = false;
    std::vector<std::vector<std::string>> rows;  // without header
};

std::optional<SessionCsv> read_session_csv(const std::string& path, std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open " + path;
        return std::nullopt;
    }
    std::string header;
    if (!std::getline(in, header)) {
        if (err) *err = path + " is empty";
        return std::nullopt;
    }
    SessionCsv csv;
    if (header == kSessionCsvHeader) {
        csv.has_dos = false;
    } else if (header == std::string(kSessionCsvHeader) + ",dos_active") {
        csv.has_dos = true;
    } else {
        if (err) *err = path + ": unexpected schema \"" + header + "\"";
        return std::nullopt;
    }
    size_t expected = split(header, ',').size();
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != expected) {
            if (err) *err = path + ": row has " + std::to_string(fields.size()) + " fields";
            return std::nullopt;
        }
        csv.rows.push_back(std::move(fields));
    }
    return csv;
}

void print_session_table(const SessionCsv& csv) {
    std::printf("%-12s %10s %10s %10s\n", "session", "delivered", "trapped", "rejected");
    for (const auto& row : csv.rows)
        std::printf("%-12s %10s %10s %10s\n", row[0].c_str(), row[1].c_str(), row[2].c_str(),
                    row[3].c_str());
}

uint64_t total_delivered(const SessionCsv& csv) {
    uint64_t total = 0;
    for (const auto& row : csv.rows) total += std::strtoull(row[1].c_str(), nullptr, 10);
    return total;
}

int cmd_report(const std::string& in_path, const std::string& baseline_path,
               const std::string& treated_path) {
    std::string err;
    if (!in_path.empty()) {
        auto csv = read_session_csv(in_path, &err);
        if (!csv) {
            std::cerr << "error: " << err << "\n";
            return kExitUsage;
        }
        print_session_table(*csv);
        return kExitOk;
    }
    auto baseline = read_session_csv(baseline_path, &err);
    if (!baseline) {
        std::cerr << "error: " << err << "\n";
        return kExitUsage;
    }
    auto treated = read_session_csv(treated_path, &err);
    if (!treated) {
        std::cerr << "error: " << err << "\n";
        return kExitUsage;
    }
    std::cout << "baseline (" << baseline_path << "):\n";
    print_session_table(*baseline);
    std::cout << "treated (" << treated_path << "):\n";
    print_session_table(*treated);

    uint64_t base = total_delivered(*baseline);
    uint64_t treat = total_delivered(*treated);
    if (base == 0) {
        std::cout << "reduction: n/a (baseline delivered nothing)\n";
    } else {
        double reduction = 100.0 * (static_cast<double>(base) - static_cast<double>(treat)) /
                           static_cast<double>(base);
        std::printf("reduction: %.1f%%\n", reduction);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spam-borne DDoS defense pipeline"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOptions opts;

    auto add_common = [&opts](CLI::App* sub, bool with_zone = true) {
        sub->add_option("--config", opts.config_path,
                        "INI config file (falls back to $SPAMWALL_CONFIG)");
        sub->add_option("--set", opts.overrides, "override a config key: section.key=value");
        if (with_zone)
            sub->add_option("--zone", opts.zone_path, "static DNS zone file (overrides dns.zone_file)");
    };

    // filter
    auto* filter = app.add_subcommand("filter", "run a mail corpus through the pipeline");
    std::string in_dir, inbox_dir = "inbox", trap_dir = "trap", report_path, greylist_path;
    bool serial = false;
    filter->add_option("--in", in_dir, "corpus directory")->required();
    filter->add_option("--out-inbox", inbox_dir, "delivered-mail directory");
    filter->add_option("--out-trap", trap_dir, "quarantine directory");
    filter->add_option("--report", report_path, "session report CSV");
    filter->add_option("--greylist", greylist_path, "greylist log (overrides greylist.path)");
    filter->add_flag("--serial", serial, "use the serial reference path");
    add_common(filter);

    // serve
    auto* serve = app.add_subcommand("serve", "run the SMTP front end");
    add_common(serve);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run the worm-propagation simulator");
    std::string sim_out;
    std::optional<uint64_t> sim_seed;
    uint64_t seed_value = 0;
    auto* seed_opt = simulate->add_option("--seed", seed_value, "RNG seed (overrides sim.seed)");
    simulate->add_option("--out", sim_out, "session report CSV");
    add_common(simulate, false);

    // train
    auto* train_cmd = app.add_subcommand("train", "build a classifier dictionary");
    std::string spam_dir, ham_dir, dict_out;
    bool train_serial = false;
    train_cmd->add_option("--spam", spam_dir, "spam corpus directory")->required();
    train_cmd->add_option("--ham", ham_dir, "ham corpus directory")->required();
    train_cmd->add_option("--out", dict_out, "dictionary output file")->required();
    train_cmd->add_flag("--serial", train_serial, "use the serial reference path");

    // guard
    auto* guard_cmd = app.add_subcommand("guard", "monitoring and mitigation state");
    auto* status = guard_cmd->add_subcommand("status", "show aliases, quarantined hosts, alerts");
    add_common(status, false);
    auto* remap = guard_cmd->add_subcommand("remap", "remap a group address");
    std::string remap_addr;
    remap->add_option("address", remap_addr, "group address to remap")->required();
    add_common(remap, false);
    auto* quarantine = guard_cmd->add_subcommand("quarantine", "quarantine a host");
    std::string quarantine_ip;
    quarantine->add_option("ip", quarantine_ip, "host IPv4 address")->required();
    add_common(quarantine, false);
    auto* release = guard_cmd->add_subcommand("release", "release a quarantined host");
    std::string release_ip;
    release->add_option("ip", release_ip, "host IPv4 address")->required();
    add_common(release, false);
    guard_cmd->require_subcommand(1);

    // report
    auto* report = app.add_subcommand("report", "summarize session CSVs");
    std::string report_in, report_baseline, report_treated;
    report->add_option("--in", report_in, "single session CSV");
    report->add_option("--baseline", report_baseline, "baseline session CSV");
    report->add_option("--treated", report_treated, "treated session CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (seed_opt->count() > 0) sim_seed = seed_value;

    try {
        if (*filter)
            return cmd_filter(opts, in_dir, inbox_dir, trap_dir, report_path, greylist_path,
                              serial);
        if (*serve) return cmd_serve(opts);
        if (*simulate) return cmd_simulate(opts, sim_seed, sim_out);
        if (*train_cmd) return cmd_train(spam_dir, ham_dir, dict_out, train_serial);
        if (*guard_cmd) {
            if (*status) return cmd_guard_status(opts);
            if (*remap) return cmd_guard_remap(opts, remap_addr);
            if (*quarantine) return cmd_guard_host(opts, quarantine_ip, true);
            if (*release) return cmd_guard_host(opts, release_ip, false);
        }
        if (*report) {
            bool pair = !report_baseline.empty() && !report_treated.empty();
            bool single = !report_in.empty();
            if (single == pair) {
                std::cerr << "error: report needs --in or both --baseline and --treated\n";
                return kExitUsage;
            }
            return cmd_report(report_in, report_baseline, report_treated);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOperational;
    }
    return kExitUsage;
}
