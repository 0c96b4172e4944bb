#include "spamwall/smtp_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <ctime>

namespace spamwall {

namespace {

bool send_all(int fd, std::string_view text) {
    size_t off = 0;
    while (off < text.size()) {
        ssize_t n = ::send(fd, text.data() + off, text.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<size_t>(n);
    }
    return true;
}

bool reply(int fd, std::string_view line) { return send_all(fd, std::string(line) + "\r\n"); }

// Extracts the address from "MAIL FROM:<a@b>" / "RCPT TO:<a@b>" argument text.
std::optional<EmailAddress> parse_path(std::string_view arg) {
    std::string s = trim(arg);
    if (!s.empty() && s.front() == ':') s = trim(std::string_view(s).substr(1));
    return EmailAddress::parse(s);
}

struct LineReader {
    int fd;
    std::string buffer;

    std::optional<std::string> next() {
        while (true) {
            size_t nl = buffer.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            char chunk[4096];
            ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
            if (n <= 0) return std::nullopt;
            buffer.append(chunk, static_cast<size_t>(n));
        }
    }
};

}  // namespace

SmtpServer::SmtpServer(SmtpServerConfig config, const PipelineContext& ctx, Monitor* monitor,
                       GuardState* guard)
    : config_(std::move(config)), ctx_(ctx), monitor_(monitor), guard_(guard) {}

SmtpServer::~SmtpServer() { stop(); }

bool SmtpServer::start(std::string* err) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        if (err) *err = "socket: " + std::string(std::strerror(errno));
        return false;
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(config_.port);
    if (inet_pton(AF_INET, config_.bind_ip.c_str(), &addr.sin_addr) != 1) {
        if (err) *err = "bad bind address " + config_.bind_ip;
        ::close(listen_fd_);
        listen_fd_ = -1;
        return false;
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
        ::listen(listen_fd_, 16) < 0) {
        if (err) *err = "bind/listen: " + std::string(std::strerror(errno));
        ::close(listen_fd_);
        listen_fd_ = -1;
        return false;
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    std::error_code ec;
    if (!config_.inbox_dir.empty()) std::filesystem::create_directories(config_.inbox_dir, ec);
    if (!config_.trap_dir.empty()) std::filesystem::create_directories(config_.trap_dir, ec);

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return true;
}

void SmtpServer::stop() {
    if (!running_.exchange(false)) {
        if (accept_thread_.joinable()) accept_thread_.join();
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lock(workers_mu_);
    for (auto& t : workers_)
        if (t.joinable()) t.join();
    workers_.clear();
}

void SmtpServer::accept_loop() {
    while (running_) {
        sockaddr_in peer{};
        socklen_t len = sizeof(peer);
        int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        timeval tv{30, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        Ipv4 peer_ip{ntohl(peer.sin_addr.s_addr)};
        std::lock_guard lock(workers_mu_);
        workers_.emplace_back([this, fd, peer_ip] { handle_connection(fd, peer_ip); });
    }
}

bool SmtpServer::write_sink(const Message& msg, bool trapped) {
    const auto& dir = trapped ? config_.trap_dir : config_.inbox_dir;
    if (dir.empty()) return true;
    uint64_t seq = sink_seq_.fetch_add(1);
    char name[32];
    std::snprintf(name, sizeof(name), "m%06llu.msg", static_cast<unsigned long long>(seq));
    return write_message_file(dir / name, msg);
}

void SmtpServer::handle_connection(int fd, Ipv4 peer_ip) {
    LineReader reader{fd, {}};
    reply(fd, "220 " + config_.banner_host + " ESMTP");

    std::string helo;
    Ipv4 client_ip = peer_ip;
    std::optional<EmailAddress> mail_from;
    std::vector<EmailAddress> rcpts;
    std::array<StageOutcome, kStageOrder.size()> connection_outcomes{};
    bool have_connection_outcomes = false;

    auto reset_mail = [&] {
        mail_from.reset();
        rcpts.clear();
        have_connection_outcomes = false;
    };

    while (running_) {
        auto line = reader.next();
        if (!line) break;
        auto sp = line->find(' ');
        std::string verb = to_lower(line->substr(0, sp));
        std::string arg = sp == std::string::npos ? "" : line->substr(sp + 1);

        if (verb == "quit") {
            reply(fd, "221 2.0.0 bye");
            break;
        }
        if (verb == "noop") {
            reply(fd, "250 2.0.0 ok");
            continue;
        }
        if (verb == "rset") {
            reset_mail();
            reply(fd, "250 2.0.0 ok");
            continue;
        }
        if (verb == "helo" || verb == "ehlo") {
            if (trim(arg).empty()) {
                reply(fd, "501 5.5.4 hostname required");
                continue;
            }
            helo = trim(arg);
            reset_mail();
            if (verb == "ehlo")
                reply(fd, "250-" + config_.banner_host + "\r\n250 XCLIENT ADDR");
            else
                reply(fd, "250 " + config_.banner_host);
            continue;
        }
        if (verb == "xclient") {
            // Proxy handoff: XCLIENT ADDR=<ip> substitutes the client address.
            bool ok = false;
            for (const auto& token : split_ws(arg)) {
                if (to_lower(token).rfind("addr=", 0) == 0) {
                    if (auto ip = Ipv4::parse(std::string_view(token).substr(5))) {
                        client_ip = *ip;
                        ok = true;
                    }
                }
            }
            reset_mail();
            reply(fd, ok ? "250 2.0.0 ok" : "501 5.5.4 bad XCLIENT argument");
            continue;
        }
        if (verb == "mail") {
            if (helo.empty()) {
                reply(fd, "503 5.5.1 send HELO first");
                continue;
            }
            if (mail_from) {
                reply(fd, "503 5.5.1 nested MAIL command");
                continue;
            }
            std::string rest = trim(arg);
            if (to_lower(rest).rfind("from", 0) != 0) {
                reply(fd, "501 5.5.4 syntax: MAIL FROM:<address>");
                continue;
            }
            auto addr = parse_path(std::string_view(rest).substr(4));
            if (!addr) {
                reply(fd, "501 5.1.7 bad sender address");
                continue;
            }
            mail_from = *addr;
            reply(fd, "250 2.1.0 ok");
            continue;
        }
        if (verb == "rcpt") {
            if (!mail_from) {
                reply(fd, "503 5.5.1 need MAIL before RCPT");
                continue;
            }
            std::string rest = trim(arg);
            if (to_lower(rest).rfind("to", 0) != 0) {
                reply(fd, "501 5.5.4 syntax: RCPT TO:<address>");
                continue;
            }
            auto addr = parse_path(std::string_view(rest).substr(2));
            if (!addr) {
                reply(fd, "501 5.1.3 bad recipient address");
                continue;
            }
            // Connection stages run per recipient, greylist keyed on the triplet.
            Message probe;
            probe.envelope = Envelope{helo, client_ip, *mail_from, {*addr}};
            probe.header_from = *mail_from;
            probe.received_at = static_cast<int64_t>(std::time(nullptr));

            std::array<StageOutcome, kStageOrder.size()> outcomes{};
            for (size_t i = 0; i < kStageOrder.size(); ++i)
                outcomes[i] = StageOutcome{kStageOrder[i], Decision::Skipped, ""};
            bool accepted = true;
            for (size_t i = 0; i < kConnectionStages && accepted; ++i) {
                outcomes[i] = eval_stage(kStageOrder[i], probe, ctx_);
                switch (outcomes[i].decision) {
                    case Decision::Reject:
                        reply(fd, "550 5.7.1 " + outcomes[i].detail);
                        accepted = false;
                        break;
                    case Decision::TempReject:
                        reply(fd, "451 4.7.1 greylisted, try again later");
                        accepted = false;
                        break;
                    case Decision::Quarantine:
                        // alias silent-drop: accept the recipient, trap later
                        accepted = true;
                        i = kConnectionStages;
                        break;
                    default:
                        break;
                }
            }
            if (!accepted) continue;
            rcpts.push_back(*addr);
            if (!have_connection_outcomes) {
                connection_outcomes = outcomes;
                have_connection_outcomes = true;
            }
            reply(fd, "250 2.1.5 ok");
            continue;
        }
        if (verb == "data") {
            if (rcpts.empty()) {
                reply(fd, "503 5.5.1 need RCPT before DATA");
                continue;
            }
            reply(fd, "354 end data with <CRLF>.<CRLF>");
            std::string data;
            bool oversized = false;
            while (true) {
                auto body_line = reader.next();
                if (!body_line) { data.clear(); break; }
                if (*body_line == ".") break;
                std::string_view content = *body_line;
                if (content.rfind("..", 0) == 0) content.remove_prefix(1);  // dot unstuffing
                if (static_cast<int64_t>(data.size() + content.size() + 1) >
                    config_.max_data_bytes)
                    oversized = true;
                else
                    data.append(content).push_back('\n');
            }
            if (oversized) {
                reply(fd, "552 5.3.4 message exceeds size limit");
                reset_mail();
                continue;
            }

            int64_t now = static_cast<int64_t>(std::time(nullptr));
            Envelope env{helo, client_ip, *mail_from, rcpts};
            ParseError perr;
            auto msg = parse_message(data, env, now, &perr);
            if (!msg) {
                reply(fd, "550 5.6.0 " + perr.reason);
                reset_mail();
                continue;
            }

            auto outcomes = connection_outcomes;
            bool terminated = false;
            for (size_t i = kConnectionStages; i < kStageOrder.size() && !terminated; ++i) {
                outcomes[i] = eval_stage(kStageOrder[i], *msg, ctx_);
                if (outcomes[i].decision == Decision::Reject ||
                    outcomes[i].decision == Decision::TempReject)
                    terminated = true;
            }
            Verdict verdict = assemble_verdict(outcomes);

            if (monitor_) {
                bool to_group = false;
                for (const auto& rcpt : rcpts)
                    if (ctx_.group_ids.count(rcpt.key())) to_group = true;
                auto alerts = monitor_->observe(
                    TrafficEvent{now, mail_from->key(), to_group, 0.0, 0});
                if (!alerts.empty() && !config_.alerts_path.empty())
                    append_alerts(config_.alerts_path, alerts);
                if (config_.auto_mitigate && guard_) {
                    for (const auto& alert : alerts)
                        if (alert.kind == AlertKind::GroupMailStorm)
                            for (const auto& gid : ctx_.group_ids)
                                guard_->remap_group(*EmailAddress::parse(gid), now,
                                                    AliasMode::BounceOld);
                }
            }

            switch (verdict.final) {
                case FinalVerdict::Delivered:
                    write_sink(*msg, false);
                    delivered_.fetch_add(1);
                    reply(fd, "250 2.0.0 ok, delivered");
                    break;
                case FinalVerdict::Quarantined:
                    write_sink(*msg, true);
                    trapped_.fetch_add(1);
                    reply(fd, "250 2.0.0 ok");
                    break;
                case FinalVerdict::Rejected:
                    reply(fd, "550 5.7.1 " + std::string(final_verdict_name(verdict.final)));
                    break;
                case FinalVerdict::TempRejected:
                    reply(fd, "451 4.7.1 try again later");
                    break;
            }
            reset_mail();
            continue;
        }
        reply(fd, "500 5.5.2 command not recognized");
    }
    ::close(fd);
}

}  // namespace spamwall
