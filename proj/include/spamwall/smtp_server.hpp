#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "spamwall/guard.hpp"
#include "spamwall/pipeline.hpp"

namespace spamwall {

struct SmtpServerConfig {
    std::string bind_ip = "127.0.0.1";
    uint16_t port = 2525;  // 0 binds an ephemeral port
    int64_t max_data_bytes = 1024 * 1024;
    std::filesystem::path inbox_dir;
    std::filesystem::path trap_dir;
    std::string banner_host = "spamwall";
    std::string alerts_path;     // empty: alerts not persisted
    bool auto_mitigate = false;  // GroupMailStorm remaps all configured groups
};

/// Minimal SMTP listener fronting the pipeline: HELO/EHLO, MAIL, RCPT, DATA,
/// RSET, NOOP, QUIT, plus XCLIENT ADDR= for proxied client addresses.
/// Connection stages run per recipient at RCPT time; data stages after DATA.
class SmtpServer {
public:
    SmtpServer(SmtpServerConfig config, const PipelineContext& ctx, Monitor* monitor = nullptr,
               GuardState* guard = nullptr);
    ~SmtpServer();

    bool start(std::string* err = nullptr);
    void stop();
    uint16_t port() const { return port_; }

    uint64_t delivered_count() const { return delivered_.load(); }
    uint64_t trapped_count() const { return trapped_.load(); }

private:
    void accept_loop();
    void handle_connection(int fd, Ipv4 peer_ip);
    bool write_sink(const Message& msg, bool trapped);

    SmtpServerConfig config_;
    const PipelineContext& ctx_;
    Monitor* monitor_;
    GuardState* guard_;

    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;

    std::atomic<uint64_t> delivered_{0};
    std::atomic<uint64_t> trapped_{0};
    std::atomic<uint64_t> sink_seq_{0};
};

}  // namespace spamwall
