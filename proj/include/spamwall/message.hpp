#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spamwall/util.hpp"

namespace spamwall {

struct EmailAddress {
    std::string local_part;  // case preserved
    std::string domain;      // lowercased

    static std::optional<EmailAddress> parse(std::string_view text);
    std::string to_string() const { return local_part + "@" + domain; }
    /// Canonical lowercase form used wherever addresses act as keys.
    std::string key() const { return to_lower(local_part) + "@" + domain; }

    bool operator==(const EmailAddress& o) const { return key() == o.key(); }
};

struct Envelope {
    std::string helo_host;
    Ipv4 client_ip;
    EmailAddress mail_from;
    std::vector<EmailAddress> rcpt_to;  // non-empty
};

struct Attachment {
    std::string filename;
    uint64_t size_bytes = 0;
    std::string declared_type;
};

struct Message {
    Envelope envelope;
    std::string subject;
    EmailAddress header_from;
    std::string body_text;
    std::vector<Attachment> attachments;
    int64_t received_at = 0;  // seconds since epoch
};

struct ParseError {
    std::string reason;
};

/// Parses the simplified wire format: header block, blank line, body.
/// Attachment blocks start at a "--ATTACH filename=<name> size=<bytes>" line
/// and run to the next delimiter or end of input; their lines are not body text.
std::optional<Message> parse_message(std::string_view raw, const Envelope& envelope,
                                     int64_t now, ParseError* err = nullptr);

struct UrlHost {
    std::string host;  // lowercased
    bool is_ip_literal = false;

    bool operator==(const UrlHost&) const = default;
};

/// Every http/https URL host plus bare "www.<domain>" tokens, lowercased,
/// de-duplicated, in first-occurrence order.
std::vector<UrlHost> extract_urls(std::string_view body_text);

/// Last two labels, or last three when the second-to-last label is a common
/// second-level name under a two-letter TLD (example.co.uk stays whole).
std::string registered_domain(std::string_view host);

/// Corpus file form: "ENVELOPE [t=<epoch>] ip=<ip> helo=<host> from=<addr> to=<a>[,...]"
/// followed by the raw message format above.
std::string serialize_message(const Message& msg);
std::optional<Message> parse_corpus_text(std::string_view text, int64_t default_received_at,
                                         ParseError* err = nullptr);
std::optional<Message> load_message_file(const std::filesystem::path& path,
                                         int64_t default_received_at, ParseError* err = nullptr);
bool write_message_file(const std::filesystem::path& path, const Message& msg);

/// Loads every regular file in the directory, sorted by filename; received_at
/// falls back to file order when the ENVELOPE line carries no t= token.
std::vector<Message> load_corpus_dir(const std::filesystem::path& dir,
                                     std::vector<std::string>* errors = nullptr);

}  // namespace spamwall
