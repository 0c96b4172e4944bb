#include "spamwall/message.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace spamwall {

namespace {

bool fail(ParseError* err, std::string reason) {
    if (err) err->reason = std::move(reason);
    return false;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < text.size()) lines.emplace_back(text.substr(start));
            break;
        }
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = pos + 1;
    }
    return lines;
}

bool is_attach_delimiter(std::string_view line) { return line.rfind("--ATTACH", 0) == 0; }

bool parse_attach_line(std::string_view line, Attachment& out, ParseError* err) {
    auto tokens = split_ws(line);
    // tokens[0] == "--ATTACH"
    bool have_name = false, have_size = false;
    for (size_t i = 1; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (t.rfind("filename=", 0) == 0) {
            out.filename = t.substr(9);
            have_name = !out.filename.empty();
        } else if (t.rfind("size=", 0) == 0) {
            std::string_view num{t};
            num.remove_prefix(5);
            uint64_t v = 0;
            auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
            if (ec != std::errc{} || p != num.data() + num.size())
                return fail(err, "malformed attachment size: " + t);
            out.size_bytes = v;
            have_size = true;
        } else if (t.rfind("type=", 0) == 0) {
            out.declared_type = t.substr(5);
        } else {
            return fail(err, "malformed attachment delimiter token: " + t);
        }
    }
    if (!have_name || !have_size)
        return fail(err, "attachment delimiter missing filename= or size=");
    return true;
}

bool host_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
}

// Host candidates need at least one dot and non-empty labels.
bool plausible_host(std::string_view host) {
    if (host.empty() || host.find('.') == std::string_view::npos) return false;
    for (const auto& label : split(host, '.'))
        if (label.empty()) return false;
    return true;
}

void push_host(std::vector<UrlHost>& out, std::set<std::string>& seen, std::string_view raw) {
    while (!raw.empty() && (raw.back() == '.' || raw.back() == '-')) raw.remove_suffix(1);
    if (!plausible_host(raw)) return;
    std::string host = to_lower(raw);
    if (!seen.insert(host).second) return;
    bool is_ip = Ipv4::parse(host).has_value();
    out.push_back(UrlHost{std::move(host), is_ip});
}

}  // namespace

std::optional<EmailAddress> EmailAddress::parse(std::string_view text) {
    std::string s = trim(text);
    // Accept "Display <addr>" by taking the bracketed part.
    size_t lt = s.find('<');
    if (lt != std::string::npos) {
        size_t gt = s.find('>', lt);
        if (gt == std::string::npos) return std::nullopt;
        s = trim(std::string_view(s).substr(lt + 1, gt - lt - 1));
    }
    size_t at = s.find('@');
    if (at == std::string::npos || at == 0 || at + 1 >= s.size()) return std::nullopt;
    if (s.find('@', at + 1) != std::string::npos) return std::nullopt;
    std::string local = s.substr(0, at);
    std::string domain = to_lower(std::string_view(s).substr(at + 1));
    for (char c : domain)
        if (std::isspace(static_cast<unsigned char>(c))) return std::nullopt;
    return EmailAddress{std::move(local), std::move(domain)};
}

std::optional<Message> parse_message(std::string_view raw, const Envelope& envelope,
                                     int64_t now, ParseError* err) {
    auto lines = split_lines(raw);
    size_t blank = 0;
    bool found_blank = false;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            blank = i;
            found_blank = true;
            break;
        }
    }
    if (!found_blank) {
        fail(err, "missing blank-line separator between headers and body");
        return std::nullopt;
    }

    Message msg;
    msg.envelope = envelope;
    msg.received_at = now;

    bool have_from = false;
    for (size_t i = 0; i < blank; ++i) {
        const std::string& line = lines[i];
        size_t colon = line.find(':');
        if (colon == std::string::npos) continue;  // lenient with stray header lines
        std::string name = to_lower(trim(std::string_view(line).substr(0, colon)));
        std::string value = trim(std::string_view(line).substr(colon + 1));
        if (name == "subject") {
            msg.subject = value;
        } else if (name == "from") {
            auto addr = EmailAddress::parse(value);
            if (!addr) {
                fail(err, "malformed From header: " + value);
                return std::nullopt;
            }
            msg.header_from = *addr;
            have_from = true;
        }
    }
    if (!have_from) {
        fail(err, "missing From header");
        return std::nullopt;
    }

    std::vector<std::string> body_lines;
    bool in_attachment = false;
    for (size_t i = blank + 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (is_attach_delimiter(line)) {
            Attachment att;
            if (!parse_attach_line(line, att, err)) return std::nullopt;
            msg.attachments.push_back(std::move(att));
            in_attachment = true;
        } else if (!in_attachment) {
            body_lines.push_back(line);
        }
        // lines inside an attachment block are payload filler, not body
    }
    while (!body_lines.empty() && body_lines.back().empty()) body_lines.pop_back();
    std::string body;
    for (size_t i = 0; i < body_lines.size(); ++i) {
        if (i) body.push_back('\n');
        body += body_lines[i];
    }
    msg.body_text = std::move(body);
    return msg;
}

std::vector<UrlHost> extract_urls(std::string_view body) {
    std::vector<UrlHost> out;
    std::set<std::string> seen;
    for (size_t i = 0; i < body.size(); ++i) {
        size_t host_start = std::string_view::npos;
        if (body.size() - i >= 7 && to_lower(body.substr(i, 7)) == "http://") {
            host_start = i + 7;
        } else if (body.size() - i >= 8 && to_lower(body.substr(i, 8)) == "https://") {
            host_start = i + 8;
        } else if (body.size() - i >= 4 && to_lower(body.substr(i, 4)) == "www." &&
                   (i == 0 || !host_char(body[i - 1]))) {
            host_start = i;
        }
        if (host_start == std::string_view::npos) continue;
        size_t end = host_start;
        while (end < body.size() && host_char(body[end])) ++end;
        if (end > host_start) push_host(out, seen, body.substr(host_start, end - host_start));
        i = end > i ? end - 1 : i;
    }
    return out;
}

std::string registered_domain(std::string_view host) {
    static const std::set<std::string, std::less<>> kCcSecondLevel = {"co", "com", "ac",
                                                                      "org", "net"};
    auto labels = split(host, '.');
    if (labels.size() <= 2) return std::string(host);
    const std::string& tld = labels.back();
    const std::string& second = labels[labels.size() - 2];
    size_t keep = 2;
    if (tld.size() == 2 && kCcSecondLevel.count(second)) keep = 3;
    if (labels.size() <= keep) return std::string(host);
    std::string out;
    for (size_t i = labels.size() - keep; i < labels.size(); ++i) {
        if (!out.empty()) out.push_back('.');
        out += labels[i];
    }
    return out;
}

std::string serialize_message(const Message& msg) {
    std::ostringstream os;
    os << "ENVELOPE t=" << msg.received_at << " ip=" << msg.envelope.client_ip.to_string()
       << " helo=" << msg.envelope.helo_host << " from=" << msg.envelope.mail_from.to_string()
       << " to=";
    for (size_t i = 0; i < msg.envelope.rcpt_to.size(); ++i) {
        if (i) os << ',';
        os << msg.envelope.rcpt_to[i].to_string();
    }
    os << '\n';
    os << "From: " << msg.header_from.to_string() << '\n';
    if (!msg.subject.empty()) os << "Subject: " << msg.subject << '\n';
    os << '\n';
    if (!msg.body_text.empty()) os << msg.body_text << '\n';
    for (const auto& att : msg.attachments) {
        os << "--ATTACH filename=" << att.filename << " size=" << att.size_bytes;
        if (!att.declared_type.empty()) os << " type=" << att.declared_type;
        os << '\n';
    }
    return os.str();
}

std::optional<Message> parse_corpus_text(std::string_view text, int64_t default_received_at,
                                         ParseError* err) {
    size_t nl = text.find('\n');
    if (nl == std::string_view::npos) {
        fail(err, "corpus file has no message body");
        return std::nullopt;
    }
    std::string first = trim(text.substr(0, nl));
    auto tokens = split_ws(first);
    if (tokens.empty() || tokens[0] != "ENVELOPE") {
        fail(err, "corpus file must start with an ENVELOPE line");
        return std::nullopt;
    }
    Envelope env;
    int64_t received_at = default_received_at;
    bool have_ip = false, have_from = false, have_to = false;
    for (size_t i = 1; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (t.rfind("ip=", 0) == 0) {
            auto ip = Ipv4::parse(std::string_view(t).substr(3));
            if (!ip) {
                fail(err, "ENVELOPE ip is not a dotted quad: " + t);
                return std::nullopt;
            }
            env.client_ip = *ip;
            have_ip = true;
        } else if (t.rfind("helo=", 0) == 0) {
            env.helo_host = t.substr(5);
        } else if (t.rfind("from=", 0) == 0) {
            auto addr = EmailAddress::parse(std::string_view(t).substr(5));
            if (!addr) {
                fail(err, "ENVELOPE from is malformed: " + t);
                return std::nullopt;
            }
            env.mail_from = *addr;
            have_from = true;
        } else if (t.rfind("to=", 0) == 0) {
            for (const auto& part : split(std::string_view(t).substr(3), ',')) {
                auto addr = EmailAddress::parse(part);
                if (!addr) {
                    fail(err, "ENVELOPE to contains a malformed address: " + part);
                    return std::nullopt;
                }
                env.rcpt_to.push_back(*addr);
            }
            have_to = !env.rcpt_to.empty();
        } else if (t.rfind("t=", 0) == 0) {
            std::string_view num{t};
            num.remove_prefix(2);
            int64_t v = 0;
            auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
            if (ec != std::errc{} || p != num.data() + num.size()) {
                fail(err, "ENVELOPE t is not an integer: " + t);
                return std::nullopt;
            }
            received_at = v;
        } else {
            fail(err, "unknown ENVELOPE token: " + t);
            return std::nullopt;
        }
    }
    if (!have_ip || !have_from || !have_to) {
        fail(err, "ENVELOPE line needs ip=, from= and to=");
        return std::nullopt;
    }
    return parse_message(text.substr(nl + 1), env, received_at, err);
}

std::optional<Message> load_message_file(const std::filesystem::path& path,
                                         int64_t default_received_at, ParseError* err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(err, "cannot open " + path.string());
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus_text(buf.str(), default_received_at, err);
}

bool write_message_file(const std::filesystem::path& path, const Message& msg) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out << serialize_message(msg);
    return static_cast<bool>(out);
}

std::vector<Message> load_corpus_dir(const std::filesystem::path& dir,
                                     std::vector<std::string>* errors) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<Message> messages;
    for (size_t i = 0; i < files.size(); ++i) {
        ParseError err;
        auto msg = load_message_file(files[i], static_cast<int64_t>(i), &err);
        if (msg)
            messages.push_back(std::move(*msg));
        else if (errors)
            errors->push_back(files[i].filename().string() + ": " + err.reason);
    }
    std::stable_sort(messages.begin(), messages.end(),
                     [](const Message& a, const Message& b) { return a.received_at < b.received_at; });
    return messages;
}

}  // namespace spamwall
