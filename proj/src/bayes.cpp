#include "spamwall/bayes.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

namespace spamwall {

namespace {

bool token_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '$' || c == '!' || c == '\'' ||
           c == '-';
}

constexpr size_t kMinTokenLen = 3;
constexpr size_t kMaxTokenLen = 40;
constexpr size_t kTopTokens = 15;
constexpr double kUnseenProbability = 0.4;
constexpr double kClampLow = 0.01;
constexpr double kClampHigh = 0.99;

}  // namespace

std::set<std::string> tokenize(std::string_view text) {
    std::set<std::string> tokens;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !token_char(text[i])) ++i;
        size_t start = i;
        while (i < text.size() && token_char(text[i])) ++i;
        size_t len = i - start;
        if (len >= kMinTokenLen && len <= kMaxTokenLen)
            tokens.insert(to_lower(text.substr(start, len)));
    }
    return tokens;
}

std::set<std::string> message_tokens(const Message& msg) {
    std::set<std::string> tokens = tokenize(msg.body_text);
    for (const auto& t : tokenize(msg.subject)) tokens.insert("subj:" + t);
    for (const auto& att : msg.attachments)
        for (const auto& t : tokenize(att.filename)) tokens.insert("att:" + t);
    return tokens;
}

double token_probability(const std::string& token, const BayesDictionary& dict) {
    if (!dict.trained()) throw DictionaryEmpty();
    auto count = [](const std::map<std::string, uint64_t>& m, const std::string& k) -> uint64_t {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    };
    double s = static_cast<double>(count(dict.spam_counts, token)) /
               static_cast<double>(dict.spam_msgs);
    double h = 2.0 * static_cast<double>(count(dict.ham_counts, token)) /
               static_cast<double>(dict.ham_msgs);
    if (s + h == 0.0) return kUnseenProbability;
    return std::clamp(s / (s + h), kClampLow, kClampHigh);
}

Classification classify(const Message& msg, const BayesDictionary& dict, double threshold) {
    if (!dict.trained()) throw DictionaryEmpty();

    std::vector<std::pair<std::string, double>> scored;
    for (const auto& token : message_tokens(msg))
        scored.emplace_back(token, token_probability(token, dict));

    // Most decisive tokens first; lexicographic token order breaks ties.
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        double da = std::fabs(a.second - 0.5), db = std::fabs(b.second - 0.5);
        if (da != db) return da > db;
        return a.first < b.first;
    });
    if (scored.size() > kTopTokens) scored.resize(kTopTokens);

    double log_p = 0.0, log_q = 0.0;
    for (const auto& [token, p] : scored) {
        log_p += std::log(p);
        log_q += std::log1p(-p);
    }
    double probability = 1.0 / (1.0 + std::exp(log_q - log_p));

    Classification out;
    out.score.probability = probability;
    out.score.contributing = std::move(scored);
    out.is_spam = probability >= threshold;
    return out;
}

BayesDictionary train(std::span<const std::pair<Message, MailLabel>> corpus) {
    BayesDictionary dict;
    for (const auto& [msg, label] : corpus) {
        auto& counts = label == MailLabel::Spam ? dict.spam_counts : dict.ham_counts;
        for (const auto& token : message_tokens(msg)) counts[token] += 1;
        if (label == MailLabel::Spam)
            dict.spam_msgs += 1;
        else
            dict.ham_msgs += 1;
    }
    return dict;
}

bool save_dictionary(const BayesDictionary& dict, const std::filesystem::path& path,
                     std::string* err) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        if (err) *err = "cannot write dictionary " + path.string();
        return false;
    }
    out << "MSGS\t" << dict.spam_msgs << '\t' << dict.ham_msgs << '\n';
    for (const auto& [token, count] : dict.spam_counts)
        out << "spam\t" << token << '\t' << count << '\n';
    for (const auto& [token, count] : dict.ham_counts)
        out << "ham\t" << token << '\t' << count << '\n';
    return static_cast<bool>(out);
}

std::optional<BayesDictionary> load_dictionary(const std::filesystem::path& path,
                                               std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open dictionary " + path.string();
        return std::nullopt;
    }
    BayesDictionary dict;
    std::string line;
    size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        auto bad = [&](const char* what) {
            if (err) *err = "dictionary line " + std::to_string(lineno) + ": " + what;
            return std::nullopt;
        };
        if (fields[0] == "MSGS") {
            if (fields.size() != 3) return bad("MSGS header needs two counts");
            uint64_t s = 0, h = 0;
            if (std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), s).ec !=
                    std::errc{} ||
                std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), h).ec !=
                    std::errc{})
                return bad("MSGS counts are not integers");
            dict.spam_msgs = s;
            dict.ham_msgs = h;
            have_header = true;
            continue;
        }
        if (fields.size() != 3) return bad("expected <table>\\t<token>\\t<count>");
        uint64_t count = 0;
        if (std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count).ec !=
            std::errc{})
            return bad("count is not an integer");
        if (fields[0] == "spam")
            dict.spam_counts[fields[1]] = count;
        else if (fields[0] == "ham")
            dict.ham_counts[fields[1]] = count;
        else
            return bad("table must be spam or ham");
    }
    if (!have_header) {
        if (err) *err = "dictionary is missing the MSGS header";
        return std::nullopt;
    }
    return dict;
}

}  // namespace spamwall
