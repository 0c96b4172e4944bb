#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spamwall/message.hpp"

namespace spamwall {

/// Raised when classification is attempted against a dictionary that has no
/// trained messages on one of its sides.
struct DictionaryEmpty : std::runtime_error {
    DictionaryEmpty() : std::runtime_error("bayes dictionary has an empty table") {}
};

struct BayesDictionary {
    std::map<std::string, uint64_t> spam_counts;
    std::map<std::string, uint64_t> ham_counts;
    uint64_t spam_msgs = 0;
    uint64_t ham_msgs = 0;

    bool trained() const { return spam_msgs >= 1 && ham_msgs >= 1; }
    bool operator==(const BayesDictionary&) const = default;
};

struct BayesScore {
    double probability = 0.5;
    std::vector<std::pair<std::string, double>> contributing;  // sorted by |p-0.5| desc
};

enum class MailLabel { Spam, Ham };

/// Splits on anything outside [A-Za-z0-9$!'-], lowercases, keeps lengths 3..40,
/// one occurrence per text (set semantics).
std::set<std::string> tokenize(std::string_view text);

/// Body tokens plus subject tokens prefixed "subj:" and attachment-filename
/// tokens prefixed "att:".
std::set<std::string> message_tokens(const Message& msg);

double token_probability(const std::string& token, const BayesDictionary& dict);

struct Classification {
    bool is_spam = false;
    BayesScore score;
};

Classification classify(const Message& msg, const BayesDictionary& dict, double threshold = 0.9);

BayesDictionary train(std::span<const std::pair<Message, MailLabel>> corpus);

/// Dictionary file: header "MSGS\t<spam_msgs>\t<ham_msgs>", then
/// "<table>\t<token>\t<count>" lines with table in {spam, ham}.
bool save_dictionary(const BayesDictionary& dict, const std::filesystem::path& path,
                     std::string* err = nullptr);
std::optional<BayesDictionary> load_dictionary(const std::filesystem::path& path,
                                               std::string* err = nullptr);

}  // namespace spamwall
