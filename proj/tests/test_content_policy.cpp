#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>

#include "spamwall/content_policy.hpp"
#include "testutil.hpp"

using namespace spamwall;
using namespace spamwall::testutil;

TEST_CASE("content_match fires on case-insensitive substrings in the right target") {
    auto rules = default_content_rules();

    auto hits = content_match(make_message("Server report", "all fine"), rules);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].rule_id == "subject-worm");

    hits = content_match(make_message("hi", "buy ViAgRa today"), rules);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].rule_id == "body-spam");

    CHECK(content_match(make_message("quarterly numbers", "attached as discussed"), rules)
              .empty());

    // body patterns do not fire on subjects and vice versa
    CHECK(content_match(make_message("viagra", "clean body"), rules).empty());

    // attachment-name rules scan every attachment
    std::vector<ContentRule> att_rules = {
        {"att-update", RuleTarget::AttachmentName, {"update"}, RuleAction::Quarantine}};
    auto msg = make_message("x", "y");
    msg.attachments.push_back(Attachment{"Updates_2024.exe", 10, ""});
    CHECK(content_match(msg, att_rules).size() == 1);
}

TEST_CASE("content_match is monotone in the rule set") {
    SplitMix64 rng(21);
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "prize"};
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<ContentRule> rules;
        for (int r = 0; r < 4; ++r)
            rules.push_back(ContentRule{"r" + std::to_string(r),
                                        rng.next_below(2) ? RuleTarget::Body : RuleTarget::Subject,
                                        {words[rng.next_below(words.size())]},
                                        RuleAction::Quarantine});
        std::string body = words[rng.next_below(words.size())] + " filler " +
                           words[rng.next_below(words.size())];
        auto msg = make_message(words[rng.next_below(words.size())], body);
        auto before = content_match(msg, rules);
        rules.push_back(ContentRule{"extra", RuleTarget::Body,
                                    {words[rng.next_below(words.size())]},
                                    RuleAction::Quarantine});
        auto after = content_match(msg, rules);
        // every previous firing is still present, in order
        REQUIRE(after.size() >= before.size());
        for (size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
    }
}

TEST_CASE("attachment_check catches the worm signature") {
    auto rule = default_attachment_rule();

    auto msg = make_message("x", "y");
    msg.attachments.push_back(Attachment{"Update_KB2546_*86.BAK.exe", 143360, ""});
    auto violations = attachment_check(msg, rule);
    CHECK(violations == std::vector<AttachmentViolation>{AttachmentViolation::BlockedExtension,
                                                         AttachmentViolation::DoubleExtension,
                                                         AttachmentViolation::SuspiciousSize});

    msg.attachments = {Attachment{"report.pdf", 5000, ""}};
    CHECK(attachment_check(msg, rule).empty());

    msg.attachments = {Attachment{"setup.exe", 5000, ""}};
    CHECK(attachment_check(msg, rule) ==
          std::vector<AttachmentViolation>{AttachmentViolation::BlockedExtension});

    // double extension adds violations, never removes them
    msg.attachments = {Attachment{"a.exe", 7000, ""}};
    auto single = attachment_check(msg, rule);
    msg.attachments = {Attachment{"a.b.exe", 7000, ""}};
    auto doubled = attachment_check(msg, rule);
    for (auto v : single) CHECK(std::count(doubled.begin(), doubled.end(), v) == 1);
    CHECK(doubled.size() >= single.size());

    // the size range is inclusive on both ends
    msg.attachments = {Attachment{"data.bin", 180 * 1024, ""}};
    CHECK(attachment_check(msg, rule) ==
          std::vector<AttachmentViolation>{AttachmentViolation::SuspiciousSize});
    msg.attachments = {Attachment{"data.bin", 180 * 1024 + 1, ""}};
    CHECK(attachment_check(msg, rule).empty());
}

TEST_CASE("policy_check: group ACL, recipient count, attachment size") {
    PolicyConfig policy;
    policy.max_rcpt_per_message = 20;
    policy.max_attachment_bytes = 1000;
    std::set<std::string> groups = {"allstaff@corp.example"};

    auto env = make_envelope("203.0.113.5", "mx.out.example", "stranger@out.example",
                             "allstaff@corp.example");
    auto msg = make_message("x", "y", env);
    CHECK(policy_check(msg, policy, groups) ==
          std::vector<PolicyViolation>{PolicyViolation::GroupSendDenied});

    policy.group_send_allowlist["allstaff@corp.example"] = {"boss@corp.example"};
    CHECK(policy_check(msg, policy, groups).size() == 1);  // still denied

    env.mail_from = *EmailAddress::parse("Boss@corp.example");
    msg = make_message("x", "y", env);
    CHECK(policy_check(msg, policy, groups).empty());  // allowlist is case-insensitive

    env = make_envelope();
    env.rcpt_to.clear();
    for (int i = 0; i < 25; ++i)
        env.rcpt_to.push_back(*EmailAddress::parse("u" + std::to_string(i) + "@corp.example"));
    msg = make_message("x", "y", env);
    CHECK(policy_check(msg, policy, groups) ==
          std::vector<PolicyViolation>{PolicyViolation::TooManyRecipients});

    msg = make_message("x", "y");
    msg.attachments.push_back(Attachment{"big.iso", 4000, ""});
    CHECK(policy_check(msg, policy, groups) ==
          std::vector<PolicyViolation>{PolicyViolation::AttachmentTooLarge});
}

TEST_CASE("prune_trap deletes by age and is idempotent") {
    namespace fs = std::filesystem;
    TempDir dir;
    auto old_file = dir.file("old.msg");
    auto mid_file = dir.file("mid.msg");
    auto new_file = dir.file("new.msg");
    write_file(old_file, "x");
    write_file(mid_file, "x");
    write_file(new_file, "x");
    auto now_fs = fs::file_time_type::clock::now();
    fs::last_write_time(old_file, now_fs - std::chrono::hours(31 * 24));
    fs::last_write_time(mid_file, now_fs - std::chrono::hours(10 * 24));
    fs::last_write_time(new_file, now_fs - std::chrono::hours(2 * 24));

    int64_t now = std::chrono::duration_cast<std::chrono::seconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
    CHECK(prune_trap(dir.path, now, 30) == 1);
    CHECK_FALSE(fs::exists(old_file));
    CHECK(fs::exists(mid_file));
    CHECK(prune_trap(dir.path, now, 30) == 0);  // second run deletes nothing

    CHECK(prune_trap(dir.path, now, 1) == 2);  // everything older than a day
    CHECK(prune_trap(dir.path, now, 1) == 0);

    TempDir empty;
    CHECK(prune_trap(empty.path, now, 30) == 0);
}

TEST_CASE("rules file parsing") {
    TempDir dir;
    auto path = dir.file("rules.txt");
    write_file(path,
               "# default-ish rules\n"
               "subj|subject|quarantine|test, server report, status, helo\n"
               "body|body|reject|viagra,install updates\n"
               "att|attachment|quarantine|.exe\n");
    std::string err;
    auto rules = load_rules_file(path, &err);
    REQUIRE(rules);
    REQUIRE(rules->size() == 3);
    CHECK((*rules)[0].patterns ==
          std::vector<std::string>{"test", "server report", "status", "helo"});
    CHECK((*rules)[1].action == RuleAction::Reject);
    CHECK((*rules)[2].target == RuleTarget::AttachmentName);

    write_file(path, "dup|body|reject|x\ndup|body|reject|y\n");
    CHECK_FALSE(load_rules_file(path, &err));
    write_file(path, "a|nowhere|reject|x\n");
    CHECK_FALSE(load_rules_file(path, &err));
    write_file(path, "a|body|explode|x\n");
    CHECK_FALSE(load_rules_file(path, &err));
    write_file(path, "a|body|reject|\n");
    CHECK_FALSE(load_rules_file(path, &err));
}
