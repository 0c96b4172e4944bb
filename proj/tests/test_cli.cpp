// End-to-end checks of the command-line surface; the binary path arrives in
// $SPAMWALL_BIN. Everything runs offline against static zones.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "spamwall/bayes.hpp"
#include "spamwall/message.hpp"
#include "testutil.hpp"

using namespace spamwall;
using namespace spamwall::testutil;

namespace {

std::string bin() {
    const char* b = std::getenv("SPAMWALL_BIN");
    REQUIRE_MESSAGE(b != nullptr, "SPAMWALL_BIN must point at the spamwall binary");
    return b;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run(const std::string& args, const std::string& env_prefix = "") {
    CommandResult result;
    FILE* pipe = ::popen((env_prefix + bin() + " " + args + " 2>&1").c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
    int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

void write_corpus_message(const std::filesystem::path& path, const std::string& ip,
                          const std::string& from, const std::string& subject,
                          const std::string& body, int64_t t) {
    write_file(path, "ENVELOPE t=" + std::to_string(t) + " ip=" + ip +
                         " helo=mx.sender.example from=" + from + " to=bob@corp.example\n" +
                         "From: " + from + "\nSubject: " + subject + "\n\n" + body + "\n");
}

}  // namespace

TEST_CASE("version and help exit 0, unknown flags exit 2") {
    auto v = run("--version");
    CHECK(v.exit_code == 0);
    CHECK(v.output.find("spamwall") != std::string::npos);
    CHECK(run("--help").exit_code == 0);
    CHECK(run("filter --help").exit_code == 0);
    CHECK(run("--no-such-flag").exit_code == 2);
    CHECK(run("filter --bogus x").exit_code == 2);
    CHECK(run("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("strict config: unknown key is fatal with the key named") {
    TempDir dir;
    write_file(dir.file("bad.ini"), "[greylist]\ndelay = 10\n");
    write_file(dir.file("zone.txt"), "# empty zone\n");
    std::filesystem::create_directories(dir.file("corpus"));
    auto r = run("filter --in " + dir.file("corpus").string() + " --config " +
                 dir.file("bad.ini").string() + " --zone " + dir.file("zone.txt").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("greylist.delay") != std::string::npos);
}

TEST_CASE("filter: happy path writes report, sinks and summary") {
    TempDir dir;
    auto corpus = dir.file("corpus");
    std::filesystem::create_directories(corpus);
    write_corpus_message(corpus / "a.msg", "203.0.113.1", "a@sender.example", "notes",
                         "plain content", 100);
    write_corpus_message(corpus / "b.msg", "203.0.113.2", "b@sender.example", "big sale",
                         "buy viagra now", 200);
    write_file(dir.file("zone.txt"),
               "1.113.0.203.in-addr.arpa PTR mx.sender.example\n"
               "2.113.0.203.in-addr.arpa PTR mx.sender.example\n");
    write_file(dir.file("c.ini"), "[greylist]\nenabled = false\n");

    auto r = run("filter --in " + corpus.string() + " --config " + dir.file("c.ini").string() +
                 " --zone " + dir.file("zone.txt").string() + " --out-inbox " +
                 dir.file("inbox").string() + " --out-trap " + dir.file("trap").string() +
                 " --report " + dir.file("report.csv").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("1 delivered") != std::string::npos);
    CHECK(r.output.find("1 trapped") != std::string::npos);

    auto csv = read_file(dir.file("report.csv"));
    CHECK(csv.rfind("session_start,", 0) == 0);
    size_t inbox = 0, trap = 0;
    for (auto& e : std::filesystem::directory_iterator(dir.file("inbox"))) inbox += e.is_regular_file();
    for (auto& e : std::filesystem::directory_iterator(dir.file("trap"))) trap += e.is_regular_file();
    CHECK(inbox == 1);
    CHECK(trap == 1);

    // missing corpus directory is an operational error
    CHECK(run("filter --in " + (dir.path / "nope").string() + " --zone " +
              dir.file("zone.txt").string())
              .exit_code == 1);
}

TEST_CASE("filter without any resolver is a config error") {
    TempDir dir;
    std::filesystem::create_directories(dir.file("corpus"));
    auto r = run("filter --in " + dir.file("corpus").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("resolver") != std::string::npos);
}

TEST_CASE("SPAMWALL_CONFIG is the config-path fallback") {
    TempDir dir;
    std::filesystem::create_directories(dir.file("corpus"));
    write_file(dir.file("env.ini"), "[dns]\nzone_file = " + dir.file("zone.txt").string() + "\n");
    write_file(dir.file("zone.txt"), "# empty\n");
    auto r = run("filter --in " + dir.file("corpus").string(),
                 "SPAMWALL_CONFIG=" + dir.file("env.ini").string() + " ");
    CHECK(r.exit_code == 0);  // zone came from the env-named config

    write_file(dir.file("bad.ini"), "mystery = 1\n");
    r = run("filter --in " + dir.file("corpus").string(),
            "SPAMWALL_CONFIG=" + dir.file("bad.ini").string() + " ");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("mystery") != std::string::npos);
}

TEST_CASE("filter prunes expired trap messages per the retention policy") {
    namespace fs = std::filesystem;
    TempDir dir;
    std::filesystem::create_directories(dir.file("corpus"));
    write_file(dir.file("zone.txt"), "# empty\n");
    auto trap = dir.file("trap");
    fs::create_directories(trap);
    write_file(trap / "stale.msg", "x");
    fs::last_write_time(trap / "stale.msg",
                        fs::file_time_type::clock::now() - std::chrono::hours(40 * 24));
    write_file(trap / "recent.msg", "x");

    auto r = run("filter --in " + dir.file("corpus").string() + " --zone " +
                 dir.file("zone.txt").string() + " --out-inbox " + dir.file("inbox").string() +
                 " --out-trap " + trap.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("pruned 1 expired trap messages") != std::string::npos);
    CHECK_FALSE(fs::exists(trap / "stale.msg"));
    CHECK(fs::exists(trap / "recent.msg"));
}

TEST_CASE("simulate output feeds report unchanged") {
    TempDir dir;
    write_file(dir.file("sim.ini"),
               "[sim]\nusers = 20\ngroups = 4\nduration_minutes = 20\nsession_minutes = 10\n"
               "spam_rate = 3\ndefenses = surbl,content\n");
    auto csv_path = dir.file("out.csv");
    auto r = run("simulate --config " + dir.file("sim.ini").string() + " --seed 42 --out " +
                 csv_path.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("2 sessions") != std::string::npos);

    auto rep = run("report --in " + csv_path.string());
    CHECK(rep.exit_code == 0);
    CHECK(rep.output.find("session") != std::string::npos);

    // the same seed reproduces the bytes
    auto csv_first = read_file(csv_path);
    run("simulate --config " + dir.file("sim.ini").string() + " --seed 42 --out " +
        csv_path.string());
    CHECK(read_file(csv_path) == csv_first);

    // and report pairs two sim outputs without transformation
    auto second = dir.file("out2.csv");
    run("simulate --config " + dir.file("sim.ini").string() + " --seed 43 --out " +
        second.string());
    auto pair = run("report --baseline " + csv_path.string() + " --treated " + second.string());
    CHECK(pair.exit_code == 0);
    CHECK(pair.output.find("reduction:") != std::string::npos);
}

TEST_CASE("report argument and schema validation") {
    TempDir dir;
    CHECK(run("report").exit_code == 2);
    write_file(dir.file("bad.csv"), "nope,nope\n1,2\n");
    CHECK(run("report --in " + dir.file("bad.csv").string()).exit_code == 2);
    write_file(dir.file("empty.csv"), "");
    CHECK(run("report --in " + dir.file("empty.csv").string()).exit_code == 2);
}

TEST_CASE("report reduction arithmetic and the zero-baseline guard") {
    TempDir dir;
    const std::string header =
        "session_start,delivered,trapped,rejected,trap_dnsbl,trap_rdns,trap_spf,trap_surbl,"
        "trap_content,trap_policy,trap_bayes\n";
    write_file(dir.file("b100.csv"), header + "0,100,0,0,0,0,0,0,0,0,0\n");
    write_file(dir.file("t40.csv"), header + "0,40,60,0,0,0,0,60,0,0,0\n");
    write_file(dir.file("b0.csv"), header + "0,0,5,0,0,0,0,5,0,0,0\n");

    auto r = run("report --baseline " + dir.file("b100.csv").string() + " --treated " +
                 dir.file("t40.csv").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("reduction: 60.0%") != std::string::npos);

    r = run("report --baseline " + dir.file("b100.csv").string() + " --treated " +
            dir.file("b100.csv").string());
    CHECK(r.output.find("reduction: 0.0%") != std::string::npos);

    r = run("report --baseline " + dir.file("b0.csv").string() + " --treated " +
            dir.file("t40.csv").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("reduction: n/a") != std::string::npos);
}

TEST_CASE("train builds a loadable dictionary") {
    TempDir dir;
    auto spam = dir.file("spam");
    auto ham = dir.file("ham");
    std::filesystem::create_directories(spam);
    std::filesystem::create_directories(ham);
    for (int i = 0; i < 5; ++i) {
        write_corpus_message(spam / ("s" + std::to_string(i) + ".msg"), "203.0.113.9",
                             "x@bulk.example", "big win", "claim your prize now", i);
        write_corpus_message(ham / ("h" + std::to_string(i) + ".msg"), "203.0.113.8",
                             "y@corp.example", "minutes", "agenda for the planning call", i);
    }
    auto out = dir.file("dict.tsv");
    auto r = run("train --spam " + spam.string() + " --ham " + ham.string() + " --out " +
                 out.string());
    CHECK(r.exit_code == 0);
    auto dict = load_dictionary(out);
    REQUIRE(dict);
    CHECK(dict->spam_msgs == 5);
    CHECK(dict->ham_msgs == 5);
    CHECK(dict->spam_counts.count("prize"));

    CHECK(run("train --spam " + (dir.path / "nope").string() + " --ham " + ham.string() +
              " --out " + out.string())
              .exit_code == 1);
}

TEST_CASE("guard subcommands persist state") {
    TempDir dir;
    write_file(dir.file("g.ini"),
               "[guard]\nquarantine_path = " + dir.file("q.txt").string() +
                   "\nalias_path = " + dir.file("a.tsv").string() +
                   "\nalerts_path = " + dir.file("alerts.log").string() + "\n");
    std::string cfg = " --config " + dir.file("g.ini").string();

    auto r = run("guard quarantine 10.0.0.5" + cfg);
    CHECK(r.exit_code == 0);
    r = run("guard status" + cfg);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("10.0.0.5") != std::string::npos);

    r = run("guard remap allstaff@corp.example" + cfg);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("all_staff@corp.example") != std::string::npos);
    // remapping twice is an operational error
    CHECK(run("guard remap allstaff@corp.example" + cfg).exit_code == 1);

    r = run("guard release 10.0.0.5" + cfg);
    CHECK(r.exit_code == 0);
    r = run("guard status" + cfg);
    CHECK(r.output.find("10.0.0.5") == std::string::npos);
    CHECK(r.output.find("all_staff@corp.example") != std::string::npos);

    CHECK(run("guard quarantine not-an-ip" + cfg).exit_code == 2);
    CHECK(run("guard remap not-an-address" + cfg).exit_code == 2);
}
