#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spamwall/config.hpp"
#include "testutil.hpp"

using namespace spamwall;
using namespace spamwall::testutil;

TEST_CASE("defaults are sane without any config file") {
    AppConfig cfg;
    CHECK(cfg.greylist.min_delay_secs == 10);
    CHECK(cfg.greylist.max_window_secs == 12 * 3600);
    CHECK(cfg.spf.reject_softfail);
    CHECK(cfg.bayes.threshold == doctest::Approx(0.9));
    CHECK(cfg.pipeline.session_secs == 3 * 3600);
    CHECK(cfg.sim.users == 200);
    CHECK(cfg.sim.groups == 20);
    CHECK(cfg.sim.defenses.size() == kStageOrder.size());
}

TEST_CASE("parse_config: sections, comments, values") {
    std::string err;
    auto cfg = parse_config(
        "# tuned setup\n"
        "[dnsbl]\n"
        "lists = spamhaus:zen.spamhaus.example:2, spamcop:bl.spamcop.example\n"
        "threshold = 2\n"
        "[surbl]\n"
        "lists = ws:ws.surbl.example:1\n"
        "[greylist]\n"
        "min_delay_secs = 30\n"
        "max_window_secs = 7200\n"
        "[spf]\n"
        "reject_softfail = false\n"
        "[policy]\n"
        "group_ids = allstaff@corp.example, sales@corp.example\n"
        "allow.allstaff@corp.example = boss@corp.example\n"
        "[sim]\n"
        "defenses = surbl, content\n"
        "surbl_off_sessions = 3-7\n",
        &err);
    REQUIRE_MESSAGE(cfg, err);
    REQUIRE(cfg->dnsbl.lists.size() == 2);
    CHECK(cfg->dnsbl.lists[0].name == "spamhaus");
    CHECK(cfg->dnsbl.lists[0].zone == "zen.spamhaus.example");
    CHECK(cfg->dnsbl.lists[0].weight == 2);
    CHECK(cfg->dnsbl.lists[1].weight == 1);  // weight optional
    CHECK(cfg->dnsbl.threshold == 2);
    CHECK(cfg->surbl.lists[0].kind == BlocklistKind::DomainList);
    CHECK(cfg->greylist.min_delay_secs == 30);
    CHECK_FALSE(cfg->spf.reject_softfail);
    CHECK(cfg->policy.group_ids.count("sales@corp.example"));
    CHECK(cfg->policy.group_allow.at("allstaff@corp.example").count("boss@corp.example"));
    CHECK(cfg->sim.defenses == std::set<Stage>{Stage::Surbl, Stage::Content});
    REQUIRE(cfg->sim.surbl_off_sessions);
    CHECK(cfg->sim.surbl_off_sessions->first == 3);
    CHECK(cfg->sim.surbl_off_sessions->second == 7);
}

TEST_CASE("unknown keys are fatal and name the key") {
    std::string err;
    CHECK_FALSE(parse_config("[greylist]\ndelay = 10\n", &err));
    CHECK(err.find("greylist.delay") != std::string::npos);

    CHECK_FALSE(parse_config("bogus_key = 1\n", &err));
    CHECK(err.find("bogus_key") != std::string::npos);
}

TEST_CASE("malformed values are rejected with the key name") {
    std::string err;
    CHECK_FALSE(parse_config("[dnsbl]\nthreshold = banana\n", &err));
    CHECK(err.find("dnsbl.threshold") != std::string::npos);
    CHECK_FALSE(parse_config("[dnsbl]\nthreshold = 0\n", &err));  // must be >= 1
    CHECK_FALSE(parse_config("[sim]\np_exec = 1.5\n", &err));
    CHECK_FALSE(parse_config("[sim]\ndefenses = warp\n", &err));
    CHECK_FALSE(parse_config("[dnsbl]\nlists = justaname\n", &err));
    CHECK_FALSE(parse_config("[dnsbl]\nlists = a:zone:0\n", &err));  // weight >= 1
    CHECK_FALSE(parse_config("[guard]\nremap_mode = maybe\n", &err));
    CHECK_FALSE(parse_config("no equals sign here\n", &err));
    CHECK_FALSE(parse_config("[content]\nflag_size_min = 10\nflag_size_max = 5\n", &err));
}

TEST_CASE("overrides apply on top of the loaded config") {
    AppConfig cfg;
    std::string err;
    REQUIRE(apply_config_override(cfg, "greylist.min_delay_secs=0", &err));
    CHECK(cfg.greylist.min_delay_secs == 0);
    REQUIRE(apply_config_override(cfg, "sim.defenses=none", &err));
    CHECK(cfg.sim.defenses.empty());
    CHECK_FALSE(apply_config_override(cfg, "nonsense", &err));
    CHECK_FALSE(apply_config_override(cfg, "no.such.key=1", &err));
}

TEST_CASE("config file loading") {
    TempDir dir;
    auto path = dir.file("spamwall.ini");
    write_file(path, "[bayes]\nthreshold = 0.8\n");
    std::string err;
    auto cfg = load_config_file(path.string(), &err);
    REQUIRE(cfg);
    CHECK(cfg->bayes.threshold == doctest::Approx(0.8));
    CHECK_FALSE(load_config_file((dir.path / "missing.ini").string(), &err));
}

TEST_CASE("stage set parsing") {
    std::string err;
    auto all = parse_stage_set("all", &err);
    REQUIRE(all);
    CHECK(all->size() == 8);
    CHECK(parse_stage_set("none", &err)->empty());
    auto some = parse_stage_set("dnsbl,bayes", &err);
    REQUIRE(some);
    CHECK(*some == std::set<Stage>{Stage::Dnsbl, Stage::Bayes});
    CHECK_FALSE(parse_stage_set("dnsbl,warpdrive", &err));
}
