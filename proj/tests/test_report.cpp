#include "ivv/mcstudy.hpp"
#include "ivv/report.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ivv;

TEST_CASE("FNV-1a known vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
    const std::string path = fixtures::write_temp("fnv.txt", "foobar");
    CHECK(fnv1a_file(path) == "85944171f73967e8");
    CHECK_THROWS_AS(fnv1a_file(path + ".missing"), DataError);
}

TEST_CASE("numbers: non-finite becomes null, negative zero is dropped") {
    CHECK(num(NAN).is_null());
    CHECK(num(INFINITY).is_null());
    CHECK(num(-0.0).dump() == "0.0");
    CHECK(num(1.5).get<double>() == 1.5);
}

TEST_CASE("manifest digest depends on contents, not paths or timing") {
    const std::string a = fixtures::write_temp("m_a.csv", "y,d,z\n1,0,1\n");
    const std::string b = fixtures::write_temp("m_b.csv", "y,d,z\n1,0,1\n");
    const std::string c = fixtures::write_temp("m_c.csv", "y,d,z\n2,0,1\n");
    RunManifest ma, mb, mc;
    for (RunManifest* m : {&ma, &mb, &mc}) {
        m->subcommand = "test";
        m->seed = 5;
        m->config = Json{{"n_boot", 10}};
    }
    ma.add_input(a);
    mb.add_input(b);
    mc.add_input(c);
    mb.wall_seconds = 12.0;
    CHECK(ma.digest() == mb.digest());
    CHECK(ma.digest() != mc.digest());
    mb.seed = 6;
    CHECK(ma.digest() != mb.digest());
    CHECK(ma.inputs[0].bytes == 12);

    CHECK_FALSE(ma.embedded().contains("wall_seconds"));
    const Json full = ma.full();
    CHECK(full["digest"] == ma.digest());
    CHECK(full.contains("wall_seconds"));
    CHECK(dump(Json{{"k", 1}}) == "{\n  \"k\": 1\n}\n");
}

TEST_CASE("test report JSON carries the documented keys") {
    std::vector<double> y;
    std::vector<int> d, z;
    for (int i = 0; i < 60; ++i) {
        y.push_back(std::cos(0.7 * i) + 0.1 * (i % 5));
        d.push_back(i % 3 != 0);
        z.push_back(i % 2);
    }
    const Dataset ds = fixtures::dataset(y, d, z);
    TestConfig cfg;
    cfg.n_boot = 20;
    const BaselineReport rep = test_no_covariates(ds, cfg);
    const Json j = to_json(rep);
    for (const char* key : {"method", "T", "p_value", "n_boot", "components", "warnings"}) CHECK(j.contains(key));
    CHECK(j["method"] == "no-covariates");
    CHECK(j["components"][0]["index"].is_null());
    CHECK(j["components"][0]["nesting"].contains("lo"));

    const Json c = to_json(cfg);
    CHECK(c["multiplier"] == "gaussian");
    CHECK(c["s2_share"] == "pooled");
    const Json e = to_json(EstimationOptions{});
    CHECK(e["distill"] == "modified");
    CHECK(e["pminus"].is_null());
}

TEST_CASE("test report on a small sample serializes with every documented field") {
    DgpSpec spec;
    spec.n = 30;
    Rng rng = substream(31, {0});
    const DgpParams par = draw_params(spec, rng);
    const Dataset ds = draw_sample(spec, par, rng);
    TestConfig cfg;
    cfg.n_boot = 30;
    const TestReport rep = run_test_binary(ds, cfg, mc_estimation_options());
    const Json j = to_json(rep);
    for (const char* key : {"method", "n", "T", "p_overall", "p_nesting", "p_index", "components", "trimming",
                            "shares", "first_stage", "config", "estimation", "warnings"})
        CHECK(j.contains(key));
    CHECK(j["n"] == 30);
    REQUIRE(j["components"].size() == 1);
    CHECK(j["components"][0].contains("nesting"));
    CHECK(j["components"][0].contains("index"));
    for (const char* key : {"d0", "d1", "pretrim0", "pretrim1"}) CHECK(j["trimming"][0].contains(key));
    CHECK(j["config"]["n_boot"] == 30);
    if (!j["p_overall"].is_null()) {
        CHECK(j["p_overall"].get<double>() > 0.0);
        CHECK(j["p_overall"].get<double>() <= 1.0);
    }
    // Round trip through text.
    CHECK(Json::parse(dump(j)) == j);
}

TEST_CASE("CSV writers") {
    DensityTable t;
    t.grid = {0.0, 1.0};
    t.columns = {"z0_d1"};
    t.values = {{0.25, 0.5}};
    CHECK(density_csv(t) == "u,z0_d1\n0,0.25\n1,0.5\n");

    ReplicationRecord r;
    r.dgp = "size";
    r.n = 10;
    r.method = "proposed";
    r.xi = 0.5;
    r.error = "bad, worse\nworst";
    const std::string csv = replication_csv({r});
    CHECK(csv.find("bad; worse;worst") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}
