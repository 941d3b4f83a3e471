#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "committee_audit/parallel.hpp"
#include "committee_audit/report.hpp"
#include "fixtures.hpp"

namespace ca = committee_audit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path planted_file(const fs::path& dir) {
    auto spec = fixtures::planted_spec();
    spec.num_layers = 2;
    spec.samples_per_domain = 20;
    spec.token_plants.push_back({"the", 9, 0.5, {}});
    const auto path = dir / "planted.cmta";
    ca::write_trace_file(ca::generate(spec), path);
    return path;
}

} // namespace

TEST(Io, RealFormatting) {
    EXPECT_EQ(ca::format_real(0.5), "0.5");
    EXPECT_EQ(ca::format_real(29.4612345), "29.4612");
    EXPECT_EQ(ca::format_real(1e-7), "1e-07");
    EXPECT_EQ(ca::format_real(NAN), "nan");
    EXPECT_EQ(ca::format_real(-INFINITY), "-inf");
    EXPECT_TRUE(ca::json_real(NAN).is_null());
    EXPECT_EQ(ca::json_real(INFINITY), "inf");
}

TEST(Io, CsvQuotingAndMetadata) {
    EXPECT_EQ(ca::csv_field("plain"), "plain");
    EXPECT_EQ(ca::csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(ca::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    ca::CsvBuilder csv({{"tool", "x"}}, {"a", "b"});
    csv.row({"1", "2"});
    EXPECT_EQ(csv.str(), "# {\"tool\":\"x\"}\na,b\n1,2\n");
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrows) {
    std::vector<int> hits(1000, 0);
    ca::parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) ASSERT_EQ(h, 1);
    EXPECT_THROW(ca::parallel_for(50, [](std::size_t i) {
                     if (i == 17) throw ca::PreconditionError("boom");
                 }),
                 ca::PreconditionError);
    EXPECT_GE(ca::thread_limit(), 1u);
}

TEST(Report, ValidateBadMagicExitsWithFormatStatus) {
    const auto dir = fixtures::temp_dir("report_magic");
    const auto path = planted_file(dir);
    std::string bytes = slurp(path);
    bytes.replace(0, 4, "XXXX");
    ca::write_text_file(path, bytes);
    std::ostringstream out, err;
    const int rc = ca::guarded(err, [&] { return ca::cmd_validate(path, {}, out); });
    EXPECT_EQ(rc, 2);
    const auto j = nlohmann::json::parse(err.str());
    EXPECT_EQ(j["error"]["kind"], "format error");
}

TEST(Report, ValidateGoodTrace) {
    const auto dir = fixtures::temp_dir("report_validate");
    std::ostringstream out;
    EXPECT_EQ(ca::cmd_validate(planted_file(dir), {}, out), 0);
    EXPECT_TRUE(nlohmann::json::parse(out.str())["ok"].get<bool>());
}

TEST(Report, CommitteeOnDisjointAtFullGammaIsEmptyWithWarning) {
    const auto dir = fixtures::temp_dir("report_disjoint");
    ca::SynthSpec s;
    s.num_domains = 4;
    s.num_layers = 2;
    s.samples_per_domain = 10;
    ca::write_trace_file(ca::generate_disjoint(s), dir / "d.cmta");
    ca::AuditConfig cfg;
    cfg.gamma = 1.0;
    cfg.output_dir = dir / "out";
    std::ostringstream log;
    EXPECT_EQ(ca::cmd_committee(dir / "d.cmta", cfg, log), 0);
    EXPECT_NE(log.str().find("warning"), std::string::npos);
    const auto j = load_json(dir / "out" / "committees.json");
    for (const auto& c : j["committees"]) EXPECT_TRUE(c["members"].empty());
    EXPECT_EQ(j["warnings"].size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "out" / "committees.csv"));
}

TEST(Report, AuditListsPlantedSetAndIsDeterministic) {
    const auto dir = fixtures::temp_dir("report_audit");
    const auto path = planted_file(dir);
    ca::AuditConfig cfg;
    std::ostringstream log;
    cfg.output_dir = dir / "a";
    ASSERT_EQ(ca::cmd_audit(path, cfg, log), 0);
    cfg.output_dir = dir / "b";
    ASSERT_EQ(ca::cmd_audit(path, cfg, log), 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        ++files;
        EXPECT_EQ(slurp(entry.path()), slurp(dir / "b" / entry.path().filename())) << entry.path();
    }
    EXPECT_GE(files, 15u);

    const auto summary = load_json(dir / "a" / "summary.json");
    for (const auto& c : summary["committees"])
        EXPECT_EQ(c["members"], nlohmann::json({5, 9, 21}));
    EXPECT_EQ(summary["metadata"]["conventions"]["variance"], "population");
    EXPECT_EQ(summary["metadata"]["trace"]["sidecar"], nullptr);
    // defaults above E=64 are fine here; retention holds at every budget
    for (const auto& [k, v] : summary["sweep"]["mean_retention"].items()) EXPECT_EQ(v, 1.0) << k;
    EXPECT_TRUE(summary["anchors"].contains("marked_cells"));

    const std::string csv = slurp(dir / "a" / "committees.csv");
    EXPECT_EQ(csv.rfind("# {", 0), 0u);
    EXPECT_NE(csv.find("\nlayer,members,size,avg_mu,avg_var,eci_coverage,ratio\n"), std::string::npos);
    EXPECT_NE(csv.find("\n0,5 9 21,3,2,"), std::string::npos);
}

TEST(Report, FormatSelection) {
    const auto dir = fixtures::temp_dir("report_format");
    const auto path = planted_file(dir);
    ca::AuditConfig cfg;
    cfg.format = ca::OutputFormat::Json;
    cfg.output_dir = dir / "out";
    EXPECT_EQ(ca::cmd_metrics(path, cfg), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "metrics.json"));
    EXPECT_FALSE(fs::exists(dir / "out" / "gini.csv"));
    cfg.format = ca::OutputFormat::Csv;
    EXPECT_EQ(ca::cmd_profile(path, cfg), 0);
    EXPECT_EQ(ca::cmd_specificity(path, cfg), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "profiles.csv"));
    EXPECT_FALSE(fs::exists(dir / "out" / "profiles.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "specificity.csv"));
}

TEST(Report, SweepBudgetsAboveExpertCount) {
    const auto dir = fixtures::temp_dir("report_sweep");
    ca::SynthSpec s;
    s.num_experts = 10;
    s.routing_budget = 4;
    s.num_layers = 1;
    s.num_domains = 3;
    s.samples_per_domain = 10;
    s.planted_committee = {1, 2, 3};
    s.committee_mass = 0.6;
    ca::write_trace_file(ca::generate(s), dir / "small.cmta");
    ca::AuditConfig cfg;
    cfg.output_dir = dir / "out";
    EXPECT_EQ(ca::cmd_sweep(dir / "small.cmta", cfg), 0);
    const auto j = load_json(dir / "out" / "sweep.json");
    EXPECT_EQ(j["points"].size(), 3u); // 4, 6, 8
    EXPECT_EQ(j["notes"].size(), 2u);
    cfg.sweep_ks = {4, 12};
    cfg.sweep_ks_explicit = true;
    EXPECT_THROW(ca::cmd_sweep(dir / "small.cmta", cfg), ca::PreconditionError);
}

TEST(Report, AnchorsWithTokenFile) {
    const auto dir = fixtures::temp_dir("report_anchors");
    const auto path = planted_file(dir);
    ca::write_text_file(dir / "tokens.txt", "the\nnever\n");
    ca::AuditConfig cfg;
    cfg.output_dir = dir / "out";
    cfg.tokens_path = dir / "tokens.txt";
    std::ostringstream log;
    EXPECT_EQ(ca::cmd_anchors(path, cfg, log), 0);
    EXPECT_NE(log.str().find("never"), std::string::npos);
    const auto j = load_json(dir / "out" / "anchors.json");
    EXPECT_EQ(j["tokens"], nlohmann::json({"the", "never"}));
    EXPECT_EQ(j["layer_mode"], "any_layer_union");
    bool found = false;
    for (const auto& cell : j["cells"])
        if (cell["token"] == "the" && cell["expert"] == 9) {
            found = true;
            EXPECT_TRUE(cell["marked"].get<bool>());
            EXPECT_EQ(cell["domain_count"], 9);
        }
    EXPECT_TRUE(found);
    EXPECT_TRUE(fs::exists(dir / "out" / "anchors_marked.csv"));
}

TEST(Report, ConfigPreconditions) {
    ca::AuditConfig cfg;
    cfg.gamma = 1.2;
    EXPECT_THROW(ca::check_config(cfg), ca::PreconditionError);
    cfg.gamma = 0.8;
    cfg.min_domains = 0;
    EXPECT_THROW(ca::check_config(cfg), ca::PreconditionError);
}

TEST(Report, SynthCommandWritesTraceAndSidecar) {
    const auto dir = fixtures::temp_dir("report_synth");
    ca::write_text_file(dir / "spec.json",
                        R"({"num_experts": 16, "num_layers": 1, "routing_budget": 2, "num_domains": 2,
                            "samples_per_domain": 3, "planted_committee": [0], "committee_mass": 0.5})");
    EXPECT_EQ(ca::cmd_synth(dir / "spec.json", dir / "t" / "x.cmta", 42), 0);
    const auto t = ca::read_trace_file(dir / "t" / "x.cmta");
    EXPECT_EQ(t.samples.size(), 6u);
    EXPECT_EQ(ca::read_sidecar(dir / "t" / "x.cmta")->pooling, "last_token");
}
