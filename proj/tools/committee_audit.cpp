// committee-audit: command-line front end.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "committee_audit.hpp"

namespace ca = committee_audit;

namespace {

struct Options {
    std::string input;
    std::string out;
    std::optional<std::size_t> k;
    double gamma = 0.8;
    bool strict_gamma = false;
    double theta_s = 0.0;
    bool filter = false;
    std::vector<std::size_t> sweep_ks;
    std::optional<std::size_t> reference_k;
    std::size_t min_domains = 3;
    std::optional<std::size_t> layer;
    std::string tokens;
    std::vector<std::uint32_t> experts;
    bool sample_weighted = false;
    bool renormalize = false;
    std::string format = "both";
    std::optional<std::uint64_t> seed;
};

void add_analysis_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--k", o.k, "routing budget (default: trace header k)")->check(CLI::PositiveNumber);
    cmd->add_option("--gamma", o.gamma, "presence threshold for consensus candidates")
        ->capture_default_str();
    cmd->add_flag("--strict-gamma", o.strict_gamma, "require presence strictly above gamma");
    cmd->add_option("--theta-s", o.theta_s, "task-specificity threshold")->capture_default_str();
    cmd->add_flag("--filter-specificity", o.filter, "drop domains scoring below --theta-s");
    cmd->add_flag("--sample-weighted", o.sample_weighted,
                  "weight domains by sample count in global contribution");
    cmd->add_flag("--renormalize", o.renormalize, "renormalize routing vectors on read");
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--format", o.format, "csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
}

ca::AuditConfig to_config(const Options& o) {
    ca::AuditConfig cfg;
    cfg.k_override = o.k;
    cfg.gamma = o.gamma;
    cfg.strict_gamma = o.strict_gamma;
    cfg.theta_s = o.theta_s;
    cfg.apply_specificity_filter = o.filter;
    if (!o.sweep_ks.empty()) {
        cfg.sweep_ks = o.sweep_ks;
        cfg.sweep_ks_explicit = true;
    }
    cfg.reference_k = o.reference_k;
    cfg.min_domains = o.min_domains;
    cfg.anchor_layer = o.layer;
    if (!o.tokens.empty()) cfg.tokens_path = o.tokens;
    cfg.anchor_experts = o.experts;
    cfg.weighting = o.sample_weighted ? ca::DomainWeighting::SampleWeighted : ca::DomainWeighting::Unweighted;
    cfg.renormalize = o.renormalize;
    if (!o.out.empty()) cfg.output_dir = o.out;
    cfg.format = o.format == "csv" ? ca::OutputFormat::Csv
                 : o.format == "json" ? ca::OutputFormat::Json
                                      : ca::OutputFormat::Both;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit mixture-of-experts routing traces for cross-domain expert committees"};
    app.set_version_flag("--version", ca::kToolVersion);
    app.require_subcommand(1);
    Options o;

    auto* validate = app.add_subcommand("validate", "check a trace file and print a validation report");
    validate->add_option("trace", o.input, "trace file")->required();
    validate->add_flag("--renormalize", o.renormalize, "renormalize routing vectors on read");

    auto* profile = app.add_subcommand("profile", "per-layer, per-domain expert contribution profiles");
    auto* specificity = app.add_subcommand("specificity", "per-domain silhouette specificity scores");
    auto* committee = app.add_subcommand("committee", "extract the standing committee at each layer");
    auto* metrics = app.add_subcommand("metrics", "Jaccard overlap, Gini and Lorenz curves");
    auto* sweep = app.add_subcommand("sweep", "committee retention across routing budgets");
    auto* anchors = app.add_subcommand("anchors", "token x committee-expert anchor matrix");
    auto* audit = app.add_subcommand("audit", "run every analysis and write a summary");
    for (auto* cmd : {profile, specificity, committee, metrics, sweep, anchors, audit}) {
        cmd->add_option("trace", o.input, "trace file")->required();
        add_analysis_flags(cmd, o);
    }
    for (auto* cmd : {sweep, audit}) {
        cmd->add_option("--sweep-ks", o.sweep_ks, "routing budgets to sweep")->delimiter(',');
        cmd->add_option("--reference-k", o.reference_k, "budget whose committee is the reference");
    }
    for (auto* cmd : {anchors, audit}) {
        cmd->add_option("--min-domains", o.min_domains, "domains a token must activate an expert in")
            ->capture_default_str();
        cmd->add_option("--layer", o.layer, "inspect a single layer (default: any layer)");
        cmd->add_option("--tokens", o.tokens, "token list, one per line or a JSON array");
        cmd->add_option("--experts", o.experts, "explicit committee experts")->delimiter(',');
    }

    auto* synth = app.add_subcommand("synth", "generate a synthetic trace from a JSON spec");
    synth->add_option("spec", o.input, "synth spec JSON")->required();
    synth->add_option("--out", o.out, "output trace path")->required();
    synth->add_option("--seed", o.seed, "override the spec seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const ca::AuditConfig cfg = to_config(o);
    std::ostream& log = std::cerr;
    return ca::guarded(log, [&]() -> int {
        if (validate->parsed()) return ca::cmd_validate(o.input, cfg, std::cout);
        if (profile->parsed()) return ca::cmd_profile(o.input, cfg);
        if (specificity->parsed()) return ca::cmd_specificity(o.input, cfg);
        if (committee->parsed()) return ca::cmd_committee(o.input, cfg, log);
        if (metrics->parsed()) return ca::cmd_metrics(o.input, cfg);
        if (sweep->parsed()) return ca::cmd_sweep(o.input, cfg);
        if (anchors->parsed()) return ca::cmd_anchors(o.input, cfg, log);
        if (synth->parsed()) return ca::cmd_synth(o.input, o.out, o.seed);
        if (audit->parsed()) return ca::cmd_audit(o.input, cfg, log);
        return 1;
    });
}
