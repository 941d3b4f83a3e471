#pragma once

// Command surface: each cmd_* loads a trace, runs one analysis and writes its CSV/JSON files.
// Every emitted file carries a metadata block (tool version, config echo, conventions). Data
// files never contain timestamps, so identical inputs give byte-identical outputs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "committee_audit/anchors.hpp"
#include "committee_audit/committee.hpp"
#include "committee_audit/error.hpp"
#include "committee_audit/io.hpp"
#include "committee_audit/metrics.hpp"
#include "committee_audit/profiles.hpp"
#include "committee_audit/specificity.hpp"
#include "committee_audit/sweep.hpp"
#include "committee_audit/synth.hpp"
#include "committee_audit/trace.hpp"

namespace committee_audit {

inline constexpr const char* kToolName = "committee-audit";
inline constexpr const char* kToolVersion = "1.0.0";

enum class OutputFormat { Csv, Json, Both };

struct AuditConfig {
    std::optional<std::size_t> k_override;
    double gamma = 0.8;
    bool strict_gamma = false;
    double theta_s = 0.0;
    bool apply_specificity_filter = false;
    std::vector<std::size_t> sweep_ks{4, 6, 8, 12, 16};
    bool sweep_ks_explicit = false; // defaults above E are dropped; explicit ones are an error
    std::optional<std::size_t> reference_k;
    std::size_t min_domains = 3;
    std::optional<std::size_t> anchor_layer;
    std::optional<std::filesystem::path> tokens_path;
    std::vector<std::uint32_t> anchor_experts; // overrides the extracted committee when set
    DomainWeighting weighting = DomainWeighting::Unweighted;
    bool renormalize = false;
    std::filesystem::path output_dir = ".";
    OutputFormat format = OutputFormat::Both;

    bool csv() const { return format != OutputFormat::Json; }
    bool json() const { return format != OutputFormat::Csv; }

    CommitteeConfig committee(bool filter) const {
        CommitteeConfig c;
        c.k = k_override;
        c.gamma = gamma;
        c.strict_gamma = strict_gamma;
        c.theta_s = theta_s;
        c.apply_specificity_filter = filter;
        c.weighting = weighting;
        return c;
    }
};

inline void check_config(const AuditConfig& cfg) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw PreconditionError("--gamma must lie in [0, 1]");
    if (!(cfg.theta_s >= -1.0 && cfg.theta_s <= 1.0))
        throw PreconditionError("--theta-s must lie in [-1, 1]");
    if (cfg.min_domains < 1) throw PreconditionError("--min-domains must be at least 1");
    if (cfg.k_override && *cfg.k_override < 1) throw PreconditionError("--k must be at least 1");
}

inline nlohmann::json config_json(const AuditConfig& cfg) {
    nlohmann::json j;
    j["k"] = cfg.k_override ? nlohmann::json(*cfg.k_override) : nlohmann::json(nullptr);
    j["gamma"] = cfg.gamma;
    j["gamma_comparison"] = cfg.strict_gamma ? "strict" : "inclusive";
    j["theta_s"] = cfg.theta_s;
    j["apply_specificity_filter"] = cfg.apply_specificity_filter;
    j["sweep_ks"] = cfg.sweep_ks;
    j["reference_k"] = cfg.reference_k ? nlohmann::json(*cfg.reference_k) : nlohmann::json(nullptr);
    j["min_domains"] = cfg.min_domains;
    j["domain_weighting"] = cfg.weighting == DomainWeighting::Unweighted ? "unweighted" : "sample_weighted";
    j["renormalize"] = cfg.renormalize;
    return j;
}

inline nlohmann::json conventions_json() {
    return {
        {"rank_tie_break", "ascending_expert_index"},
        {"penalty_rank", "k+1"},
        {"variance", "population"},
        {"avg_sigma2", "mean_over_members"},
        {"ratio_formula", "committee_vs_periphery_density"},
        {"global_contribution", "mean_over_domains"},
        {"overall_aggregation", "unweighted_mean_over_layer_pair_cells"},
        {"used_fraction", "in_at_least_one_domain_topk"},
        {"sample_vector", "as_recorded"},
        {"silhouette_degenerate", "zero"},
    };
}

struct RunContext {
    std::string command;
    AuditConfig config;
    RoutingTrace trace;
    std::optional<TraceMeta> sidecar;
    ReadStats read_stats;

    std::size_t budget() const { return resolve_budget(trace, config.k_override); }

    nlohmann::json metadata() const {
        nlohmann::json j;
        j["tool"] = kToolName;
        j["version"] = kToolVersion;
        j["command"] = command;
        j["config"] = config_json(config);
        j["conventions"] = conventions_json();
        const TraceHeader& h = trace.header;
        j["trace"] = {{"num_experts", h.num_experts},   {"num_layers", h.num_layers},
                      {"routing_budget", h.routing_budget}, {"num_domains", h.num_domains},
                      {"num_samples", h.num_samples},   {"has_tokens", h.has_tokens()},
                      {"analysis_budget", budget()}};
        j["trace"]["sidecar"] = sidecar ? to_json(*sidecar) : nlohmann::json(nullptr);
        return j;
    }

    std::filesystem::path out(const std::string& name) const { return config.output_dir / name; }
};

inline RunContext load_context(const std::string& command, const std::filesystem::path& trace_path,
                               const AuditConfig& cfg) {
    check_config(cfg);
    RunContext ctx;
    ctx.command = command;
    ctx.config = cfg;
    ReadOptions opts;
    opts.renormalize = cfg.renormalize;
    ctx.trace = read_trace_file(trace_path, opts, &ctx.read_stats);
    ctx.sidecar = read_sidecar(trace_path);
    if (cfg.k_override && *cfg.k_override > ctx.trace.num_experts())
        throw PreconditionError("--k exceeds the trace's expert count");
    return ctx;
}

// ---------------------------------------------------------------------------------------------
// Validation

inline nlohmann::json validation_json(const ValidationReport& report, const ReadStats& stats) {
    nlohmann::json j;
    j["ok"] = report.ok();
    j["violations"] = nlohmann::json::array();
    for (const auto& v : report.violations)
        j["violations"].push_back({{"category", v.category}, {"message", v.message}});
    j["warnings"] = report.warnings;
    j["counts"] = {{"simplex_drift", report.simplex_drift},
                   {"negative_weights", report.negative_weights},
                   {"empty_domains", report.empty_domains},
                   {"token_flag_mismatch", report.token_flag_mismatch},
                   {"renormalized_vectors", stats.vectors_renormalized},
                   {"renormalized_beyond_tolerance", stats.vectors_beyond_tolerance}};
    j["bytes"] = stats.bytes_read;
    return j;
}

// ---------------------------------------------------------------------------------------------
// Profiles

inline std::string profiles_csv(const RunContext& ctx, const TaskProfileSet& p) {
    CsvBuilder csv(ctx.metadata(), {"layer", "domain", "expert", "eci"});
    for (std::size_t l = 0; l < p.num_layers; ++l)
        for (std::size_t d = 0; d < p.num_domains; ++d)
            for (std::size_t e = 0; e < p.num_experts; ++e)
                csv.row({std::to_string(l), p.domain_names[d], std::to_string(e),
                         format_real(p.at(l, d, e))});
    return csv.str();
}

inline nlohmann::json profiles_json(const RunContext& ctx, const TaskProfileSet& p) {
    nlohmann::json j;
    j["metadata"] = ctx.metadata();
    j["domains"] = p.domain_names;
    j["sample_counts"] = p.sample_counts;
    j["eci"] = nlohmann::json::array();
    for (std::size_t l = 0; l < p.num_layers; ++l) {
        nlohmann::json layer = nlohmann::json::array();
        for (std::size_t d = 0; d < p.num_domains; ++d) {
            const auto prof = p.profile(l, d);
            layer.push_back(std::vector<double>(prof.begin(), prof.end()));
        }
        j["eci"].push_back(std::move(layer));
    }
    return j;
}

// ---------------------------------------------------------------------------------------------
// Specificity

inline std::string specificity_csv(const RunContext& ctx, const SpecificityScores& s) {
    CsvBuilder csv(ctx.metadata(), {"layer", "domain", "samples", "S", "pass"});
    for (const auto& layer : s.layers)
        for (std::size_t d = 0; d < layer.domain_score.size(); ++d)
            csv.row({std::to_string(layer.layer), ctx.trace.domain_names[d],
                     std::to_string(layer.domain_size[d]), format_real(layer.domain_score[d]),
                     layer.domain_score[d] >= s.threshold ? "pass" : "fail"});
    return csv.str();
}

inline nlohmann::json specificity_json(const RunContext& ctx, const SpecificityScores& s) {
    nlohmann::json j;
    j["metadata"] = ctx.metadata();
    j["threshold"] = s.threshold;
    j["domains"] = ctx.trace.domain_names;
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : s.layers) {
        nlohmann::json l;
        l["layer"] = layer.layer;
        l["domain_score"] = layer.domain_score;
        l["domain_size"] = layer.domain_size;
        l["passing_domains"] = filter_domains(s, layer.layer, s.threshold);
        l["sample_index"] = layer.sample_index;
        l["silhouette"] = layer.silhouette;
        j["layers"].push_back(std::move(l));
    }
    return j;
}

// ---------------------------------------------------------------------------------------------
// Committees

inline std::string join_ids(const std::vector<std::uint32_t>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(ids[i]);
    }
    return s;
}

inline std::string committees_csv(const RunContext& ctx, const std::vector<Committee>& cs) {
    CsvBuilder csv(ctx.metadata(),
                   {"layer", "members", "size", "avg_mu", "avg_var", "eci_coverage", "ratio"});
    for (const auto& c : cs)
        csv.row({std::to_string(c.layer), join_ids(c.members), std::to_string(c.members.size()),
                 format_real(c.avg_mu), format_real(c.avg_var), format_real(c.eci_coverage),
                 format_real(c.ratio)});
    return csv.str();
}

inline nlohmann::json candidate_json(const CandidateStats& s) {
    return {{"expert", s.expert},
            {"presence", s.presence},
            {"mean_rank", s.mean_rank},
            {"rank_variance", s.rank_variance}};
}

inline nlohmann::json committee_json(const Committee& c) {
    nlohmann::json j;
    j["layer"] = c.layer;
    j["budget"] = c.budget;
    j["domains"] = c.domains;
    j["members"] = c.members;
    j["size"] = c.members.size();
    j["avg_mu"] = json_real(c.avg_mu);
    j["avg_var"] = json_real(c.avg_var);
    j["eci_coverage"] = c.eci_coverage;
    j["ratio"] = json_real(c.ratio);
    j["ratio_uniform_naive"] = json_real(c.ratio_uniform_naive);
    j["member_stats"] = nlohmann::json::array();
    for (const auto& s : c.member_stats) j["member_stats"].push_back(candidate_json(s));
    j["candidates"] = nlohmann::json::array();
    for (const auto& s : c.candidates) j["candidates"].push_back(candidate_json(s));
    j["empty_reason"] = c.empty() ? nlohmann::json(c.empty_reason) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json committees_json(const RunContext& ctx, const std::vector<Committee>& cs,
                                      bool filtered) {
    nlohmann::json j;
    j["metadata"] = ctx.metadata();
    j["specificity_filter"] = filtered;
    j["committees"] = nlohmann::json::array();
    j["warnings"] = nlohmann::json::array();
    for (const auto& c : cs) {
        j["committees"].push_back(committee_json(c));
        if (c.empty())
            j["warnings"].push_back("layer " + std::to_string(c.layer) + ": " + c.empty_reason);
    }
    return j;
}

// ---------------------------------------------------------------------------------------------
// Metrics

inline std::string jaccard_csv(const RunContext& ctx, const JaccardReport& r) {
    CsvBuilder csv(ctx.metadata(), {"layer", "domain_a", "domain_b", "jaccard"});
    const std::size_t t = r.domains.size();
    for (std::size_t l = 0; l < r.per_layer.size(); ++l)
        for (std::size_t a = 0; a < t; ++a)
            for (std::size_t b = 0; b < t; ++b)
                csv.row({std::to_string(l), ctx.trace.domain_names[r.domains[a]],
                         ctx.trace.domain_names[r.domains[b]], format_real(r.at(l, a, b))});
    return csv.str();
}

inline std::string metrics_summary_csv(const RunContext& ctx, const JaccardReport& j,
                                       const GiniReport& g) {
    CsvBuilder csv(ctx.metadata(), {"metric", "statistic", "value"});
    csv.row({"jaccard", "max", format_real(j.cells.max)});
    csv.row({"jaccard", "min", format_real(j.cells.min)});
    csv.row({"jaccard", "overall", format_real(j.cells.mean)});
    csv.row({"jaccard_layer_mean", "max", format_real(j.layer_mean_extrema.max)});
    csv.row({"jaccard_layer_mean", "min", format_real(j.layer_mean_extrema.min)});
    csv.row({"gini", "max", format_real(g.summary.max)});
    csv.row({"gini", "min", format_real(g.summary.min)});
    csv.row({"gini", "overall", format_real(g.summary.mean)});
    return csv.str();
}

inline std::string gini_csv(const RunContext& ctx, const GiniReport& g) {
    CsvBuilder csv(ctx.metadata(), {"layer", "gini", "used_fraction"});
    for (std::size_t l = 0; l < g.per_layer.size(); ++l)
        csv.row({std::to_string(l), format_real(g.per_layer[l]), format_real(g.lorenz[l].used_fraction)});
    return csv.str();
}

inline std::string lorenz_csv(const RunContext& ctx, const GiniReport& g) {
    CsvBuilder csv(ctx.metadata(), {"layer", "point", "population_share", "contribution_share"});
    for (std::size_t l = 0; l < g.lorenz.size(); ++l)
        for (std::size_t p = 0; p < g.lorenz[l].points.size(); ++p)
            csv.row({std::to_string(l), std::to_string(p),
                     format_real(g.lorenz[l].points[p].population_share),
                     format_real(g.lorenz[l].points[p].contribution_share)});
    return csv.str();
}

inline nlohmann::json stats_json(const SummaryStats& s) {
    return {{"max", json_real(s.max)}, {"min", json_real(s.min)}, {"overall", json_real(s.mean)}};
}

inline nlohmann::json metrics_json(const RunContext& ctx, const JaccardReport& jr, const GiniReport& g) {
    nlohmann::json j;
    j["metadata"] = ctx.metadata();
    j["budget"] = jr.budget;
    j["domains"] = ctx.trace.domain_names;
    j["jaccard"]["per_layer"] = jr.per_layer;
    j["jaccard"]["layer_means"] = jr.layer_means;
    j["jaccard"]["cell_extrema"] = stats_json(jr.cells);
    j["jaccard"]["layer_mean_extrema"] = stats_json(jr.layer_mean_extrema);
    j["gini"]["per_layer"] = g.per_layer;
    j["gini"]["summary"] = stats_json(g.summary);
    j["lorenz"] = nlohmann::json::array();
    for (std::size_t l = 0; l < g.lorenz.size(); ++l) {
        nlohmann::json c;
        c["layer"] = l;
        c["gini"] = g.lorenz[l].gini;
        c["area_gini"] = g.lorenz[l].area_gini;
        c["used_fraction"] = g.lorenz[l].used_fraction;
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : g.lorenz[l].points) pts.push_back({p.population_share, p.contribution_share});
        c["points"] = std::move(pts);
        j["lorenz"].push_back(std::move(c));
    }
    return j;
}

// ---------------------------------------------------------------------------------------------
// Sweep

inline std::vector<std::size_t> sweep_budgets(const RunContext& ctx, std::vector<std::string>& notes) {
    std::vector<std::size_t> ks;
    for (const auto k : ctx.config.sweep_ks) {
        if (k >= 1 && k <= ctx.trace.num_experts()) {
            ks.push_back(k);
        } else if (ctx.config.sweep_ks_explicit) {
            throw PreconditionError("sweep budget k=" + std::to_string(k) + " outside [1, E]");
        } else {
            notes.push_back("default sweep budget k=" + std::to_string(k) +
                            " skipped: exceeds expert count");
        }
    }
    return ks;
}

inline std::size_t sweep_reference(const RunContext& ctx) {
    return ctx.config.reference_k ? *ctx.config.reference_k : ctx.budget();
}

inline std::string sweep_csv(const RunContext& ctx, const SweepResult& r) {
    CsvBuilder csv(ctx.metadata(), {"k", "layer", "retention", "coverage", "committee_size"});
    for (const auto& p : r.points)
        for (std::size_t l = 0; l < p.committees.size(); ++l)
            csv.row({std::to_string(p.k), std::to_string(l),
                     p.retention[l] ? format_real(*p.retention[l]) : "",
                     format_real(p.coverage[l]), std::to_string(p.size[l])});
    return csv.str();
}

inline nlohmann::json sweep_json(const RunContext& ctx, const SweepResult& r,
                                 const std::vector<std::string>& notes) {
    nlohmann::json j;
    j["metadata"] = ctx.metadata();
    j["reference_k"] = r.reference_k;
    j["excluded_layers"] = r.excluded_layers;
    j["notes"] = notes;
    j["points"] = nlohmann::json::array();
    for (const auto& p : r.points) {
        nlohmann::json pj;
        pj["k"] = p.k;
        pj["mean_retention"] = p.mean_retention;
        pj["retention"] = nlohmann::json::array();
        for (const auto& x : p.retention) pj["retention"].push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
        pj["coverage"] = p.coverage;
        pj["size"] = p.size;
        pj["members"] = nlohmann::json::array();
        for (const auto& c : p.committees) pj["members"].push_back(c.members);
        j["points"].push_back(std::move(pj));
    }
    return j;
}

// ---------------------------------------------------------------------------------------------
// Anchors

inline std::vector<std::string> read_token_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> tokens;
    if (path.extension() == ".json") {
        nlohmann::json j;
        try {
            in >> j;
            tokens = j.get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": token list must be a JSON array of strings (" +
                              e.what() + ")");
        }
        return tokens;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) tokens.push_back(line);
    }
    return tokens;
}

inline std::string anchors_csv(const RunContext& ctx, const AnchorMatrix& m, bool counts) {
    std::vector<std::string> header{"token"};
    for (const auto e : m.experts) header.push_back("e" + std::to_string(e));
    CsvBuilder csv(ctx.metadata(), header);
    for (std::size_t r = 0; r < m.tokens.size(); ++r) {
        std::vector<std::string> row{m.tokens[r]};
        for (std::size_t c = 0; c < m.experts.size(); ++c)
            row.push_back(counts ? std::to_string(m.count(r, c)) : (m.is_marked(r, c) ? "1" : "0"));
        csv.row(row);
    }
    return csv.str();
}

inline nlohmann::json anchors_json(const RunContext& ctx, const AnchorMatrix& m) {
    nlohmann::json j;
    j["metadata"] = ctx.metadata();
    j["layer_mode"] = m.layer ? "single_layer" : "any_layer_union";
    j["layer"] = m.layer ? nlohmann::json(*m.layer) : nlohmann::json(nullptr);
    j["min_domains"] = m.min_domains;
    j["tokens"] = m.tokens;
    j["experts"] = m.experts;
    j["cells"] = nlohmann::json::array();
    for (std::size_t r = 0; r < m.tokens.size(); ++r) {
        for (std::size_t c = 0; c < m.experts.size(); ++c) {
            j["cells"].push_back({{"token", m.tokens[r]},
                                  {"expert", m.experts[c]},
                                  {"marked", m.is_marked(r, c)},
                                  {"domain_count", m.count(r, c)},
                                  {"domains", m.domain_lists[m.cell(r, c)]}});
        }
    }
    j["warnings"] = nlohmann::json::array();
    for (const auto& t : m.missing_tokens) j["warnings"].push_back("token not found in trace: " + t);
    return j;
}

// ---------------------------------------------------------------------------------------------
// Commands. Each returns the process exit status and writes into config.output_dir.

inline int exit_status(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Format: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Validation: return 4;
    case ErrorKind::Precondition: return 5;
    }
    return 1;
}

inline nlohmann::json error_json(const AuditError& e) {
    return {{"error", {{"kind", std::string(to_string(e.kind())) + " error"}, {"message", e.what()}}}};
}

/// Runs a command, turning library errors into a JSON error document on `out`.
template <typename Fn>
int guarded(std::ostream& out, Fn&& fn) {
    try {
        return fn();
    } catch (const AuditError& e) {
        out << error_json(e).dump() << '\n';
        return exit_status(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        out << error_json(IoError(e.what())).dump() << '\n';
        return exit_status(ErrorKind::Io);
    } catch (const std::exception& e) {
        out << nlohmann::json{{"error", {{"kind", "internal error"}, {"message", e.what()}}}}.dump() << '\n';
        return 1;
    }
}

inline int cmd_validate(const std::filesystem::path& trace_path, const AuditConfig& cfg,
                        std::ostream& out) {
    ReadOptions opts;
    opts.renormalize = cfg.renormalize;
    ReadStats stats;
    const RoutingTrace trace = read_trace_file(trace_path, opts, &stats);
    const auto meta = read_sidecar(trace_path);
    const ValidationReport report = validate_trace(trace);
    nlohmann::json j = validation_json(report, stats);
    j["sidecar"] = meta ? to_json(*meta) : nlohmann::json(nullptr);
    out << j.dump(2) << '\n';
    return report.ok() ? 0 : exit_status(ErrorKind::Validation);
}

inline int cmd_profile(const std::filesystem::path& trace_path, const AuditConfig& cfg) {
    const RunContext ctx = load_context("profile", trace_path, cfg);
    const TaskProfileSet p = compute_profiles(ctx.trace);
    if (cfg.csv()) write_text_file(ctx.out("profiles.csv"), profiles_csv(ctx, p));
    if (cfg.json()) write_json_file(ctx.out("profiles.json"), profiles_json(ctx, p));
    return 0;
}

inline int cmd_specificity(const std::filesystem::path& trace_path, const AuditConfig& cfg) {
    const RunContext ctx = load_context("specificity", trace_path, cfg);
    const SpecificityScores s = compute_specificity(ctx.trace, cfg.theta_s);
    if (cfg.csv()) write_text_file(ctx.out("specificity.csv"), specificity_csv(ctx, s));
    if (cfg.json()) write_json_file(ctx.out("specificity.json"), specificity_json(ctx, s));
    return 0;
}

inline void emit_committees(const RunContext& ctx, const std::vector<Committee>& cs, bool filtered,
                            const std::string& stem, std::ostream& log) {
    if (ctx.config.csv()) write_text_file(ctx.out(stem + ".csv"), committees_csv(ctx, cs));
    if (ctx.config.json()) write_json_file(ctx.out(stem + ".json"), committees_json(ctx, cs, filtered));
    for (const auto& c : cs) {
        if (c.empty()) log << "warning: layer " << c.layer << ": " << c.empty_reason << '\n';
    }
}

inline int cmd_committee(const std::filesystem::path& trace_path, const AuditConfig& cfg,
                         std::ostream& log) {
    const RunContext ctx = load_context("committee", trace_path, cfg);
    const auto cs = extract_committees(ctx.trace, cfg.committee(cfg.apply_specificity_filter));
    emit_committees(ctx, cs, cfg.apply_specificity_filter, "committees", log);
    return 0;
}

inline int cmd_metrics(const std::filesystem::path& trace_path, const AuditConfig& cfg) {
    const RunContext ctx = load_context("metrics", trace_path, cfg);
    const TaskProfileSet p = compute_profiles(ctx.trace);
    const JaccardReport jr = jaccard_report(p, ctx.budget());
    const GiniReport g = gini_report(p, ctx.budget(), cfg.weighting);
    if (cfg.csv()) {
        write_text_file(ctx.out("jaccard.csv"), jaccard_csv(ctx, jr));
        write_text_file(ctx.out("metrics_summary.csv"), metrics_summary_csv(ctx, jr, g));
        write_text_file(ctx.out("gini.csv"), gini_csv(ctx, g));
        write_text_file(ctx.out("lorenz.csv"), lorenz_csv(ctx, g));
    }
    if (cfg.json()) write_json_file(ctx.out("metrics.json"), metrics_json(ctx, jr, g));
    return 0;
}

inline int cmd_sweep(const std::filesystem::path& trace_path, const AuditConfig& cfg) {
    const RunContext ctx = load_context("sweep", trace_path, cfg);
    std::vector<std::string> notes;
    const auto ks = sweep_budgets(ctx, notes);
    const SweepResult r = run_sweep(ctx.trace, ks, sweep_reference(ctx),
                                    cfg.committee(cfg.apply_specificity_filter));
    if (cfg.csv()) write_text_file(ctx.out("sweep.csv"), sweep_csv(ctx, r));
    if (cfg.json()) write_json_file(ctx.out("sweep.json"), sweep_json(ctx, r, notes));
    return 0;
}

/// Committee experts for the anchor matrix: the explicit list, the layer's committee, or the
/// union over layers.
inline std::vector<std::uint32_t> anchor_committee(const RunContext& ctx,
                                                   const std::vector<Committee>& committees) {
    if (!ctx.config.anchor_experts.empty()) {
        std::set<std::uint32_t> s(ctx.config.anchor_experts.begin(), ctx.config.anchor_experts.end());
        return {s.begin(), s.end()};
    }
    if (ctx.config.anchor_layer) {
        if (*ctx.config.anchor_layer >= committees.size())
            throw PreconditionError("--layer out of range");
        return committees[*ctx.config.anchor_layer].members;
    }
    std::set<std::uint32_t> s;
    for (const auto& c : committees) s.insert(c.members.begin(), c.members.end());
    return {s.begin(), s.end()};
}

inline AnchorMatrix build_anchors(const RunContext& ctx, const std::vector<Committee>& committees) {
    const auto experts = anchor_committee(ctx, committees);
    const auto tokens = ctx.config.tokens_path ? read_token_list(*ctx.config.tokens_path)
                                               : distinct_tokens(ctx.trace);
    AnchorOptions opts;
    opts.layer = ctx.config.anchor_layer;
    opts.min_domains = ctx.config.min_domains;
    opts.k = ctx.budget();
    return anchor_matrix(ctx.trace, experts, tokens, opts);
}

inline void emit_anchors(const RunContext& ctx, const AnchorMatrix& m, std::ostream& log) {
    if (ctx.config.csv()) {
        write_text_file(ctx.out("anchors_marked.csv"), anchors_csv(ctx, m, false));
        write_text_file(ctx.out("anchors_counts.csv"), anchors_csv(ctx, m, true));
    }
    if (ctx.config.json()) write_json_file(ctx.out("anchors.json"), anchors_json(ctx, m));
    for (const auto& t : m.missing_tokens) log << "warning: token not found in trace: " << t << '\n';
}

inline int cmd_anchors(const std::filesystem::path& trace_path, const AuditConfig& cfg,
                       std::ostream& log) {
    const RunContext ctx = load_context("anchors", trace_path, cfg);
    std::vector<Committee> committees;
    if (cfg.anchor_experts.empty())
        committees = extract_committees(ctx.trace, cfg.committee(cfg.apply_specificity_filter));
    emit_anchors(ctx, build_anchors(ctx, committees), log);
    return 0;
}

inline int cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_path,
                     std::optional<std::uint64_t> seed) {
    SynthJob job = read_synth_job(spec_path);
    if (seed) job.spec.seed = *seed;
    const RoutingTrace trace = run_synth_job(job);
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    write_trace_file(trace, out_path);
    TraceMeta meta;
    meta.pooling = "last_token";
    meta.model = job.mode == SynthMode::Planted ? "synthetic-planted" : "synthetic-disjoint";
    meta.dataset = "synth seed " + std::to_string(job.spec.seed);
    write_sidecar(out_path, meta);
    return 0;
}

/// Every analysis into output_dir plus summary.json.
inline int cmd_audit(const std::filesystem::path& trace_path, const AuditConfig& cfg,
                     std::ostream& log) {
    const RunContext ctx = load_context("audit", trace_path, cfg);
    const RoutingTrace& trace = ctx.trace;
    if (trace.num_domains() < 2) throw PreconditionError("audit needs at least 2 domains");
    nlohmann::json summary;
    summary["metadata"] = ctx.metadata();

    const ValidationReport validation = validate_trace(trace);
    write_json_file(ctx.out("validation.json"), validation_json(validation, ctx.read_stats));
    summary["validation"] = {{"ok", validation.ok()}, {"warnings", validation.warnings}};

    const TaskProfileSet profiles = compute_profiles(trace);
    if (cfg.csv()) write_text_file(ctx.out("profiles.csv"), profiles_csv(ctx, profiles));
    if (cfg.json()) write_json_file(ctx.out("profiles.json"), profiles_json(ctx, profiles));

    const SpecificityScores specificity = compute_specificity(trace, cfg.theta_s);
    if (cfg.csv()) write_text_file(ctx.out("specificity.csv"), specificity_csv(ctx, specificity));
    if (cfg.json()) write_json_file(ctx.out("specificity.json"), specificity_json(ctx, specificity));
    summary["specificity"] = nlohmann::json::array();
    for (const auto& layer : specificity.layers)
        summary["specificity"].push_back(
            {{"layer", layer.layer},
             {"domain_score", layer.domain_score},
             {"passing_domains", filter_domains(specificity, layer.layer, cfg.theta_s)}});

    // Both committee modes are reported; the configured one is primary.
    const std::size_t k = ctx.budget();
    const auto primary = extract_committees(profiles, k, cfg.committee(cfg.apply_specificity_filter),
                                            &specificity);
    const auto alternate = extract_committees(profiles, k, cfg.committee(!cfg.apply_specificity_filter),
                                              &specificity);
    const auto& unfiltered = cfg.apply_specificity_filter ? alternate : primary;
    const auto& filtered = cfg.apply_specificity_filter ? primary : alternate;
    emit_committees(ctx, unfiltered, false, "committees", log);
    emit_committees(ctx, filtered, true, "committees_filtered", log);
    auto brief = [](const std::vector<Committee>& cs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : cs)
            arr.push_back({{"layer", c.layer},
                           {"members", c.members},
                           {"eci_coverage", c.eci_coverage},
                           {"ratio", json_real(c.ratio)}});
        return arr;
    };
    summary["committees"] = brief(unfiltered);
    summary["committees_filtered"] = brief(filtered);

    const JaccardReport jr = jaccard_report(profiles, k);
    const GiniReport g = gini_report(profiles, k, cfg.weighting);
    if (cfg.csv()) {
        write_text_file(ctx.out("jaccard.csv"), jaccard_csv(ctx, jr));
        write_text_file(ctx.out("metrics_summary.csv"), metrics_summary_csv(ctx, jr, g));
        write_text_file(ctx.out("gini.csv"), gini_csv(ctx, g));
        write_text_file(ctx.out("lorenz.csv"), lorenz_csv(ctx, g));
    }
    if (cfg.json()) write_json_file(ctx.out("metrics.json"), metrics_json(ctx, jr, g));
    summary["jaccard"] = {{"cell_extrema", stats_json(jr.cells)},
                          {"layer_mean_extrema", stats_json(jr.layer_mean_extrema)}};
    summary["gini"] = {{"per_layer", g.per_layer}, {"summary", stats_json(g.summary)}};

    std::vector<std::string> notes;
    const auto ks = sweep_budgets(ctx, notes);
    try {
        const SweepResult sweep = run_sweep(profiles, ks, sweep_reference(ctx),
                                            cfg.committee(cfg.apply_specificity_filter), &specificity);
        if (cfg.csv()) write_text_file(ctx.out("sweep.csv"), sweep_csv(ctx, sweep));
        if (cfg.json()) write_json_file(ctx.out("sweep.json"), sweep_json(ctx, sweep, notes));
        nlohmann::json mr = nlohmann::json::object();
        for (const auto& p : sweep.points) mr[std::to_string(p.k)] = p.mean_retention;
        summary["sweep"] = {{"reference_k", sweep.reference_k}, {"mean_retention", mr},
                            {"excluded_layers", sweep.excluded_layers}, {"notes", notes}};
    } catch (const PreconditionError& e) {
        summary["sweep"] = {{"skipped", e.what()}};
        log << "warning: sweep skipped: " << e.what() << '\n';
    }

    if (!trace.header.has_tokens()) {
        summary["anchors"] = {{"skipped", "trace has no token records"}};
    } else if (anchor_committee(ctx, primary).empty()) {
        summary["anchors"] = {{"skipped", "no committee experts to anchor"}};
    } else {
        const AnchorMatrix m = build_anchors(ctx, primary);
        emit_anchors(ctx, m, log);
        std::size_t marked = 0;
        for (const auto v : m.marked) marked += v;
        summary["anchors"] = {{"tokens", m.tokens.size()},
                              {"experts", m.experts},
                              {"marked_cells", marked},
                              {"layer_mode", m.layer ? "single_layer" : "any_layer_union"}};
    }

    write_json_file(ctx.out("summary.json"), summary);
    return 0;
}

} // namespace committee_audit
