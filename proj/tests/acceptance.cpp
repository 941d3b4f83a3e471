// Acceptance suite: prints one PASS/FAIL line per criterion, exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "committee_audit.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ca = committee_audit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

void set_threads(const char* n) {
    if (n) {
        ::setenv("COMMITTEEAUDIT_THREADS", n, 1);
    } else {
        ::unsetenv("COMMITTEEAUDIT_THREADS");
    }
}

// 1
Outcome ratio_rows() {
    struct Row {
        double coverage;
        std::size_t size, experts;
        double printed;
    };
    const Row rows[] = {{0.663, 4, 64, 29.5},   {0.439, 3, 64, 15.94}, {0.540, 4, 128, 36.43},
                        {0.215, 1, 64, 17.25},  {0.670, 5, 128, 49.88}};
    Outcome out;
    std::ostringstream msg;
    for (const auto& r : rows) {
        // global vector with the committee first, mass split evenly inside and outside
        std::vector<double> global(r.experts, (1.0 - r.coverage) / static_cast<double>(r.experts - r.size));
        std::vector<std::uint32_t> members;
        for (std::uint32_t i = 0; i < r.size; ++i) {
            global[i] = r.coverage / static_cast<double>(r.size);
            members.push_back(i);
        }
        const double got = ca::committee_stats(members, global).ratio;
        msg << " " << ca::format_real(got);
        if (std::fabs(got - r.printed) > 0.1 || std::fabs(ca::influence_ratio(r.coverage, r.size, r.experts) - got) > 1e-9)
            out.fail("ratio " + ca::format_real(got) + " vs printed " + ca::format_real(r.printed));
    }
    if (out.ok) out.detail = "ratios" + msg.str();
    return out;
}

// 2
Outcome planted_recovery() {
    Outcome out;
    set_threads("1");
    const ca::RoutingTrace t = ca::generate(fixtures::planted_spec());
    const auto cs = ca::extract_committees(t, ca::CommitteeConfig{});
    set_threads(nullptr);
    if (cs.size() != 8) out.fail("expected 8 layers");
    double worst = 0.0;
    for (const auto& c : cs) {
        if (c.members != std::vector<std::uint32_t>{5, 9, 21})
            out.fail("layer " + std::to_string(c.layer) + " members differ");
        worst = std::max(worst, std::fabs(c.eci_coverage - 0.6));
    }
    if (worst > 0.02) out.fail("coverage off by " + ca::format_real(worst));
    if (out.ok) out.detail = "{5,9,21} on 8/8 layers, max |coverage-0.6| " + ca::format_real(worst);
    return out;
}

// 3
Outcome disjoint_null() {
    Outcome out;
    ca::SynthSpec s;
    s.num_domains = 4;
    s.num_experts = 64;
    s.routing_budget = 8;
    const auto t = ca::generate_disjoint(s);
    const auto profiles = ca::compute_profiles(t);
    const auto cs = ca::extract_committees(profiles, 8, ca::CommitteeConfig{});
    for (const auto& c : cs)
        if (!c.candidates.empty()) out.fail("candidates at layer " + std::to_string(c.layer));
    const auto jr = ca::jaccard_report(profiles, 8);
    if (!(jr.cells.max < 0.05)) out.fail("off-diagonal jaccard " + ca::format_real(jr.cells.max));
    if (out.ok) out.detail = "no candidates on any layer, max off-diagonal jaccard " + ca::format_real(jr.cells.max);
    return out;
}

// 4
Outcome gini_oracle() {
    Outcome out;
    ca::SplitMix64 rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + rng.below(255);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.below(4) == 0 ? 0.0 : rng.uniform();
        if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
        worst = std::max(worst, std::fabs(ca::gini(v) - oracle::gini_double_sum(v)));
    }
    if (worst > 1e-9) out.fail("max deviation " + ca::format_real(worst));
    for (std::size_t n = 2; n <= 256; ++n) {
        const std::vector<double> u(n, 1.0 / static_cast<double>(n));
        if (ca::gini(u) != 0.0) out.fail("uniform gini nonzero at E=" + std::to_string(n));
    }
    const std::vector<double> onehot{0, 1, 0, 0};
    if (ca::gini(onehot) != 0.75) out.fail("one-hot gini " + ca::format_real(ca::gini(onehot)));
    if (out.ok) out.detail = "1000 vectors, max deviation " + ca::format_real(worst);
    return out;
}

// 5
Outcome silhouette_oracle() {
    Outcome out;
    ca::SplitMix64 rng(55);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const auto domains = static_cast<std::uint32_t>(3 + rng.below(3));
        const auto E = static_cast<std::uint32_t>(4 + rng.below(29));
        const std::size_t n = domains * 2 + rng.below(200 - domains * 2 + 1);
        std::vector<std::string> names;
        for (std::uint32_t d = 0; d < domains; ++d) names.push_back("d" + std::to_string(d));
        std::vector<std::pair<std::uint32_t, std::vector<double>>> samples;
        std::vector<std::vector<double>> x;
        std::vector<std::uint32_t> lab;
        for (std::size_t i = 0; i < n; ++i) {
            const auto d = static_cast<std::uint32_t>(i < domains ? i : rng.below(domains));
            auto v = fixtures::random_simplex(rng, E);
            samples.push_back({d, v});
            x.push_back(v);
            lab.push_back(d);
        }
        const auto t = fixtures::make_trace(E, 1, 1, names, samples);
        const auto got = ca::silhouette_scores(t, 0);
        const auto ref = oracle::silhouette(x, lab, domains);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(got.silhouette[i] - ref[i]));
    }
    if (worst > 1e-9) out.fail("max deviation " + ca::format_real(worst));

    auto sep = fixtures::make_trace(2, 1, 1, {"A", "B"}, {{0, {1, 0}}, {0, {1, 0}}, {1, {0, 1}}, {1, {0, 1}}});
    const auto s = ca::silhouette_scores(sep, 0);
    if (s.domain_score != std::vector<double>{1.0, 1.0}) out.fail("separated clusters do not score 1");
    if (out.ok) out.detail = "50 instances, max deviation " + ca::format_real(worst) + ", separated S=1";
    return out;
}

// 6
Outcome pareto_oracle() {
    Outcome out;
    ca::SplitMix64 rng(606);
    std::size_t with_dups = 0;
    for (int inst = 0; inst < 500; ++inst) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<ca::CandidateStats> cs;
        std::vector<oracle::Point> pts;
        // half the instances use rank-derived statistics, half a coarse grid that forces duplicates
        const bool from_ranks = inst % 2 == 0;
        ca::RankMatrix m;
        if (from_ranks) {
            m.budget = 4;
            m.num_experts = n;
            const std::size_t rows = 2 + rng.below(8);
            for (std::size_t r = 0; r < rows; ++r) {
                m.domains.push_back(r);
                for (std::size_t e = 0; e < n; ++e) m.ranks.push_back(static_cast<std::uint32_t>(1 + rng.below(5)));
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            ca::CandidateStats c;
            if (from_ranks) {
                c = ca::expert_stats(m, i);
            } else {
                c.expert = static_cast<std::uint32_t>(i);
                c.mean_rank = 1.0 + static_cast<double>(rng.below(5));
                c.rank_variance = static_cast<double>(rng.below(5)) / 2.0;
            }
            cs.push_back(c);
            pts.push_back({c.expert, c.mean_rank, c.rank_variance});
        }
        const auto front = ca::pareto_front(cs);
        const auto ref = oracle::brute_pareto(pts);
        if (front != ref) {
            out.fail("instance " + std::to_string(inst) + " differs");
            break;
        }
        for (std::size_t a = 0; a < front.size(); ++a)
            for (std::size_t b = a + 1; b < front.size(); ++b)
                if (cs[front[a]].mean_rank == cs[front[b]].mean_rank &&
                    cs[front[a]].rank_variance == cs[front[b]].rank_variance)
                    ++with_dups;
    }
    if (with_dups == 0) out.fail("no duplicate front points exercised");
    if (out.ok) out.detail = "500 sets match, " + std::to_string(with_dups) + " duplicate front pairs kept";
    return out;
}

// 7
Outcome sweep_consistency() {
    Outcome out;
    const std::vector<std::size_t> ks{4, 6, 8, 12, 16};
    const auto planted = ca::run_sweep(ca::generate(fixtures::planted_spec()), ks, 8, ca::CommitteeConfig{});
    for (const auto& p : planted.points)
        for (const auto& r : p.retention)
            if (!r || *r != 1.0) out.fail("planted retention below 1 at k=" + std::to_string(p.k));

    std::size_t counted = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto spec = fixtures::planted_spec();
        spec.seed = seed;
        spec.num_layers = 3;
        spec.samples_per_domain = 30;
        spec.committee_mass = 0.1 * static_cast<double>(seed % 5);
        spec.planted_committee = spec.committee_mass > 0 ? std::vector<std::uint32_t>{2, 3} : std::vector<std::uint32_t>{};
        spec.noise_concentration = 0.3;
        const auto t = ca::generate(spec);
        try {
            const auto r = ca::run_sweep(t, {2, 4}, 3, ca::CommitteeConfig{});
            for (const auto& x : r.at(3).retention) {
                if (!x) continue;
                ++counted;
                if (*x != 1.0) out.fail("self retention below 1 (seed " + std::to_string(seed) + ")");
            }
        } catch (const ca::PreconditionError&) {
            // every reference layer empty; nothing to count
        }
    }
    if (counted == 0) out.fail("no counted layers in self-retention check");
    if (out.ok)
        out.detail = "planted retention 1.0 at k in {4,6,8,12,16}; self retention 1.0 on " +
                     std::to_string(counted) + " counted layers";
    return out;
}

// 8
Outcome round_trip() {
    Outcome out;
    std::size_t tokens = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto t = fixtures::random_trace(seed * 7919, seed % 3 != 0);
        for (const auto& s : t.samples) tokens += s.tokens.size();
        const std::string b = ca::encode_trace(t);
        const auto back = ca::decode_trace(b);
        if (!(back == t)) out.fail("field mismatch at seed " + std::to_string(seed));
        if (ca::encode_trace(back) != b) out.fail("byte mismatch at seed " + std::to_string(seed));
    }
    if (tokens == 0) out.fail("no token records exercised");
    if (out.ok) out.detail = "100 traces field- and byte-exact, " + std::to_string(tokens) + " token records";
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 9
Outcome determinism() {
    Outcome out;
    const auto dir = fixtures::temp_dir("acceptance_determinism");
    auto spec = fixtures::planted_spec();
    spec.samples_per_domain = 50;
    spec.token_plants.push_back({"the", 9, 0.5, {}});
    spec.token_plants.push_back({"of", 40, 0.7, {0, 1, 2, 3}});
    ca::write_trace_file(ca::generate(spec), dir / "trace.cmta");
    std::ostringstream log;
    ca::AuditConfig cfg;
    cfg.output_dir = dir / "run1";
    set_threads("1");
    const int rc1 = ca::cmd_audit(dir / "trace.cmta", cfg, log);
    set_threads(nullptr);
    cfg.output_dir = dir / "run2";
    const int rc2 = ca::cmd_audit(dir / "trace.cmta", cfg, log);
    if (rc1 != 0 || rc2 != 0) out.fail("audit failed");
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "run1")) {
        ++files;
        const auto other = dir / "run2" / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other))
            out.fail(e.path().filename().string() + " differs");
    }
    const auto count2 = std::distance(fs::directory_iterator(dir / "run2"), fs::directory_iterator{});
    if (static_cast<std::size_t>(count2) != files) out.fail("file sets differ");
    if (out.ok) out.detail = std::to_string(files) + " files byte-identical (1 thread vs default)";
    return out;
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s; // 0 = no runtime bound
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "ratio formula reproduction", 1.0, ratio_rows},
        {2, "planted committee recovery", 10.0, planted_recovery},
        {3, "disjoint routing null case", 0.0, disjoint_null},
        {4, "gini oracle", 0.0, gini_oracle},
        {5, "silhouette oracle", 0.0, silhouette_oracle},
        {6, "pareto oracle", 0.0, pareto_oracle},
        {7, "sweep self-consistency", 0.0, sweep_consistency},
        {8, "trace round-trip", 0.0, round_trip},
        {9, "audit determinism", 0.0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0 && secs >= c.budget_s)
            o.fail("took " + ca::format_real(secs) + " s, limit " + ca::format_real(c.budget_s) + " s");
        if (!o.ok) ++failures;
        std::printf("%s criterion %d: %s (%.3f s) - %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs,
                    o.detail.c_str());
    }
    std::fflush(stdout);
    return failures == 0 ? 0 : 1;
}
