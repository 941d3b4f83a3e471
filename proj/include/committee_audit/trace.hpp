#pragma once

// Routing trace data model and the CMTA v1 binary layout.
//
//   header   "CMTA" u32 version u32 flags u32 E u32 L u32 k u32 num_domains u64 num_samples
//   domains  num_domains x (u16 byte length, UTF-8 bytes)
//   samples  num_samples x (u32 domain_id, L*E f32 layer-major
//                           [, u32 token_count, token_count x (u16 length, UTF-8, L*E f32)])
//
// All integers and floats are little-endian; the token block is present iff flags bit 0 is set.
// Weights are held as double in memory. On disk they are binary32, so values read from a file
// always round-trip exactly.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "committee_audit/error.hpp"

namespace committee_audit {

inline constexpr std::array<char, 4> kTraceMagic{'C', 'M', 'T', 'A'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::uint32_t kFlagTokens = 1u << 0;
inline constexpr double kSimplexTolerance = 1e-4;
inline constexpr std::size_t kHeaderBytes = 4 + 6 * 4 + 8;

struct TraceHeader {
    std::uint32_t version = kTraceVersion;
    std::uint32_t flags = 0;
    std::uint32_t num_experts = 0;
    std::uint32_t num_layers = 0;
    std::uint32_t routing_budget = 0;
    std::uint32_t num_domains = 0;
    std::uint64_t num_samples = 0;

    bool has_tokens() const { return (flags & kFlagTokens) != 0; }
    std::size_t vector_block() const {
        return static_cast<std::size_t>(num_experts) * num_layers;
    }

    bool operator==(const TraceHeader&) const = default;
};

struct TokenRecord {
    std::string text;
    std::vector<double> weights; // L*E, layer-major

    bool operator==(const TokenRecord&) const = default;
};

struct SampleRecord {
    std::uint32_t domain_id = 0;
    std::vector<double> weights; // L*E, layer-major; one routing vector per layer
    std::vector<TokenRecord> tokens;

    bool operator==(const SampleRecord&) const = default;
};

struct RoutingTrace {
    TraceHeader header;
    std::vector<std::string> domain_names;
    std::vector<SampleRecord> samples;

    std::size_t num_experts() const { return header.num_experts; }
    std::size_t num_layers() const { return header.num_layers; }
    std::size_t num_domains() const { return header.num_domains; }

    /// Sample-level routing vector of `sample` at `layer`.
    std::span<const double> vector(std::size_t sample, std::size_t layer) const {
        return layer_slice(samples[sample].weights, layer);
    }

    std::span<const double> layer_slice(const std::vector<double>& block, std::size_t layer) const {
        return std::span<const double>(block).subspan(layer * header.num_experts,
                                                      header.num_experts);
    }

    bool operator==(const RoutingTrace&) const = default;
};

// ---------------------------------------------------------------------------------------------
// Validation

struct Violation {
    std::string category;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> warnings;
    std::uint64_t simplex_drift = 0;       // vectors off the simplex by more than the tolerance
    std::uint64_t negative_weights = 0;    // vectors holding a negative or non-finite entry
    std::uint64_t empty_domains = 0;       // domains with no samples (warning only)
    std::uint64_t token_flag_mismatch = 0; // flag/records disagreement

    bool ok() const { return violations.empty(); }
};

namespace detail {

inline void check_vector(std::span<const double> v, const std::string& where,
                         ValidationReport& report) {
    double sum = 0.0;
    bool bad_entry = false;
    for (const double w : v) {
        if (!std::isfinite(w) || w < 0.0) bad_entry = true;
        sum += w;
    }
    if (bad_entry) {
        ++report.negative_weights;
        report.violations.push_back({"negative_weight", where + ": negative or non-finite weight"});
        return;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
        ++report.simplex_drift;
        report.violations.push_back(
            {"simplex", where + ": weights sum to " + std::to_string(sum) +
                            ", outside the simplex tolerance 1e-4"});
    }
}

} // namespace detail

/// Checks every data invariant of a trace. Never throws; an empty violation list means valid.
inline ValidationReport validate_trace(const RoutingTrace& trace) {
    ValidationReport report;
    const TraceHeader& h = trace.header;
    auto violate = [&](std::string category, std::string message) {
        report.violations.push_back({std::move(category), std::move(message)});
    };

    if (h.version != kTraceVersion) violate("header", "header.version must be 1");
    if (h.num_experts < 2) violate("header", "header.num_experts must be at least 2");
    if (h.num_layers < 1) violate("header", "header.num_layers must be at least 1");
    if (h.routing_budget < 1 || h.routing_budget > h.num_experts)
        violate("header", "header.routing_budget must lie in [1, num_experts]");
    if (h.num_domains < 1) violate("header", "header.num_domains must be at least 1");
    if ((h.flags & ~kFlagTokens) != 0) violate("header", "header.flags has unknown bits set");
    if (trace.domain_names.size() != h.num_domains)
        violate("domain_names", "domain_names has " + std::to_string(trace.domain_names.size()) +
                                    " entries, header declares " + std::to_string(h.num_domains));
    for (std::size_t d = 0; d < trace.domain_names.size(); ++d) {
        if (trace.domain_names[d].size() > std::numeric_limits<std::uint16_t>::max())
            violate("domain_names", "domain_names[" + std::to_string(d) + "] exceeds 65535 bytes");
    }
    if (trace.samples.size() != h.num_samples)
        violate("samples", "samples has " + std::to_string(trace.samples.size()) +
                               " records, header declares " + std::to_string(h.num_samples));
    if (!report.violations.empty()) return report; // shapes unknown; per-sample checks unsafe

    const std::size_t block = h.vector_block();
    std::vector<std::uint64_t> domain_use(h.num_domains, 0);
    std::uint64_t token_total = 0;
    for (std::size_t s = 0; s < trace.samples.size(); ++s) {
        const SampleRecord& rec = trace.samples[s];
        const std::string where = "samples[" + std::to_string(s) + "]";
        if (rec.domain_id >= h.num_domains) {
            violate("domain_id", where + ".domain_id out of range");
        } else {
            ++domain_use[rec.domain_id];
        }
        if (rec.weights.size() != block) {
            violate("vector_shape", where + ".weights must hold num_layers * num_experts values");
        } else {
            for (std::size_t l = 0; l < h.num_layers; ++l)
                detail::check_vector(trace.layer_slice(rec.weights, l),
                                     where + ".layer[" + std::to_string(l) + "]", report);
        }
        token_total += rec.tokens.size();
        for (std::size_t t = 0; t < rec.tokens.size(); ++t) {
            const TokenRecord& tok = rec.tokens[t];
            const std::string twhere = where + ".tokens[" + std::to_string(t) + "]";
            if (tok.text.size() > std::numeric_limits<std::uint16_t>::max())
                violate("token_shape", twhere + ".text exceeds 65535 bytes");
            if (tok.weights.size() != block) {
                violate("token_shape", twhere + ".weights must hold num_layers * num_experts values");
                continue;
            }
            for (std::size_t l = 0; l < h.num_layers; ++l)
                detail::check_vector(trace.layer_slice(tok.weights, l),
                                     twhere + ".layer[" + std::to_string(l) + "]", report);
        }
    }

    if (h.has_tokens() && token_total == 0) {
        ++report.token_flag_mismatch;
        violate("token_flag", "token flag without tokens");
    }
    if (!h.has_tokens() && token_total > 0) {
        ++report.token_flag_mismatch;
        violate("token_flag", "token records present but token flag unset");
    }
    for (std::size_t d = 0; d < domain_use.size(); ++d) {
        if (domain_use[d] == 0) {
            ++report.empty_domains;
            report.warnings.push_back("domain " + std::to_string(d) + " (" +
                                      trace.domain_names[d] + ") has no samples");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------------------------
// Writing

namespace detail {

class LeWriter {
public:
    explicit LeWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed at byte offset " + std::to_string(count_));
        count_ += n;
    }
    template <typename UInt>
    void uint(UInt v) {
        std::array<unsigned char, sizeof(UInt)> buf{};
        for (std::size_t i = 0; i < sizeof(UInt); ++i)
            buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
        bytes(buf.data(), buf.size());
    }
    void f32(double v) { uint(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void str16(const std::string& s) {
        uint(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void floats(const std::vector<double>& v) {
        for (const double w : v) f32(w);
    }
    std::uint64_t count() const { return count_; }

private:
    std::ostream& out_;
    std::uint64_t count_ = 0;
};

} // namespace detail

/// Serializes a trace in the CMTA v1 layout. Returns the number of bytes written.
/// Throws ValidationError naming the first offending field when the trace is invalid.
inline std::uint64_t write_trace(const RoutingTrace& trace, std::ostream& out) {
    const ValidationReport report = validate_trace(trace);
    if (!report.ok()) throw ValidationError(report.violations.front().message);

    const TraceHeader& h = trace.header;
    detail::LeWriter w(out);
    w.bytes(kTraceMagic.data(), kTraceMagic.size());
    w.uint(h.version);
    w.uint(h.flags);
    w.uint(h.num_experts);
    w.uint(h.num_layers);
    w.uint(h.routing_budget);
    w.uint(h.num_domains);
    w.uint(h.num_samples);
    for (const auto& name : trace.domain_names) w.str16(name);
    for (const auto& rec : trace.samples) {
        w.uint(rec.domain_id);
        w.floats(rec.weights);
        if (h.has_tokens()) {
            w.uint(static_cast<std::uint32_t>(rec.tokens.size()));
            for (const auto& tok : rec.tokens) {
                w.str16(tok.text);
                w.floats(tok.weights);
            }
        }
    }
    out.flush();
    if (!out) throw IoError("flush failed after " + std::to_string(w.count()) + " bytes");
    return w.count();
}

inline std::string encode_trace(const RoutingTrace& trace) {
    std::ostringstream out(std::ios::binary);
    write_trace(trace, out);
    return std::move(out).str();
}

inline std::uint64_t write_trace_file(const RoutingTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return write_trace(trace, out);
}

// ---------------------------------------------------------------------------------------------
// Reading

struct ReadOptions {
    /// Divide every vector by its sum instead of rejecting simplex drift.
    bool renormalize = false;
};

struct ReadStats {
    std::uint64_t bytes_read = 0;
    std::uint64_t vectors_renormalized = 0;
    std::uint64_t vectors_beyond_tolerance = 0; // accepted only because renormalize was set
};

namespace detail {

class LeReader {
public:
    explicit LeReader(std::istream& in) : in_(in) {}

    void bytes(void* dst, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got != n) {
            throw IoError("truncated trace: expected " + std::to_string(n) + " bytes of " + what +
                          " at byte offset " + std::to_string(offset_ + got));
        }
        offset_ += n;
    }
    template <typename UInt>
    UInt uint(const char* what) {
        std::array<unsigned char, sizeof(UInt)> buf{};
        bytes(buf.data(), buf.size(), what);
        UInt v = 0;
        for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
        return v;
    }
    std::string str16(const char* what) {
        const auto len = uint<std::uint16_t>(what);
        std::string s(len, '\0');
        if (len > 0) bytes(s.data(), len, what);
        return s;
    }
    void floats(std::vector<double>& out, std::size_t n, const char* what) {
        std::vector<unsigned char> raw(n * 4);
        bytes(raw.data(), raw.size(), what);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t bits = 0;
            for (std::size_t b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
            out[i] = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
    std::uint64_t offset() const { return offset_; }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

inline void admit_vector(std::span<double> v, const std::string& where, const ReadOptions& opts,
                         ReadStats& stats) {
    double sum = 0.0;
    for (const double w : v) {
        if (!std::isfinite(w) || w < 0.0)
            throw ValidationError(where + ": negative or non-finite weight");
        sum += w;
    }
    const bool drift = std::abs(sum - 1.0) > kSimplexTolerance;
    if (!opts.renormalize) {
        if (drift)
            throw ValidationError(where + ": weights sum to " + std::to_string(sum) +
                                  ", outside the simplex tolerance 1e-4");
        return;
    }
    if (sum <= 0.0) throw ValidationError(where + ": all-zero vector cannot be renormalized");
    for (double& w : v) w /= sum;
    ++stats.vectors_renormalized;
    if (drift) ++stats.vectors_beyond_tolerance;
}

} // namespace detail

/// Parses a CMTA v1 stream. Magic and version are checked before any payload is read, and the
/// stream must end exactly where the header says the payload ends.
inline RoutingTrace read_trace(std::istream& in, const ReadOptions& opts = {},
                               ReadStats* stats_out = nullptr) {
    detail::LeReader r(in);
    ReadStats stats;

    std::array<char, 4> magic{};
    r.bytes(magic.data(), magic.size(), "magic");
    if (magic != kTraceMagic) throw FormatError("bad magic: not a CMTA trace");

    RoutingTrace trace;
    TraceHeader& h = trace.header;
    h.version = r.uint<std::uint32_t>("header.version");
    if (h.version != kTraceVersion)
        throw FormatError("unsupported trace version " + std::to_string(h.version));
    h.flags = r.uint<std::uint32_t>("header.flags");
    h.num_experts = r.uint<std::uint32_t>("header.num_experts");
    h.num_layers = r.uint<std::uint32_t>("header.num_layers");
    h.routing_budget = r.uint<std::uint32_t>("header.routing_budget");
    h.num_domains = r.uint<std::uint32_t>("header.num_domains");
    h.num_samples = r.uint<std::uint64_t>("header.num_samples");

    if (h.num_experts < 2) throw ValidationError("header.num_experts must be at least 2");
    if (h.num_layers < 1) throw ValidationError("header.num_layers must be at least 1");
    if (h.routing_budget < 1 || h.routing_budget > h.num_experts)
        throw ValidationError("header.routing_budget must lie in [1, num_experts]");
    if (h.num_domains < 1) throw ValidationError("header.num_domains must be at least 1");
    if ((h.flags & ~kFlagTokens) != 0) throw ValidationError("header.flags has unknown bits set");

    trace.domain_names.reserve(h.num_domains);
    for (std::uint32_t d = 0; d < h.num_domains; ++d)
        trace.domain_names.push_back(r.str16("domain name"));

    const std::size_t block = h.vector_block();
    const std::size_t experts = h.num_experts;
    auto admit_block = [&](std::vector<double>& weights, const std::string& where) {
        for (std::size_t l = 0; l < h.num_layers; ++l)
            detail::admit_vector(std::span<double>(weights).subspan(l * experts, experts),
                                 where + ".layer[" + std::to_string(l) + "]", opts, stats);
    };

    trace.samples.resize(static_cast<std::size_t>(h.num_samples));
    std::uint64_t token_total = 0;
    for (std::size_t s = 0; s < trace.samples.size(); ++s) {
        SampleRecord& rec = trace.samples[s];
        const std::string where = "samples[" + std::to_string(s) + "]";
        rec.domain_id = r.uint<std::uint32_t>("domain_id");
        if (rec.domain_id >= h.num_domains)
            throw ValidationError(where + ".domain_id out of range");
        r.floats(rec.weights, block, "sample weights");
        admit_block(rec.weights, where);
        if (!h.has_tokens()) continue;
        const auto count = r.uint<std::uint32_t>("token count");
        token_total += count;
        rec.tokens.resize(count);
        for (std::size_t t = 0; t < count; ++t) {
            rec.tokens[t].text = r.str16("token text");
            r.floats(rec.tokens[t].weights, block, "token weights");
            admit_block(rec.tokens[t].weights, where + ".tokens[" + std::to_string(t) + "]");
        }
    }
    if (!r.at_end())
        throw FormatError("trailing bytes after payload at byte offset " +
                          std::to_string(r.offset()));
    if (h.has_tokens() && token_total == 0)
        throw ValidationError("token flag without tokens");

    stats.bytes_read = r.offset();
    if (stats_out) *stats_out = stats;
    return trace;
}

inline RoutingTrace decode_trace(const std::string& bytes, const ReadOptions& opts = {},
                                 ReadStats* stats = nullptr) {
    std::istringstream in(bytes, std::ios::binary);
    return read_trace(in, opts, stats);
}

inline RoutingTrace read_trace_file(const std::filesystem::path& path, const ReadOptions& opts = {},
                                    ReadStats* stats = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_trace(in, opts, stats);
}

/// Exact on-disk size implied by a trace's header and string lengths.
inline std::uint64_t encoded_size(const RoutingTrace& trace) {
    const std::uint64_t block_bytes = 4ull * trace.header.vector_block();
    std::uint64_t n = kHeaderBytes;
    for (const auto& name : trace.domain_names) n += 2 + name.size();
    for (const auto& rec : trace.samples) {
        n += 4 + block_bytes;
        if (!trace.header.has_tokens()) continue;
        n += 4;
        for (const auto& tok : rec.tokens) n += 2 + tok.text.size() + block_bytes;
    }
    return n;
}

// ---------------------------------------------------------------------------------------------
// ".meta.json" sidecar

struct TraceMeta {
    std::optional<std::string> pooling; // "last_token" | "mean"
    std::optional<std::string> model;
    std::optional<std::string> dataset;

    bool operator==(const TraceMeta&) const = default;
};

/// trace.cmta -> trace.meta.json
inline std::filesystem::path sidecar_path(const std::filesystem::path& trace_path) {
    auto p = trace_path;
    p.replace_extension(".meta.json");
    return p;
}

inline nlohmann::json to_json(const TraceMeta& meta) {
    nlohmann::json j = nlohmann::json::object();
    if (meta.pooling) j["pooling"] = *meta.pooling;
    if (meta.model) j["model"] = *meta.model;
    if (meta.dataset) j["dataset"] = *meta.dataset;
    return j;
}

inline TraceMeta meta_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("sidecar must be a JSON object");
    TraceMeta meta;
    auto field = [&](const char* key, std::optional<std::string>& slot) {
        if (!j.contains(key)) return;
        if (!j[key].is_string()) throw FormatError(std::string("sidecar key '") + key +
                                                    "' must be a string");
        slot = j[key].get<std::string>();
    };
    field("pooling", meta.pooling);
    field("model", meta.model);
    field("dataset", meta.dataset);
    if (meta.pooling && *meta.pooling != "last_token" && *meta.pooling != "mean")
        throw FormatError("sidecar pooling must be \"last_token\" or \"mean\"");
    return meta;
}

/// Loads the sidecar next to a trace, if one exists.
inline std::optional<TraceMeta> read_sidecar(const std::filesystem::path& trace_path) {
    const auto path = sidecar_path(trace_path);
    if (!std::filesystem::exists(path)) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return meta_from_json(j);
}

inline void write_sidecar(const std::filesystem::path& trace_path, const TraceMeta& meta) {
    const auto path = sidecar_path(trace_path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json(meta).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace committee_audit
