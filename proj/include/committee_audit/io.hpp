#pragma once

// Locale-independent CSV/JSON emission helpers.
//
// CSV: comma separated, '.' decimal point, LF line endings, UTF-8, one header row. Lines starting
// with '#' before the header carry the metadata block. Reals are printed with 6 significant
// digits; JSON keeps full round-trip precision, writes NaN as null and infinities as "inf".

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "committee_audit/error.hpp"

namespace committee_audit {

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

inline nlohmann::json json_real(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvBuilder {
public:
    /// `metadata` is emitted as one compact JSON object on a leading '#' line.
    CsvBuilder(const nlohmann::json& metadata, std::vector<std::string> header) {
        text_ = "# " + metadata.dump() + "\n";
        row(header);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) text_ += ',';
            text_ += csv_field(fields[i]);
        }
        text_ += '\n';
    }

    const std::string& str() const { return text_; }

private:
    std::string text_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

} // namespace committee_audit
