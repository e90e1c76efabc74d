#pragma once

// Tecplot ASCII (POINT packing) multi-zone reader/writer and the structured
// grid containers shared by every other module. Zones are I x J blocks of
// named columns with I varying fastest.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shockfusion/common.hpp"

namespace shockfusion::io {

enum class ConditionKind { back_pressure, viscosity, throat_ratio };

inline std::string to_string(ConditionKind k) {
    switch (k) {
        case ConditionKind::back_pressure: return "back_pressure";
        case ConditionKind::viscosity: return "viscosity";
        case ConditionKind::throat_ratio: return "throat_ratio";
    }
    return "back_pressure";
}

inline ConditionKind condition_kind_from_string(const std::string& s) {
    if (s == "back_pressure") return ConditionKind::back_pressure;
    if (s == "viscosity") return ConditionKind::viscosity;
    if (s == "throat_ratio") return ConditionKind::throat_ratio;
    throw ConfigError("unknown condition_kind: " + s);
}

struct Column {
    std::string name;
    std::vector<double> values;
};

struct ZoneGrid {
    int i_count = 0;
    int j_count = 0;
    std::vector<Column> columns;  // point order: row-major, I varying fastest

    int point_count() const { return i_count * j_count; }

    const Column* find(std::string_view name) const {
        for (const auto& c : columns)
            if (c.name == name) return &c;
        return nullptr;
    }
    Column* find(std::string_view name) {
        for (auto& c : columns)
            if (c.name == name) return &c;
        return nullptr;
    }
    const Column& require(std::string_view name) const {
        const Column* c = find(name);
        if (!c) throw ShapeMismatch("zone has no column named '" + std::string(name) + "'");
        return *c;
    }

    // Coordinate columns are the first two by convention (X and Y, or X and T
    // for space-time Burgers grids).
    const Column& coord0() const { return columns.at(0); }
    const Column& coord1() const { return columns.at(1); }
};

struct CaseRecord {
    std::vector<ZoneGrid> zones;
    double condition = 0.0;
    ConditionKind condition_kind = ConditionKind::back_pressure;
    std::string source_path;

    int total_points() const {
        int n = 0;
        for (const auto& z : zones) n += z.point_count();
        return n;
    }
};

// ---------------------------------------------------------------------------
// Number formatting: shortest round-trip decimal so parse(write(x)) == x.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

struct Tokenizer {
    std::string_view text;
    std::size_t pos = 0;
    int line = 1;

    // Returns next whitespace-separated token, tracking line numbers.
    std::optional<std::string_view> next() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
            if (text[pos] == '\n') ++line;
            ++pos;
        }
        if (pos >= text.size()) return std::nullopt;
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    }

    std::optional<std::string_view> peek() {
        const std::size_t save_pos = pos;
        const int save_line = line;
        auto t = next();
        pos = save_pos;
        line = save_line;
        return t;
    }
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = char(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

inline bool istarts_with(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(s[i])) !=
            std::toupper(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

// Extracts quoted names from a VARIABLES declaration body; bare names
// separated by commas/spaces are also accepted.
inline std::vector<std::string> parse_variable_names(std::string_view body) {
    std::vector<std::string> names;
    std::size_t i = 0;
    while (i < body.size()) {
        const char c = body[i];
        if (c == '"') {
            const std::size_t end = body.find('"', i + 1);
            if (end == std::string_view::npos) break;
            names.emplace_back(body.substr(i + 1, end - i - 1));
            i = end + 1;
        } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '=') {
            ++i;
        } else {
            std::size_t end = i;
            while (end < body.size() && !std::isspace(static_cast<unsigned char>(body[end])) &&
                   body[end] != ',' && body[end] != '"')
                ++end;
            names.emplace_back(body.substr(i, end - i));
            i = end;
        }
    }
    return names;
}

struct ZoneHeader {
    int i = -1, j = -1;
    bool point_packing = false;
};

// Parses `ZONE I=<n>, J=<m>, F=POINT` (or DATAPACKING=POINT); tolerates a
// quoted T="title" entry and arbitrary key order.
inline ZoneHeader parse_zone_header(std::string_view body, int line) {
    ZoneHeader h;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < body.size() && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ','))
            ++i;
    };
    while (i < body.size()) {
        skip_ws();
        if (i >= body.size()) break;
        std::size_t eq = body.find('=', i);
        if (eq == std::string_view::npos) break;
        std::string key = upper(std::string_view(body.data() + i, eq - i));
        // trim key
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
        i = eq + 1;
        skip_ws();
        std::string value;
        if (i < body.size() && body[i] == '"') {
            const std::size_t end = body.find('"', i + 1);
            if (end == std::string_view::npos)
                throw MalformedHeader("unterminated quote in ZONE header at line " + std::to_string(line));
            value = std::string(body.substr(i + 1, end - i - 1));
            i = end + 1;
        } else {
            std::size_t end = i;
            while (end < body.size() && body[end] != ',' &&
                   !std::isspace(static_cast<unsigned char>(body[end])))
                ++end;
            value = std::string(body.substr(i, end - i));
            i = end;
        }
        if (key == "I") h.i = std::atoi(value.c_str());
        else if (key == "J") h.j = std::atoi(value.c_str());
        else if (key == "F" || key == "DATAPACKING") h.point_packing = upper(value) == "POINT";
        // other keys (T=..., K=...) are ignored
    }
    if (h.i <= 0 || h.j <= 0)
        throw MalformedHeader("ZONE header missing positive I/J at line " + std::to_string(line));
    if (!h.point_packing)
        throw MalformedHeader("ZONE header does not declare POINT packing at line " + std::to_string(line));
    return h;
}

inline double parse_number(std::string_view tok, int line) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw NonNumericToken("non-numeric token '" + std::string(tok) + "' at line " +
                              std::to_string(line));
    return v;
}

}  // namespace detail

/// Parses a Tecplot ASCII multi-zone POINT file. The scalar condition is not
/// stored in the file; it is supplied by the caller (manifest or flag).
inline CaseRecord parse_tecplot(std::string_view text) {
    CaseRecord rec;
    // Header scan: optional TITLE line, mandatory VARIABLES line, then zones.
    std::vector<std::string> var_names;
    std::size_t pos = 0;
    int line = 1;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= text.size()) return std::nullopt;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view l = text.substr(pos, end - pos);
        pos = end + (end < text.size() ? 1 : 0);
        ++line;
        return l;
    };

    // locate VARIABLES (may be preceded by TITLE / comments / blank lines)
    std::size_t data_start = 0;
    int data_line = 1;
    while (true) {
        const int this_line = line;
        auto l = next_line();
        if (!l) throw MalformedHeader("missing VARIABLES declaration");
        std::string_view s = *l;
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        if (s.empty() || s.front() == '#') continue;
        if (detail::istarts_with(s, "TITLE")) continue;
        if (detail::istarts_with(s, "VARIABLES")) {
            std::size_t eq = s.find('=');
            if (eq == std::string_view::npos)
                throw MalformedHeader("VARIABLES line without '=' at line " + std::to_string(this_line));
            var_names = detail::parse_variable_names(s.substr(eq + 1));
            data_start = pos;
            data_line = line;
            break;
        }
        throw MalformedHeader("expected VARIABLES declaration, got '" + std::string(s.substr(0, 32)) +
                              "' at line " + std::to_string(this_line));
    }
    if (var_names.empty()) throw MalformedHeader("VARIABLES declaration names no columns");
    for (std::size_t a = 0; a < var_names.size(); ++a)
        for (std::size_t b = a + 1; b < var_names.size(); ++b)
            if (var_names[a] == var_names[b])
                throw MalformedHeader("duplicate column name '" + var_names[a] + "'");

    // Token-level scan of the remainder: zone headers followed by I*J rows.
    detail::Tokenizer tz{text.substr(data_start), 0, data_line};
    const int ncols = int(var_names.size());
    while (true) {
        auto tok = tz.next();
        if (!tok) break;
        if (!detail::istarts_with(*tok, "ZONE"))
            throw MalformedHeader("expected ZONE header at line " + std::to_string(tz.line));
        // zone header spans to end of line
        std::size_t eol = tz.text.find('\n', tz.pos);
        if (eol == std::string_view::npos) eol = tz.text.size();
        std::string_view header_body = tz.text.substr(tz.pos, eol - tz.pos);
        // the token itself may carry part of the header (e.g. "ZONE" alone)
        std::string full_header = std::string(tok->substr(4)) + " " + std::string(header_body);
        detail::ZoneHeader zh = detail::parse_zone_header(full_header, tz.line);
        tz.pos = eol;

        ZoneGrid zone;
        zone.i_count = zh.i;
        zone.j_count = zh.j;
        zone.columns.resize(var_names.size());
        for (int c = 0; c < ncols; ++c) {
            zone.columns[c].name = var_names[c];
            zone.columns[c].values.reserve(std::size_t(zh.i) * zh.j);
        }
        const std::size_t expected = std::size_t(zh.i) * zh.j;
        for (std::size_t r = 0; r < expected; ++r) {
            for (int c = 0; c < ncols; ++c) {
                auto peek = tz.peek();
                if (!peek || detail::istarts_with(*peek, "ZONE"))
                    throw CountMismatch("zone declared " + std::to_string(expected) +
                                        " points but data ends after " + std::to_string(r) +
                                        " full rows (line " + std::to_string(tz.line) + ")");
                auto t = tz.next();
                zone.columns[c].values.push_back(detail::parse_number(*t, tz.line));
            }
        }
        // Extra rows before the next ZONE header also violate I*J.
        auto peek = tz.peek();
        if (peek && !detail::istarts_with(*peek, "ZONE"))
            throw CountMismatch("zone declared " + std::to_string(expected) +
                                " points but extra data follows (line " + std::to_string(tz.line) + ")");
        rec.zones.push_back(std::move(zone));
    }
    if (rec.zones.empty()) throw MalformedHeader("file declares no ZONE");
    return rec;
}

inline CaseRecord parse_tecplot_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    CaseRecord rec = parse_tecplot(ss.str());
    rec.source_path = path;
    return rec;
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

inline std::string write_tecplot(const CaseRecord& rec) {
    if (rec.zones.empty()) throw ShapeMismatch("cannot write a case with no zones");
    std::string out;
    out += "VARIABLES =";
    for (const auto& c : rec.zones.front().columns) out += " \"" + c.name + "\"";
    out += "\n";
    for (const auto& z : rec.zones) {
        if (int(z.columns.size()) != int(rec.zones.front().columns.size()))
            throw ShapeMismatch("zones carry differing column counts");
        for (std::size_t c = 0; c < z.columns.size(); ++c) {
            if (z.columns[c].name != rec.zones.front().columns[c].name)
                throw ShapeMismatch("zones carry differing column names");
            if (int(z.columns[c].values.size()) != z.point_count())
                throw LengthMismatch("column '" + z.columns[c].name + "' has " +
                                     std::to_string(z.columns[c].values.size()) + " values, zone needs " +
                                     std::to_string(z.point_count()));
        }
        out += "ZONE I=" + std::to_string(z.i_count) + ", J=" + std::to_string(z.j_count) +
               ", F=POINT\n";
        const int n = z.point_count();
        for (int r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < z.columns.size(); ++c) {
                if (c) out += ' ';
                out += format_double(z.columns[c].values[r]);
            }
            out += '\n';
        }
    }
    return out;
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Prediction output: U (and V when present) replaced by the model fields,
/// normalized pointwise error columns appended, everything else untouched.
/// Extra per-point columns (e.g. MC-dropout sigmas) may be appended too.
inline std::string write_prediction_file(const CaseRecord& rec, const std::vector<double>& pred_u,
                                         const std::vector<double>& pred_v, double epsilon,
                                         const std::vector<Column>& extra_columns = {}) {
    if (epsilon <= 0.0) throw Error("epsilon must be positive");
    const std::size_t total = std::size_t(rec.total_points());
    if (pred_u.size() != total)
        throw LengthMismatch("pred_u has " + std::to_string(pred_u.size()) + " values for " +
                             std::to_string(total) + " points");
    const bool has_v = rec.zones.front().find("V") != nullptr;
    if (has_v && pred_v.size() != total)
        throw LengthMismatch("pred_v has " + std::to_string(pred_v.size()) + " values for " +
                             std::to_string(total) + " points");
    for (const auto& ec : extra_columns)
        if (ec.values.size() != total)
            throw LengthMismatch("extra column '" + ec.name + "' length mismatch");

    CaseRecord out = rec;
    std::size_t offset = 0;
    for (auto& z : out.zones) {
        const std::size_t n = std::size_t(z.point_count());
        Column& u = *z.find("U");
        std::vector<double> err_u(n), err_u2(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double ut = u.values[i];
            const double up = pred_u[offset + i];
            err_u[i] = std::abs(ut - up) / std::max(std::abs(ut), epsilon);
            err_u2[i] = (ut - up) * (ut - up) / std::max(ut * ut, epsilon * epsilon);
        }
        std::vector<double> err_v, err_v2;
        if (has_v) {
            Column& v = *z.find("V");
            err_v.resize(n);
            err_v2.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double vt = v.values[i];
                const double vp = pred_v[offset + i];
                err_v[i] = std::abs(vt - vp) / std::max(std::abs(vt), epsilon);
                err_v2[i] = (vt - vp) * (vt - vp) / std::max(vt * vt, epsilon * epsilon);
            }
            for (std::size_t i = 0; i < n; ++i) v.values[i] = pred_v[offset + i];
        }
        for (std::size_t i = 0; i < n; ++i) u.values[i] = pred_u[offset + i];
        z.columns.push_back({"Error_U", std::move(err_u)});
        if (has_v) z.columns.push_back({"Error_V", std::move(err_v)});
        z.columns.push_back({"ErrorU_L2", std::move(err_u2)});
        if (has_v) z.columns.push_back({"ErrorV_L2", std::move(err_v2)});
        for (const auto& ec : extra_columns) {
            Column c;
            c.name = ec.name;
            c.values.assign(ec.values.begin() + offset, ec.values.begin() + offset + n);
            z.columns.push_back(std::move(c));
        }
        offset += n;
    }
    return write_tecplot(out);
}

// ---------------------------------------------------------------------------
// Grid spacing
// ---------------------------------------------------------------------------

/// Median spacing of the `axis` coordinate (0 = coord0 within coord1-rows,
/// 1 = coord1 across rows), floored at dx_min. Invariant to row permutation
/// and duplicated points.
inline double median_axis_spacing(const ZoneGrid& zone, int axis, double dx_min = 1e-12) {
    const std::vector<double>& a = axis == 0 ? zone.coord0().values : zone.coord1().values;
    const std::vector<double>& b = axis == 0 ? zone.coord1().values : zone.coord0().values;
    std::map<double, std::vector<double>> rows;
    for (std::size_t i = 0; i < a.size(); ++i) rows[b[i]].push_back(a[i]);
    std::vector<double> diffs;
    for (auto& [key, xs] : rows) {
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        for (std::size_t i = 1; i < xs.size(); ++i) diffs.push_back(xs[i] - xs[i - 1]);
    }
    if (diffs.empty())
        throw DegenerateGrid("no row with two distinct coordinate values along axis " +
                             std::to_string(axis));
    return std::max(median(std::move(diffs)), dx_min);
}

/// Median spacing along each constant-coord1 row (the paper's robust dx).
inline double median_row_spacing(const ZoneGrid& zone, double dx_min = 1e-12) {
    return median_axis_spacing(zone, 0, dx_min);
}

// ---------------------------------------------------------------------------
// Manifest: JSON object mapping file path -> {condition, condition_kind}.
// Relative paths resolve against the manifest's own directory.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string path;
    double condition = 0.0;
    ConditionKind condition_kind = ConditionKind::back_pressure;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("manifest '" + manifest_path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("manifest must be a JSON object of path -> entry");
    const auto base = std::filesystem::path(manifest_path).parent_path();
    std::vector<ManifestEntry> entries;
    for (const auto& [key, val] : j.items()) {
        ManifestEntry e;
        std::filesystem::path p(key);
        e.path = p.is_absolute() ? p.string() : (base / p).string();
        if (!val.contains("condition") || !val["condition"].is_number())
            throw ConfigError("manifest entry '" + key + "' lacks numeric condition");
        e.condition = val["condition"].get<double>();
        if (!std::isfinite(e.condition))
            throw ConfigError("manifest entry '" + key + "' has non-finite condition");
        e.condition_kind = condition_kind_from_string(val.value("condition_kind", "back_pressure"));
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.condition < b.condition; });
    return entries;
}

inline void save_manifest(const std::string& manifest_path, const std::vector<ManifestEntry>& entries) {
    nlohmann::json j = nlohmann::json::object();
    const auto base = std::filesystem::path(manifest_path).parent_path();
    for (const auto& e : entries) {
        std::filesystem::path p(e.path);
        std::string key = p.lexically_proximate(base).string();
        j[key] = {{"condition", e.condition}, {"condition_kind", to_string(e.condition_kind)}};
    }
    write_file(manifest_path, j.dump(2) + "\n");
}

inline std::vector<CaseRecord> load_cases(const std::string& manifest_path) {
    std::vector<CaseRecord> cases;
    for (const auto& e : load_manifest(manifest_path)) {
        CaseRecord rec = parse_tecplot_file(e.path);
        rec.condition = e.condition;
        rec.condition_kind = e.condition_kind;
        cases.push_back(std::move(rec));
    }
    if (cases.empty()) throw ConfigError("manifest '" + manifest_path + "' lists no cases");
    return cases;
}

}  // namespace shockfusion::io
