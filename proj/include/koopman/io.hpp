#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "koopman/core.hpp"
#include "koopman/errors.hpp"
#include "koopman/observables.hpp"

namespace koopman::io {

enum class Format { Csv, Json };

inline Format format_from_string(const std::string& s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw input_error("unknown format '" + s + "' (expected csv or json)");
}

inline Format format_for_path(const std::string& path, Format fallback) {
    auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".csv") return Format::Csv;
    if (ext == ".json") return Format::Json;
    return fallback;
}

/// 17 significant digits: doubles round-trip exactly through text.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Complex field parsing: "re" or "re+imj" / "re-imj"
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

inline bool parse_complex(std::string tok, cdouble& out) {
    // trim
    auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    std::size_t a = 0, b = tok.size();
    while (a < b && issp(tok[a])) ++a;
    while (b > a && issp(tok[b - 1])) --b;
    tok = tok.substr(a, b - a);
    if (tok.empty()) return false;

    if (tok.back() == 'j' || tok.back() == 'J') {
        std::string body = tok.substr(0, tok.size() - 1);
        // split at the last +/- that is not an exponent sign and not leading
        std::size_t split = std::string::npos;
        for (std::size_t i = body.size(); i-- > 1;) {
            char c = body[i];
            if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
                split = i;
                break;
            }
        }
        double re = 0.0, im = 0.0;
        if (split == std::string::npos) {
            // pure imaginary "imj"
            if (body.empty() || body == "+")
                im = 1.0;
            else if (body == "-")
                im = -1.0;
            else if (!parse_double(body, im))
                return false;
        } else {
            std::string res = body.substr(0, split);
            std::string ims = body.substr(split);
            if (!parse_double(res, re)) return false;
            if (ims == "+")
                im = 1.0;
            else if (ims == "-")
                im = -1.0;
            else if (!parse_double(ims, im))
                return false;
        }
        out = cdouble(re, im);
        return true;
    }
    double re;
    if (!parse_double(tok, re)) return false;
    out = cdouble(re, 0.0);
    return true;
}

inline std::string format_complex(cdouble v) {
    if (v.imag() == 0.0) return fmt_double(v.real());
    std::string s = fmt_double(v.real());
    if (v.imag() >= 0.0) s += "+";
    s += fmt_double(v.imag());
    s += "j";
    return s;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Snapshot files. CSV: one row per output component, one column per snapshot.
// JSON: {"columns": [[{"re":..,"im":..}, ...], ...]}.
// ---------------------------------------------------------------------------

inline SnapshotMatrix parse_snapshots_csv(std::istream& in, const std::string& name) {
    std::vector<std::vector<cdouble>> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto toks = detail::split(line, ',');
        std::vector<cdouble> row;
        for (const auto& tok : toks) {
            cdouble v;
            if (!detail::parse_complex(tok, v))
                throw input_error(name + ": cannot parse '" + tok + "' at line " +
                                  std::to_string(lineno));
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw input_error(name + ": ragged row at line " + std::to_string(lineno) +
                              " (expected " + std::to_string(rows.front().size()) +
                              " fields, got " + std::to_string(row.size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw input_error(name + ": empty snapshot file");
    const std::size_t m = rows.size(), count = rows.front().size();
    std::vector<CVec> cols(count, CVec(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < count; ++k) cols[k][i] = rows[i][k];
    return SnapshotMatrix::from_columns(std::move(cols), name);
}

inline SnapshotMatrix parse_snapshots_json(std::istream& in, const std::string& name) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(name + ": " + e.what());
    }
    if (!j.contains("columns") || !j["columns"].is_array() || j["columns"].empty())
        throw input_error(name + ": empty snapshot file");
    std::vector<CVec> cols;
    for (const auto& col : j["columns"]) {
        CVec c;
        for (const auto& v : col) {
            if (v.is_number()) {
                c.push_back(cdouble(v.get<double>(), 0.0));
            } else if (v.is_object() && v.contains("re")) {
                c.push_back(cdouble(v["re"].get<double>(),
                                    v.value("im", 0.0)));
            } else {
                throw input_error(name + ": bad complex entry in snapshot column");
            }
        }
        cols.push_back(std::move(c));
    }
    return SnapshotMatrix::from_columns(std::move(cols), name);
}

inline SnapshotMatrix ingest_snapshots(const std::string& path, Format fmt) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "'");
    if (fmt == Format::Json) return parse_snapshots_json(in, path);
    return parse_snapshots_csv(in, path);
}

/// Format inferred from the file extension (csv unless it ends in .json).
inline SnapshotMatrix ingest_snapshots(const std::string& path) {
    return ingest_snapshots(path, format_for_path(path, Format::Csv));
}

namespace detail {

inline void atomic_write(const std::string& path, const std::string& body) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw input_error("cannot write '" + tmp + "'");
        out << body;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline void emit_snapshots(const std::string& path, const SnapshotMatrix& s, Format fmt) {
    std::ostringstream out;
    if (fmt == Format::Csv) {
        for (std::size_t i = 0; i < s.m; ++i) {
            for (std::size_t k = 0; k < s.count(); ++k) {
                if (k) out << ',';
                out << detail::format_complex(s.columns[k][i]);
            }
            out << '\n';
        }
    } else {
        nlohmann::json j;
        j["m"] = s.m;
        j["count"] = s.count();
        auto& cols = j["columns"] = nlohmann::json::array();
        for (const auto& col : s.columns) {
            nlohmann::json jc = nlohmann::json::array();
            for (const auto& v : col) jc.push_back({{"re", v.real()}, {"im", v.imag()}});
            cols.push_back(std::move(jc));
        }
        out << j.dump(2) << '\n';
    }
    detail::atomic_write(path, out.str());
}

// ---------------------------------------------------------------------------
// Result bundles: metadata + long-format numeric tables + diagnostics
// ---------------------------------------------------------------------------

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<RVec> rows;
};

struct ResultBundle {
    nlohmann::json metadata;     // tool version, config echo, timestamp
    std::vector<Table> tables;   // first table is the primary payload
    nlohmann::json diagnostics;  // residuals, convergence reports, ...
};

inline std::string render_table_csv(const ResultBundle& b, const Table& t) {
    std::ostringstream out;
    out << "# koopman " << b.metadata.value("version", "") << "\n";
    for (auto it = b.metadata.begin(); it != b.metadata.end(); ++it)
        if (it.key() != "version")
            out << "# " << it.key() << " = "
                << (it.value().is_string() ? it.value().get<std::string>()
                                           : it.value().dump())
                << "\n";
    for (auto it = b.diagnostics.begin(); it != b.diagnostics.end(); ++it)
        out << "# diagnostic." << it.key() << " = "
            << (it.value().is_number_float() ? fmt_double(it.value().get<double>())
                                             : it.value().dump())
            << "\n";
    out << "# table = " << t.name << "\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) out << ',';
        out << t.columns[c];
    }
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << fmt_double(row[c]);
        }
        out << '\n';
    }
    return out.str();
}

inline nlohmann::json bundle_to_json(const ResultBundle& b) {
    nlohmann::json j;
    j["metadata"] = b.metadata;
    j["diagnostics"] = b.diagnostics;
    auto& tables = j["tables"] = nlohmann::json::object();
    for (const auto& t : b.tables) {
        nlohmann::json jt;
        jt["columns"] = t.columns;
        auto& rows = jt["rows"] = nlohmann::json::array();
        for (const auto& row : t.rows) rows.push_back(row);
        tables[t.name] = std::move(jt);
    }
    return j;
}

/// Write a bundle. JSON keeps everything in one document; CSV puts the
/// primary table at `path` and any further tables beside it as
/// `<stem>.<table>.csv`. Writes are atomic (temp file + rename).
inline void write_bundle(const std::string& path, const ResultBundle& b, Format fmt) {
    if (b.tables.empty()) throw input_error("write_bundle: no payload tables");
    if (fmt == Format::Json) {
        detail::atomic_write(path, bundle_to_json(b).dump(2) + "\n");
        return;
    }
    detail::atomic_write(path, render_table_csv(b, b.tables.front()));
    for (std::size_t i = 1; i < b.tables.size(); ++i) {
        std::filesystem::path p(path);
        std::filesystem::path side = p.parent_path() /
                                     (p.stem().string() + "." + b.tables[i].name + ".csv");
        detail::atomic_write(side.string(), render_table_csv(b, b.tables[i]));
    }
}

}  // namespace koopman::io
