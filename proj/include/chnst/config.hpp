/// @file config.hpp
/// @brief Strict parser for the key = value configuration format.
///
/// The format is line based: `[section]` headers, `key = value` pairs, and comments
/// starting with `#` or `;`. Unknown sections and keys are rejected.
///
///   [mesh]      base, level
///   [time]      tau, c_tau, T, steps
///   [model]     name, gamma, mobility, mobility_cross, viscosity_base, viscosity_slope
///   [scheme]    star_rule (old | new), newton_tol, newton_max_iter, quad_degree, theta_floor
///   [output]    directory, snapshot_stride, formats (comma list of csv, vtk, raw)
///   [converge]  levels, eoc_gate
#pragma once

#include "chnst/errors.hpp"
#include "chnst/harness.hpp"

#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

namespace chnst::config {

inline constexpr const char* default_model_name = "chnst-default";

struct Config {
    harness::RunConfig run{};
    std::string model_name = default_model_name;
    std::string output_directory = "output";
    /// Write a snapshot every this many steps; 0 disables snapshots.
    long snapshot_stride = 0;
    bool write_csv = true;
    bool write_vtk = false;
    bool write_raw = false;
    int converge_levels = 3;
    double eoc_gate = 1.5;
};

namespace detail {

inline std::string_view trim(std::string_view s, std::size_t& offset) {
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    std::size_t e = s.size();
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    offset += b;
    return s.substr(b, e - b);
}

struct Value {
    std::string_view text;
    std::size_t line;
    std::size_t column;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line, column); }

    double real() const {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || p != text.data() + text.size()) fail("expected a number, got '" + std::string(text) + "'");
        return v;
    }
    long integer() const {
        long v = 0;
        const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || p != text.data() + text.size())
            fail("expected an integer, got '" + std::string(text) + "'");
        return v;
    }
    std::string string() const {
        if (text.empty()) fail("expected a value");
        return std::string(text);
    }
};

inline void apply(Config& c, const std::string& section, const std::string& key, const Value& v,
                  std::size_t key_column) {
    auto& r = c.run;
    auto& mp = r.model;
    const std::string k = section + "." + key;
    if (k == "mesh.base") r.base = static_cast<int>(v.integer());
    else if (k == "mesh.level") r.level = static_cast<int>(v.integer());
    else if (k == "time.tau") r.tau = v.real();
    else if (k == "time.c_tau") r.c_tau = v.real();
    else if (k == "time.T") r.final_time = v.real();
    else if (k == "time.steps") r.steps = v.integer();
    else if (k == "model.name") {
        c.model_name = v.string();
        if (c.model_name != default_model_name) v.fail("unknown model '" + c.model_name + "'");
    } else if (k == "model.gamma") mp.gamma = v.real();
    else if (k == "model.mobility") mp.mobility.l11 = mp.mobility.l22 = v.real();
    else if (k == "model.mobility_cross") mp.mobility.l12 = v.real();
    else if (k == "model.viscosity_base") mp.viscosity_base = v.real();
    else if (k == "model.viscosity_slope") mp.viscosity_slope = v.real();
    else if (k == "scheme.star_rule") {
        const std::string s = v.string();
        if (s == "old") r.star_rule = scheme::StarRule::old_level;
        else if (s == "new") r.star_rule = scheme::StarRule::new_level;
        else v.fail("star_rule must be 'old' or 'new'");
    } else if (k == "scheme.newton_tol") r.newton.tolerance = v.real();
    else if (k == "scheme.newton_max_iter") r.newton.max_iterations = static_cast<int>(v.integer());
    else if (k == "scheme.quad_degree") r.quad_degree = static_cast<int>(v.integer());
    else if (k == "scheme.theta_floor") r.theta_floor = v.real();
    else if (k == "output.directory") c.output_directory = v.string();
    else if (k == "output.snapshot_stride") c.snapshot_stride = v.integer();
    else if (k == "output.formats") {
        c.write_csv = c.write_vtk = c.write_raw = false;
        std::string_view rest = v.text;
        std::size_t col = v.column;
        while (true) {
            const std::size_t comma = rest.find(',');
            std::size_t off = col;
            const std::string_view item = trim(rest.substr(0, comma), off);
            if (item == "csv") c.write_csv = true;
            else if (item == "vtk") c.write_vtk = true;
            else if (item == "raw") c.write_raw = true;
            else throw ParseError("unknown output format '" + std::string(item) + "'", v.line, off);
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
            col += comma + 1;
        }
    } else if (k == "converge.levels") c.converge_levels = static_cast<int>(v.integer());
    else if (k == "converge.eoc_gate") c.eoc_gate = v.real();
    else throw ParseError("unknown key '" + key + "' in section [" + section + "]", v.line, key_column);
}

}  // namespace detail

/// Parses configuration text. Throws ParseError with 1-based line and column.
inline Config parse(std::string_view text) {
    static const char* const sections[] = {"mesh", "time", "model", "scheme", "output", "converge"};
    Config c;
    std::string section;
    std::map<std::string, std::size_t> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const std::size_t hash = line.find_first_of("#;"); hash != std::string_view::npos)
            line = line.substr(0, hash);
        std::size_t col = 1;
        line = detail::trim(line, col);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no, col);
            std::size_t scol = col + 1;
            const std::string name(detail::trim(line.substr(1, line.size() - 2), scol));
            bool known = false;
            for (const char* s : sections) known = known || name == s;
            if (!known) throw ParseError("unknown section [" + name + "]", line_no, scol);
            section = name;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no, col);
        if (section.empty()) throw ParseError("key outside of any section", line_no, col);
        std::size_t kcol = col;
        const std::string key(detail::trim(line.substr(0, eq), kcol));
        if (key.empty()) throw ParseError("missing key before '='", line_no, col);
        std::size_t vcol = col + eq + 1;
        const std::string_view value = detail::trim(line.substr(eq + 1), vcol);
        if (value.empty()) throw ParseError("missing value for '" + key + "'", line_no, vcol);
        const std::string full = section + "." + key;
        if (const auto it = seen.find(full); it != seen.end())
            throw ParseError("duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")", line_no,
                             kcol);
        seen[full] = line_no;
        detail::apply(c, section, key, detail::Value{value, line_no, vcol}, kcol);
    }
    return c;
}

/// Reads and parses a file. A missing file is reported as a ParseError at line 0.
inline Config load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file '" + path + "'", 0, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

}  // namespace chnst::config
