#ifndef INFOUT_CSV_HPP
#define INFOUT_CSV_HPP

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "infout/errors.hpp"

namespace infout::csv {

/// Reals are written with 12 significant digits; NaN/absent values as an
/// empty field.
inline std::string format_real(double v) {
    if (std::isnan(v)) {
        return {};
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            os << ',';
        }
        os << quote(fields[i]);
    }
    os << "\r\n";
}

/// Read one RFC-4180 record. Returns false at end of input.
inline bool read_row(std::istream& is, std::vector<std::string>& fields) {
    fields.clear();
    if (is.peek() == std::char_traits<char>::eof()) {
        return false;
    }
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (is.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    is.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            if (is.peek() == '\n') {
                is.get(c);
            }
            break;
        } else if (c == '\n') {
            break;
        } else {
            field += c;
        }
    }
    if (quoted) {
        throw ConfigError("csv: unterminated quoted field");
    }
    if (any) {
        fields.push_back(std::move(field));
    }
    return any;
}

inline double parse_real(const std::string& field) {
    if (field.empty()) {
        return std::nan("");
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw ConfigError("csv: not a number: '" + field + "'");
    }
    if (used != field.size()) {
        throw ConfigError("csv: trailing characters in number: '" + field + "'");
    }
    return v;
}

} // namespace infout::csv

#endif
