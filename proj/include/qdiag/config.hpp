#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qdiag/data.hpp"
#include "qdiag/error.hpp"

namespace qdiag {

/// One config value: a JSON-compatible scalar or a list of numbers.
struct ConfigValue {
    enum class Kind { String, Number, Bool, NumberList };
    Kind kind = Kind::Number;
    std::string str;
    double num = 0.0;
    bool flag = false;
    std::vector<double> list;

    static ConfigValue string(std::string s) {
        ConfigValue v;
        v.kind = Kind::String;
        v.str = std::move(s);
        return v;
    }
    static ConfigValue number(double n) {
        ConfigValue v;
        v.kind = Kind::Number;
        v.num = n;
        return v;
    }
    static ConfigValue boolean(bool b) {
        ConfigValue v;
        v.kind = Kind::Bool;
        v.flag = b;
        return v;
    }
    static ConfigValue numbers(std::vector<double> l) {
        ConfigValue v;
        v.kind = Kind::NumberList;
        v.list = std::move(l);
        return v;
    }

    /// Rendering used by config echoes; parsing it back yields an equal value.
    std::string render() const {
        switch (kind) {
            case Kind::String: return "\"" + str + "\"";
            case Kind::Number: return format_real(num);
            case Kind::Bool: return flag ? "true" : "false";
            case Kind::NumberList: {
                std::string out = "[";
                for (std::size_t i = 0; i < list.size(); ++i) {
                    if (i) out += ", ";
                    out += format_real(list[i]);
                }
                return out + "]";
            }
        }
        return "";
    }
};

using ConfigMap = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

inline double parse_number_token(const std::string& token, const std::string& where) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ParseError(where + ": `" + token + "` is not a number");
    return value;
}

inline ConfigValue parse_value(const std::string& raw, const std::string& where) {
    if (raw.empty()) throw ParseError(where + ": missing value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw ParseError(where + ": unterminated string");
        return ConfigValue::string(raw.substr(1, raw.size() - 2));
    }
    if (raw == "true") return ConfigValue::boolean(true);
    if (raw == "false") return ConfigValue::boolean(false);
    if (raw.front() == '[') {
        if (raw.back() != ']') throw ParseError(where + ": unterminated list");
        std::vector<double> values;
        std::string body = raw.substr(1, raw.size() - 2);
        std::string token;
        std::istringstream stream(body);
        while (std::getline(stream, token, ',')) {
            token = trim(token);
            if (token.empty()) throw ParseError(where + ": empty list element");
            values.push_back(parse_number_token(token, where));
        }
        return ConfigValue::numbers(std::move(values));
    }
    return ConfigValue::number(parse_number_token(raw, where));
}

}  // namespace detail

/// Flat `key = value` config text. Values are JSON-compatible scalars
/// (quoted strings, bare numbers, true/false) or `[n, n, ...]` number lists.
/// `#` starts a comment line. Duplicate keys are errors.
inline ConfigMap parse_config(std::istream& in, const std::string& name) {
    ConfigMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const std::size_t eq = text.find('=');
        const std::string where = name + ": line " + std::to_string(line_no);
        if (eq == std::string::npos) throw ParseError(where + ": expected `key = value`");
        const std::string key = detail::trim(text.substr(0, eq));
        if (key.empty()) throw ParseError(where + ": empty key");
        if (map.count(key)) throw ParseError(where + ": duplicate key `" + key + "`");
        map.emplace(key, detail::parse_value(detail::trim(text.substr(eq + 1)), where));
    }
    return map;
}

inline ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_config(in, path);
}

/// Collects resolved settings in a fixed order and writes the echo file a run
/// leaves beside its artifacts. Re-running from the echo reproduces the run.
class ConfigEcho {
public:
    void set(const std::string& key, ConfigValue value) {
        entries_.emplace_back(key, std::move(value));
    }
    void set_string(const std::string& key, std::string v) {
        set(key, ConfigValue::string(std::move(v)));
    }
    void set_number(const std::string& key, double v) { set(key, ConfigValue::number(v)); }
    void set_bool(const std::string& key, bool v) { set(key, ConfigValue::boolean(v)); }
    void set_numbers(const std::string& key, std::vector<double> v) {
        set(key, ConfigValue::numbers(std::move(v)));
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path + " for writing");
        for (const auto& [key, value] : entries_) out << key << " = " << value.render() << '\n';
    }

    const std::vector<std::pair<std::string, ConfigValue>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, ConfigValue>> entries_;
};

}  // namespace qdiag
