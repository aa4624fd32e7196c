#ifndef SLBP_IO_HPP
#define SLBP_IO_HPP

// Flat key=value configuration files, deterministic CSV emission, and run
// manifests.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace slbp {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Line-oriented `key = value` text; '#' starts a comment; blank lines ignored.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        KeyValueConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            std::string t = trim(line);
            if (t.empty()) continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            std::string key = trim(t.substr(0, eq));
            std::string val = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = val;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }
    std::string get_string(const std::string& key, const std::string& dflt) const {
        auto it = values_.find(key);
        return it == values_.end() ? dflt : it->second;
    }
    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double dflt) const {
        return has(key) ? get_double(key) : dflt;
    }
    long get_long(const std::string& key) const {
        std::string s = get_string(key);
        try {
            size_t pos = 0;
            long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("config key '" + key + "': not an integer: " + s);
        }
    }
    long get_long(const std::string& key, long dflt) const {
        return has(key) ? get_long(key) : dflt;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::string s = get_string(key);
        std::vector<double> out;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty()) out.push_back(to_double(key, tok));
        }
        if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }
    double to_double(const std::string& key, const std::string& s) const {
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("config key '" + key + "': not a number: " + s);
        }
    }
    std::map<std::string, std::string> values_;
};

// Deterministic shortest-roundtrip float formatting (%.17g is stable for a
// fixed libc, which is what byte-for-byte reproducibility promises).
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        for (size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
        n_cols_ = columns.size();
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != n_cols_) throw std::runtime_error("CsvWriter: column count mismatch");
        for (size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
    size_t n_cols_;
};

inline std::string cell(double v) { return fmt_double(v); }
inline std::string cell(long v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(const std::string& s) { return s; }

} // namespace slbp

#endif // SLBP_IO_HPP
