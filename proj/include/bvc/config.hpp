#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bvc/dynamics.hpp"
#include "bvc/errors.hpp"

namespace bvc {

// Minimal TOML-subset reader: [section] headers, key = value scalars
// (string, bool, integer, float) and flat numeric arrays. Enough for
// experiment files; anything fancier is rejected loudly.
class TomlTable {
public:
    static TomlTable parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static TomlTable parse(const std::string& text, const std::string& origin = "<string>") {
        TomlTable t;
        std::string section;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            strip_comment(line);
            const std::string s = trim(line);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') fail(origin, lineno, "unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty()) fail(origin, lineno, "empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
            const std::string key = trim(s.substr(0, eq));
            const std::string val = trim(s.substr(eq + 1));
            if (key.empty() || val.empty()) fail(origin, lineno, "expected key = value");
            const std::string full = section.empty() ? key : section + "." + key;
            t.values_[full] = parse_value(val, origin, lineno);
        }
        return t;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const {
        const Value& v = require(key);
        if (v.type != Type::kString) throw config_error("config key " + key + " must be a string");
        return v.str;
    }

    bool get_bool(const std::string& key) const {
        const Value& v = require(key);
        if (v.type != Type::kBool) throw config_error("config key " + key + " must be a boolean");
        return v.b;
    }

    double get_double(const std::string& key) const {
        const Value& v = require(key);
        if (v.type == Type::kFloat) return v.num;
        if (v.type == Type::kInt) return static_cast<double>(v.i);
        throw config_error("config key " + key + " must be a number");
    }

    long long get_int(const std::string& key) const {
        const Value& v = require(key);
        if (v.type != Type::kInt) throw config_error("config key " + key + " must be an integer");
        return v.i;
    }

    std::vector<double> get_array(const std::string& key) const {
        const Value& v = require(key);
        if (v.type != Type::kArray) throw config_error("config key " + key + " must be an array");
        return v.arr;
    }

private:
    enum class Type { kString, kBool, kInt, kFloat, kArray };
    struct Value {
        Type type = Type::kString;
        std::string str;
        bool b = false;
        long long i = 0;
        double num = 0.0;
        std::vector<double> arr;
    };

    const Value& require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw config_error("missing config key: " + key);
        return it->second;
    }

    [[noreturn]] static void fail(const std::string& origin, int lineno, const std::string& msg) {
        throw config_error(origin + ":" + std::to_string(lineno) + ": " + msg);
    }

    static void strip_comment(std::string& line) {
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line.erase(i);
                return;
            }
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static Value parse_value(const std::string& raw, const std::string& origin, int lineno) {
        Value v;
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"') fail(origin, lineno, "unterminated string");
            v.type = Type::kString;
            v.str = raw.substr(1, raw.size() - 2);
            return v;
        }
        if (raw == "true" || raw == "false") {
            v.type = Type::kBool;
            v.b = raw == "true";
            return v;
        }
        if (raw.front() == '[') {
            if (raw.back() != ']') fail(origin, lineno, "unterminated array");
            v.type = Type::kArray;
            std::string body = raw.substr(1, raw.size() - 2);
            std::istringstream items(body);
            std::string item;
            while (std::getline(items, item, ',')) {
                const std::string entry = trim(item);
                if (entry.empty()) continue;
                try {
                    std::size_t used = 0;
                    v.arr.push_back(std::stod(entry, &used));
                    if (used != entry.size()) fail(origin, lineno, "bad array entry: " + entry);
                } catch (const config_error&) {
                    throw;
                } catch (...) {
                    fail(origin, lineno, "bad array entry: " + entry);
                }
            }
            return v;
        }
        // bare scalar: integer when it parses cleanly without . / e
        const bool looks_float = raw.find_first_of(".eE") != std::string::npos;
        try {
            std::size_t used = 0;
            if (!looks_float) {
                v.type = Type::kInt;
                v.i = std::stoll(raw, &used);
                if (used != raw.size()) fail(origin, lineno, "bad value: " + raw);
                return v;
            }
            v.type = Type::kFloat;
            v.num = std::stod(raw, &used);
            if (used != raw.size()) fail(origin, lineno, "bad value: " + raw);
            return v;
        } catch (const config_error&) {
            throw;
        } catch (...) {
            fail(origin, lineno, "bad value: " + raw);
        }
    }

    std::map<std::string, Value> values_;
};

// Everything a run needs, with every default materialized so reports are
// self-describing. Seeds are always explicit; there is no wall-clock default.
struct ExperimentConfig {
    // [system]
    std::string kind = "quadratic"; // doubling | quadratic | viana
    int d = 2;
    double a = 2.0;
    double a0 = 1.8;
    double alpha_pert = 0.05;
    double interval_lo = -1.88;
    double interval_hi = 1.9;
    // [thresholds]
    double lambda = 0.35;
    double beta_target = 0.15;
    // [horizons]
    int orbit_horizon = 60;
    int tree_depth = 12;
    std::int64_t node_cap = std::int64_t{1} << 21;
    int fit_window_lo = 4;
    // [sampling]
    long long tail_samples = 100000;
    long long chain_samples = 20000;
    long long concat_triples = 10000;
    int backward_roots = 50;
    std::uint64_t seed = 0;
    // [rates]
    std::optional<double> gamma_override;
    std::optional<std::string> rate_family_override;
    std::vector<double> custom_table;
    double slack = 0.1;
    // [output]
    std::string out_dir = "out";

    static ExperimentConfig from_file(const std::string& path) {
        return from_table(TomlTable::parse_file(path));
    }

    static ExperimentConfig from_table(const TomlTable& t) {
        ExperimentConfig c;
        if (!t.has("sampling.seed"))
            throw config_error("sampling.seed is required (wall-clock seeding is not allowed)");
        c.seed = static_cast<std::uint64_t>(t.get_int("sampling.seed"));

        if (t.has("system.kind")) c.kind = t.get_string("system.kind");
        if (t.has("system.d")) c.d = static_cast<int>(t.get_int("system.d"));
        if (t.has("system.a")) c.a = t.get_double("system.a");
        if (t.has("system.a0")) c.a0 = t.get_double("system.a0");
        if (t.has("system.alpha")) c.alpha_pert = t.get_double("system.alpha");
        if (t.has("system.interval")) {
            const auto arr = t.get_array("system.interval");
            if (arr.size() != 2) throw config_error("system.interval must have two entries");
            c.interval_lo = arr[0];
            c.interval_hi = arr[1];
        }
        if (t.has("thresholds.lambda")) c.lambda = t.get_double("thresholds.lambda");
        if (t.has("thresholds.beta_target")) c.beta_target = t.get_double("thresholds.beta_target");
        if (t.has("horizons.orbit")) c.orbit_horizon = static_cast<int>(t.get_int("horizons.orbit"));
        if (t.has("horizons.tree_depth"))
            c.tree_depth = static_cast<int>(t.get_int("horizons.tree_depth"));
        if (t.has("horizons.node_cap")) c.node_cap = t.get_int("horizons.node_cap");
        if (t.has("horizons.fit_window_lo"))
            c.fit_window_lo = static_cast<int>(t.get_int("horizons.fit_window_lo"));
        if (t.has("sampling.tail_samples")) c.tail_samples = t.get_int("sampling.tail_samples");
        if (t.has("sampling.chain_samples")) c.chain_samples = t.get_int("sampling.chain_samples");
        if (t.has("sampling.concat_triples")) c.concat_triples = t.get_int("sampling.concat_triples");
        if (t.has("sampling.backward_roots"))
            c.backward_roots = static_cast<int>(t.get_int("sampling.backward_roots"));
        if (t.has("rates.gamma")) c.gamma_override = t.get_double("rates.gamma");
        if (t.has("rates.family")) c.rate_family_override = t.get_string("rates.family");
        if (t.has("rates.table")) c.custom_table = t.get_array("rates.table");
        if (t.has("rates.slack")) c.slack = t.get_double("rates.slack");
        if (t.has("output.dir")) c.out_dir = t.get_string("output.dir");
        c.validate();
        return c;
    }

    void validate() const {
        if (kind != "doubling" && kind != "quadratic" && kind != "viana")
            throw config_error("system.kind must be doubling, quadratic or viana");
        if (orbit_horizon < 1 || tree_depth < 0 || node_cap < 1)
            throw config_error("all horizons must be positive");
        if (!(lambda > 0.0)) throw config_error("thresholds.lambda must be > 0");
        if (gamma_override && (!(*gamma_override > 0.0) || !(*gamma_override < 1.0)))
            throw config_error("rates.gamma must lie in (0, 1)");
        if (!(slack >= 0.0) || !(slack < 1.0)) throw config_error("rates.slack must lie in [0, 1)");
        if (tail_samples < 100 || chain_samples < 100)
            throw config_error("sample sizes must be at least 100");
        if (backward_roots < 1) throw config_error("sampling.backward_roots must be >= 1");
        if (rate_family_override) {
            const std::string& f = *rate_family_override;
            if (f != "EXP" && f != "STRETCHED" && f != "POLY" && f != "CUSTOM")
                throw config_error("rates.family must be EXP, STRETCHED, POLY or CUSTOM");
            if (f == "CUSTOM" && custom_table.empty())
                throw config_error("rates.family = CUSTOM needs rates.table");
        }
    }

    MapSystem make_system() const {
        if (kind == "doubling") return MapSystem::doubling(d);
        if (kind == "quadratic") return MapSystem::quadratic(a);
        return MapSystem::viana(a0, alpha_pert, d, interval_lo, interval_hi);
    }
};

} // namespace bvc
