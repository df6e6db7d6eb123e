#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "latvoter/lattice.hpp"
#include "latvoter/mechanisms.hpp"
#include "latvoter/polynomial.hpp"
#include "latvoter/presets.hpp"

namespace latvoter {

struct ConfigError : std::runtime_error {
    int line;
    ConfigError(int line_number, const std::string& message)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + message),
          line(line_number) {}
};

// Flat sectioned key-value text: "[section]" headers, "key = value" lines,
// '#' comments. Sections may repeat.
struct ConfigSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    std::optional<std::string> get(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return v;
        return std::nullopt;
    }

    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v) throw std::invalid_argument("missing key '" + key + "' in [" + name + "]");
        return *v;
    }

    friend bool operator==(const ConfigSection&, const ConfigSection&) = default;
};

struct ConfigFile {
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }

    std::vector<const ConfigSection*> find_all(const std::string& name) const {
        std::vector<const ConfigSection*> out;
        for (const auto& s : sections)
            if (s.name == name) out.push_back(&s);
        return out;
    }

    friend bool operator==(const ConfigFile&, const ConfigFile&) = default;

    static ConfigFile parse(const std::string& text) {
        ConfigFile file;
        int line_number = 0;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            ++line_number;
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError(line_number, "unterminated section header");
                ConfigSection section;
                section.name = trim(t.substr(1, t.size() - 2));
                if (section.name.empty()) throw ConfigError(line_number, "empty section name");
                file.sections.push_back(std::move(section));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(line_number, "expected 'key = value'");
            if (file.sections.empty())
                throw ConfigError(line_number, "entry before any [section] header");
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            if (key.empty()) throw ConfigError(line_number, "empty key");
            file.sections.back().entries.emplace_back(std::move(key), std::move(value));
        }
        return file;
    }

    std::string serialize() const {
        std::string out;
        for (const auto& s : sections) {
            out += "[" + s.name + "]\n";
            for (const auto& [k, v] : s.entries) out += k + " = " + v + "\n";
            out += "\n";
        }
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }
};

namespace configdetail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("invalid number for " + what + ": '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("invalid integer for " + what + ": '" + s + "'");
    return v;
}

inline std::string format_polynomial(const Polynomial& p) {
    if (p.is_zero()) return "0";
    std::string out;
    for (std::size_t i = 0; i < p.coefficients().size(); ++i) {
        if (i) out += ",";
        out += format_double(p.coefficients()[i]);
    }
    return out;
}

inline Polynomial parse_polynomial(const std::string& s, const std::string& what) {
    std::vector<double> coeffs;
    std::string token;
    std::istringstream in(s);
    while (std::getline(in, token, ','))
        coeffs.push_back(parse_double(token, what));
    return Polynomial(std::move(coeffs));
}

}  // namespace configdetail

inline ConfigSection mechanism_to_section(const MechanismSpec& spec) {
    using configdetail::format_double;
    using configdetail::format_polynomial;
    ConfigSection s;
    s.name = "mechanisms";
    struct Visitor {
        ConfigSection& s;
        void operator()(const SymmetricDuplication& m) const {
            s.entries.emplace_back("kind", "symmetric_duplication");
            s.entries.emplace_back("rate", format_double(m.rate));
        }
        void operator()(const AsymmetricDuplication& m) const {
            s.entries.emplace_back("kind", "asymmetric_duplication");
            s.entries.emplace_back("rate", format_double(m.rate));
            s.entries.emplace_back("favored", m.favored ? "1" : "0");
        }
        void operator()(const Mutation& m) const {
            s.entries.emplace_back("kind", "mutation");
            s.entries.emplace_back("direction",
                                   m.direction == MutationDirection::OneToZero ? "one_to_zero"
                                   : m.direction == MutationDirection::ZeroToOne ? "zero_to_one"
                                                                                 : "flip");
            if (m.state_dependent())
                s.entries.emplace_back("poly", format_polynomial(*m.rate_polynomial));
            else
                s.entries.emplace_back("rate", format_double(m.rate));
        }
        void operator()(const Consulting& m) const {
            s.entries.emplace_back("kind", "consulting");
            s.entries.emplace_back("rate", format_double(m.rate));
            s.entries.emplace_back("m", std::to_string(m.fanout));
            s.entries.emplace_back("stubborn", m.stubborn == StubbornSide::Ones ? "ones"
                                               : m.stubborn == StubbornSide::Zeros ? "zeros"
                                                                                   : "both");
        }
    };
    std::visit(Visitor{s}, spec);
    return s;
}

inline MechanismSpec mechanism_from_section(const ConfigSection& s) {
    using configdetail::parse_double;
    using configdetail::parse_int;
    using configdetail::parse_polynomial;
    const std::string kind = s.require("kind");
    if (kind == "symmetric_duplication")
        return SymmetricDuplication{parse_double(s.require("rate"), "rate")};
    if (kind == "asymmetric_duplication") {
        AsymmetricDuplication m;
        m.rate = parse_double(s.require("rate"), "rate");
        m.favored = static_cast<std::uint8_t>(parse_int(s.require("favored"), "favored"));
        if (m.favored > 1) throw std::invalid_argument("favored must be 0 or 1");
        return m;
    }
    if (kind == "mutation") {
        Mutation m;
        const std::string d = s.require("direction");
        if (d == "one_to_zero")
            m.direction = MutationDirection::OneToZero;
        else if (d == "zero_to_one")
            m.direction = MutationDirection::ZeroToOne;
        else if (d == "flip")
            m.direction = MutationDirection::Flip;
        else
            throw std::invalid_argument("unknown mutation direction '" + d + "'");
        if (auto poly = s.get("poly"))
            m.rate_polynomial = parse_polynomial(*poly, "poly");
        else
            m.rate = parse_double(s.require("rate"), "rate");
        return m;
    }
    if (kind == "consulting") {
        Consulting m;
        m.rate = parse_double(s.require("rate"), "rate");
        m.fanout = static_cast<int>(parse_int(s.require("m"), "m"));
        const std::string side = s.require("stubborn");
        if (side == "ones")
            m.stubborn = StubbornSide::Ones;
        else if (side == "zeros")
            m.stubborn = StubbornSide::Zeros;
        else if (side == "both")
            m.stubborn = StubbornSide::Both;
        else
            throw std::invalid_argument("unknown stubborn side '" + side + "'");
        return m;
    }
    throw std::invalid_argument("unknown mechanism kind '" + kind + "'");
}

struct OutputOptions {
    std::string directory = ".";
    std::string prefix = "trace";
    bool store_spins = false;

    friend bool operator==(const OutputOptions&, const OutputOptions&) = default;
};

// A fully resolved particle-model run description.
struct RunConfig {
    ScalingParams params;
    std::vector<MechanismSpec> mechanisms;
    OutputOptions output;

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        auto key = [](const ScalingParams& p) {
            return std::tuple(p.model_index, p.neighbor_count, p.max_distance, p.high_rate,
                              p.low_rate, p.density_scale, p.period);
        };
        if (key(a.params) != key(b.params) || a.output != b.output) return false;
        if (a.mechanisms.size() != b.mechanisms.size()) return false;
        for (std::size_t i = 0; i < a.mechanisms.size(); ++i)
            if (!(mechanism_to_section(a.mechanisms[i]) == mechanism_to_section(b.mechanisms[i])))
                return false;
        return true;
    }
};

inline bool operator==(const MechanismSpec& a, const MechanismSpec& b) {
    return mechanism_to_section(a) == mechanism_to_section(b);
}

inline RunConfig run_config_from_file(const ConfigFile& file) {
    using configdetail::parse_double;
    using configdetail::parse_int;
    using configdetail::parse_polynomial;

    const ConfigSection* params_section = file.find("params");
    if (!params_section) throw std::invalid_argument("config lacks a [params] section");
    if (params_section->get("rho"))
        throw std::invalid_argument("rho is derived from N and D; do not set it");

    RunConfig run;
    const double period =
        params_section->get("period") ? parse_double(*params_section->get("period"), "period") : 1.0;

    if (auto preset = params_section->get("preset")) {
        int case_id = 0;
        if (*preset == "case1") case_id = 1;
        else if (*preset == "case2") case_id = 2;
        else if (*preset == "case3") case_id = 3;
        else if (*preset == "case4") case_id = 4;
        else throw std::invalid_argument("unknown preset '" + *preset + "'");
        const long long n = parse_int(params_section->require("n"), "n");
        const double theta = params_section->get("theta")
                                 ? parse_double(*params_section->get("theta"), "theta")
                                 : kDefaultTheta;
        Polynomial P;
        if (auto poly = params_section->get("P")) P = parse_polynomial(*poly, "P");
        run.params = particle_case_params(case_id, n, period, theta);
        run.mechanisms = particle_case_mechanisms(case_id, run.params, P, theta);
    } else {
        const long long n = parse_int(params_section->require("n"), "n");
        const long long N = parse_int(params_section->require("N"), "N");
        const double D = parse_double(params_section->require("D"), "D");
        const double H = parse_double(params_section->require("H"), "H");
        const double L =
            params_section->get("L") ? parse_double(*params_section->get("L"), "L") : 0.0;
        const double S =
            params_section->get("S") ? parse_double(*params_section->get("S"), "S") : 1.0;
        run.params = ScalingParams::create(n, N, D, H, L, S, period);
    }

    // explicit [mechanisms] sections replace the preset's list
    const auto mech_sections = file.find_all("mechanisms");
    if (!mech_sections.empty()) {
        run.mechanisms.clear();
        for (const ConfigSection* s : mech_sections)
            run.mechanisms.push_back(mechanism_from_section(*s));
    }
    if (run.mechanisms.empty())
        throw std::invalid_argument("config defines no mechanisms");
    for (const auto& m : run.mechanisms) validate_mechanism(m, run.params);

    if (const ConfigSection* out = file.find("output")) {
        if (auto v = out->get("dir")) run.output.directory = *v;
        if (auto v = out->get("prefix")) run.output.prefix = *v;
        if (auto v = out->get("spins")) run.output.store_spins = parse_int(*v, "spins") != 0;
    }
    return run;
}

inline ConfigFile run_config_to_file(const RunConfig& run) {
    using configdetail::format_double;
    ConfigFile file;
    ConfigSection params;
    params.name = "params";
    params.entries.emplace_back("n", std::to_string(run.params.model_index));
    params.entries.emplace_back("N", std::to_string(run.params.neighbor_count));
    params.entries.emplace_back("D", format_double(run.params.max_distance));
    params.entries.emplace_back("H", format_double(run.params.high_rate));
    params.entries.emplace_back("L", format_double(run.params.low_rate));
    params.entries.emplace_back("S", format_double(run.params.density_scale));
    params.entries.emplace_back("period", format_double(run.params.period));
    file.sections.push_back(std::move(params));
    for (const auto& m : run.mechanisms) file.sections.push_back(mechanism_to_section(m));

    ConfigSection out;
    out.name = "output";
    out.entries.emplace_back("dir", run.output.directory);
    out.entries.emplace_back("prefix", run.output.prefix);
    out.entries.emplace_back("spins", run.output.store_spins ? "1" : "0");
    file.sections.push_back(std::move(out));
    return file;
}

}  // namespace latvoter
