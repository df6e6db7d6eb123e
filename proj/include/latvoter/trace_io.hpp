#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latvoter/config.hpp"
#include "latvoter/trace.hpp"

namespace latvoter {

// A trace is stored as two files: <base>.csv with columns time,site,u and a
// <base>.meta sidecar in the sectioned key-value format. Floats are printed
// with 17 significant digits so reloading is bit-exact.

namespace iodetail {

inline ConfigSection params_to_section(const ScalingParams& p) {
    using configdetail::format_double;
    ConfigSection s;
    s.name = "params";
    s.entries.emplace_back("n", std::to_string(p.model_index));
    s.entries.emplace_back("N", std::to_string(p.neighbor_count));
    s.entries.emplace_back("D", format_double(p.max_distance));
    s.entries.emplace_back("H", format_double(p.high_rate));
    s.entries.emplace_back("L", format_double(p.low_rate));
    s.entries.emplace_back("S", format_double(p.density_scale));
    s.entries.emplace_back("period", format_double(p.period));
    return s;
}

inline ScalingParams params_from_section(const ConfigSection& s) {
    using configdetail::parse_double;
    using configdetail::parse_int;
    return ScalingParams::create(parse_int(s.require("n"), "n"),
                                 parse_int(s.require("N"), "N"),
                                 parse_double(s.require("D"), "D"),
                                 parse_double(s.require("H"), "H"),
                                 parse_double(s.require("L"), "L"),
                                 parse_double(s.require("S"), "S"),
                                 parse_double(s.require("period"), "period"));
}

inline std::string bits_to_string(const std::vector<std::uint8_t>& spins) {
    std::string bits(spins.size(), '0');
    for (std::size_t i = 0; i < spins.size(); ++i)
        if (spins[i]) bits[i] = '1';
    return bits;
}

inline std::vector<std::uint8_t> parse_bits(const std::string& bits) {
    std::vector<std::uint8_t> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1')
            throw std::invalid_argument("spin string must be 0/1");
        out[i] = bits[i] == '1';
    }
    return out;
}

}  // namespace iodetail

inline void save_trace(const Trace& trace, const std::string& base_path) {
    using configdetail::format_double;

    {
        std::ofstream csv(base_path + ".csv");
        if (!csv) throw std::runtime_error("save_trace: cannot open " + base_path + ".csv");
        csv << "time,site,u\n";
        for (std::size_t s = 0; s < trace.times.size(); ++s) {
            const std::string t = format_double(trace.times[s]);
            for (std::size_t x = 0; x < trace.density[s].size(); ++x)
                csv << t << ',' << x << ',' << format_double(trace.density[s][x]) << '\n';
        }
    }

    ConfigFile meta;
    ConfigSection header;
    header.name = "trace";
    header.entries.emplace_back("source", trace.source);
    header.entries.emplace_back("seed", std::to_string(trace.seed));
    header.entries.emplace_back("snapshots", std::to_string(trace.times.size()));
    meta.sections.push_back(std::move(header));
    meta.sections.push_back(iodetail::params_to_section(trace.params));

    for (const auto& m : trace.mechanisms) meta.sections.push_back(mechanism_to_section(m));

    if (trace.spde) {
        ConfigSection s;
        s.name = "spde";
        s.entries.emplace_back("half_sigma_sq", format_double(trace.spde->half_sigma_sq));
        s.entries.emplace_back("drift", configdetail::format_polynomial(trace.spde->drift));
        s.entries.emplace_back("noise",
                               configdetail::format_polynomial(trace.spde->noise_variance));
        meta.sections.push_back(std::move(s));
    }

    if (!trace.event_counts.empty()) {
        ConfigSection s;
        s.name = "events";
        for (const auto& c : trace.event_counts)
            s.entries.emplace_back(c.name, std::to_string(c.proposals) + "," +
                                               std::to_string(c.accepted) + "," +
                                               std::to_string(c.changed));
        meta.sections.push_back(std::move(s));
    }

    if (!trace.initial_spins.empty()) {
        ConfigSection s;
        s.name = "initial";
        s.entries.emplace_back("spins", iodetail::bits_to_string(trace.initial_spins));
        meta.sections.push_back(std::move(s));
    }

    if (trace.has_spins()) {
        ConfigSection s;
        s.name = "spins";
        for (std::size_t i = 0; i < trace.spins.size(); ++i)
            s.entries.emplace_back("t" + std::to_string(i),
                                   iodetail::bits_to_string(trace.spins[i]));
        meta.sections.push_back(std::move(s));
    }

    std::ofstream out(base_path + ".meta");
    if (!out) throw std::runtime_error("save_trace: cannot open " + base_path + ".meta");
    out << meta.serialize();
}

inline Trace load_trace(const std::string& base_path) {
    std::ifstream meta_in(base_path + ".meta");
    if (!meta_in) throw std::runtime_error("load_trace: cannot open " + base_path + ".meta");
    std::string meta_text((std::istreambuf_iterator<char>(meta_in)),
                          std::istreambuf_iterator<char>());
    const ConfigFile meta = ConfigFile::parse(meta_text);

    Trace trace;
    const ConfigSection* header = meta.find("trace");
    if (!header) throw std::runtime_error("load_trace: missing [trace] section");
    trace.source = header->require("source");
    trace.seed =
        static_cast<std::uint64_t>(configdetail::parse_int(header->require("seed"), "seed"));

    const ConfigSection* params = meta.find("params");
    if (!params) throw std::runtime_error("load_trace: missing [params] section");
    trace.params = iodetail::params_from_section(*params);

    for (const ConfigSection* s : meta.find_all("mechanisms"))
        trace.mechanisms.push_back(mechanism_from_section(*s));

    if (const ConfigSection* s = meta.find("spde")) {
        SpdeTerms terms;
        terms.half_sigma_sq =
            configdetail::parse_double(s->require("half_sigma_sq"), "half_sigma_sq");
        terms.drift = configdetail::parse_polynomial(s->require("drift"), "drift");
        terms.noise_variance = configdetail::parse_polynomial(s->require("noise"), "noise");
        trace.spde = terms;
    }

    if (const ConfigSection* s = meta.find("events"))
        for (const auto& [name, value] : s->entries) {
            FamilyEventCounts c;
            c.name = name;
            unsigned long long proposals = 0, accepted = 0, changed = 0;
            if (std::sscanf(value.c_str(), "%llu,%llu,%llu", &proposals, &accepted, &changed) != 3)
                throw std::runtime_error("load_trace: malformed event counts");
            c.proposals = proposals;
            c.accepted = accepted;
            c.changed = changed;
            trace.event_counts.push_back(c);
        }

    if (const ConfigSection* s = meta.find("initial"))
        trace.initial_spins = iodetail::parse_bits(s->require("spins"));

    if (const ConfigSection* s = meta.find("spins"))
        for (const auto& [key, bits] : s->entries) {
            (void)key;
            trace.spins.push_back(iodetail::parse_bits(bits));
        }

    std::ifstream csv(base_path + ".csv");
    if (!csv) throw std::runtime_error("load_trace: cannot open " + base_path + ".csv");
    std::string line;
    if (!std::getline(csv, line) || line != "time,site,u")
        throw std::runtime_error("load_trace: bad csv header");
    const long long L = trace.params.site_count;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        double t = 0.0, u = 0.0;
        long long site = 0;
        if (std::sscanf(line.c_str(), "%lg,%lld,%lg", &t, &site, &u) != 3)
            throw std::runtime_error("load_trace: malformed csv row: " + line);
        if (trace.times.empty() || t != trace.times.back()) {
            trace.times.push_back(t);
            trace.density.emplace_back();
            trace.density.back().reserve(L);
        }
        if (site != static_cast<long long>(trace.density.back().size()))
            throw std::runtime_error("load_trace: out-of-order site index");
        trace.density.back().push_back(u);
    }
    return trace;
}

// all trace base paths (files ending in .meta) found in a directory, sorted
inline std::vector<std::string> list_trace_bases(const std::string& directory) {
    std::vector<std::string> bases;
    for (const auto& entry : std::filesystem::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".meta")
            bases.push_back((entry.path().parent_path() / entry.path().stem()).string());
    std::sort(bases.begin(), bases.end());
    return bases;
}

}  // namespace latvoter
