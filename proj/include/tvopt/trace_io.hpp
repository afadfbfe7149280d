#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tvopt/common.hpp"
#include "tvopt/sim.hpp"

namespace tvopt {

/// Column layout: t, positions, velocities (when present), errors, V, W (when
/// present), then the oracle trajectory so plots can overlay x*(t) without
/// re-solving. All values use 17 significant digits, so identical runs produce
/// byte-identical files.
inline std::string trace_csv(const std::vector<TraceRecord>& records) {
    if (records.empty()) throw SimulationError("cannot serialize an empty trace");
    const auto& first = records.front();
    const size_t n = first.x.size();
    const Eigen::Index m = first.x.front().size();
    const bool has_v = !first.v.empty();
    const bool distributed = n > 1;
    const bool has_estimator = !first.estimates.sigma.empty();
    const bool has_w = first.lyapunov_w.has_value();

    std::string out = "t";
    for (size_t i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < m; ++k) out += strf(",x%zu_%lld", i + 1, static_cast<long long>(k + 1));
    if (has_v)
        for (size_t i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < m; ++k) out += strf(",v%zu_%lld", i + 1, static_cast<long long>(k + 1));
    out += ",tracking_error";
    if (distributed) out += ",consensus_error";
    if (has_estimator) out += ",estimator_error";
    out += ",V";
    if (has_w) out += ",W";
    for (Eigen::Index k = 0; k < m; ++k) out += strf(",xstar_%lld", static_cast<long long>(k + 1));
    out += "\n";

    for (const auto& rec : records) {
        out += format_double(rec.t);
        for (const auto& x : rec.x)
            for (Eigen::Index k = 0; k < m; ++k) out += "," + format_double(x(k));
        if (has_v)
            for (const auto& v : rec.v)
                for (Eigen::Index k = 0; k < m; ++k) out += "," + format_double(v(k));
        out += "," + format_double(rec.tracking_error);
        if (distributed) out += "," + format_double(rec.consensus_error);
        if (has_estimator) out += "," + format_double(rec.estimator_error);
        out += "," + format_double(rec.lyapunov_v);
        if (has_w) out += "," + format_double(*rec.lyapunov_w);
        for (Eigen::Index k = 0; k < m; ++k) out += "," + format_double(rec.x_star(k));
        out += "\n";
    }
    return out;
}

inline void write_trace_csv(const std::vector<TraceRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimulationError(strf("cannot open '%s' for writing", path.c_str()));
    out << trace_csv(records);
}

/// Parsed trace: ordered column names and one series per column.
struct TraceTable {
    std::vector<std::string> columns;
    std::map<std::string, std::vector<double>> series;

    const std::vector<double>& at(const std::string& name) const {
        const auto it = series.find(name);
        if (it == series.end()) throw ConfigError(strf("trace has no column '%s'", name.c_str()));
        return it->second;
    }
    bool has(const std::string& name) const { return series.count(name) > 0; }
    size_t rows() const { return series.empty() ? 0 : series.begin()->second.size(); }
};

inline TraceTable read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(strf("cannot open trace file '%s'", path.c_str()));
    TraceTable table;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(strf("trace file '%s' is empty", path.c_str()));
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
        table.columns.push_back(cell);
        table.series[cell] = {};
    }
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        size_t col = 0;
        while (std::getline(row, cell, ',')) {
            if (col >= table.columns.size())
                throw ConfigError(strf("%s:%zu: more cells than header columns", path.c_str(), line_no));
            table.series[table.columns[col]].push_back(std::strtod(cell.c_str(), nullptr));
            ++col;
        }
        if (col != table.columns.size())
            throw ConfigError(strf("%s:%zu: expected %zu cells, got %zu", path.c_str(), line_no,
                                   table.columns.size(), col));
    }
    return table;
}

/// Binary trace: magic, embedded config JSON for provenance, then the same
/// per-record scalars as the CSV in fixed order.
inline void write_trace_binary(const std::vector<TraceRecord>& records, const std::string& config_json,
                               const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimulationError(strf("cannot open '%s' for writing", path.c_str()));
    const char magic[8] = {'T', 'V', 'T', 'R', 'A', 'C', 'E', '1'};
    out.write(magic, sizeof(magic));
    auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    auto write_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    write_u64(config_json.size());
    out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));

    const auto& first = records.front();
    const std::uint64_t n = first.x.size();
    const std::uint64_t m = static_cast<std::uint64_t>(first.x.front().size());
    const std::uint64_t has_v = first.v.empty() ? 0 : 1;
    const std::uint64_t has_w = first.lyapunov_w.has_value() ? 1 : 0;
    write_u64(records.size());
    write_u64(n);
    write_u64(m);
    write_u64(has_v);
    write_u64(has_w);
    for (const auto& rec : records) {
        write_f64(rec.t);
        for (const auto& x : rec.x)
            for (Eigen::Index k = 0; k < x.size(); ++k) write_f64(x(k));
        if (has_v)
            for (const auto& v : rec.v)
                for (Eigen::Index k = 0; k < v.size(); ++k) write_f64(v(k));
        write_f64(rec.tracking_error);
        write_f64(rec.consensus_error);
        write_f64(rec.estimator_error);
        write_f64(rec.lyapunov_v);
        if (has_w) write_f64(*rec.lyapunov_w);
        for (Eigen::Index k = 0; k < rec.x_star.size(); ++k) write_f64(rec.x_star(k));
    }
}

}  // namespace tvopt
