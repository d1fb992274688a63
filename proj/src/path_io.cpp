#include "lob_lab/path_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lob_lab/sweep_analysis.hpp"

namespace lob_lab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    if (s.empty()) return kNaN;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("malformed number '" + s + "'");
    return v;
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_path_csv(std::ostream& out, const EquilibriumPath& path) {
    const auto& p = path.params;
    out << "# alpha=" << format_exact(p.alpha) << ",sigma=" << format_exact(p.sigma)
        << ",horizon=" << format_exact(p.horizon) << ",steps=" << p.steps << ",degenerate_from=";
    if (path.degenerate_from) out << *path.degenerate_from;
    out << '\n' << kPathCsvHeader << '\n';
    for (const auto& r : path_report(path)) {
        out << 1 << ',' << r.n << ',' << format_number(r.t) << ',' << format_number(r.pa) << ','
            << format_number(r.pb) << ',' << format_number(r.la) << ',' << format_number(r.lb) << ','
            << format_number(r.drift_to_horizon) << '\n';
    }
}

EquilibriumPath read_path_csv(std::istream& in) {
    std::string meta;
    if (!std::getline(in, meta) || meta.rfind("# ", 0) != 0) {
        throw std::runtime_error("path csv: missing parameter line");
    }
    EquilibriumPath path;
    bool have[4] = {false, false, false, false};
    for (const auto& kv : split(meta.substr(2), ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("path csv: malformed parameter '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "alpha") {
            path.params.alpha = parse_double(value);
            have[0] = true;
        } else if (key == "sigma") {
            path.params.sigma = parse_double(value);
            have[1] = true;
        } else if (key == "horizon") {
            path.params.horizon = parse_double(value);
            have[2] = true;
        } else if (key == "steps") {
            path.params.steps = std::stoi(value);
            have[3] = true;
        } else if (key == "degenerate_from") {
            if (!value.empty()) path.degenerate_from = std::stoi(value);
        }
    }
    for (const bool h : have) {
        if (!h) throw std::runtime_error("path csv: parameter line lacks alpha/sigma/horizon/steps");
    }
    path.params.validate();

    std::string header;
    if (!std::getline(in, header) || header != kPathCsvHeader) {
        throw std::runtime_error("path csv: unexpected header '" + header + "'");
    }
    const int n_steps = path.params.steps;
    path.pa.assign(n_steps + 1, kNaN);
    path.pb.assign(n_steps + 1, kNaN);
    path.la.assign(n_steps + 1, kNaN);
    path.lb.assign(n_steps + 1, kNaN);
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 8 || f[0] != "1") throw std::runtime_error("path csv: malformed row '" + line + "'");
        const int n = std::stoi(f[1]);
        if (n < 0 || n > n_steps) throw std::runtime_error("path csv: step out of range in '" + line + "'");
        path.pa[n] = parse_double(f[3]);
        path.pb[n] = parse_double(f[4]);
        path.la[n] = parse_double(f[5]);
        path.lb[n] = parse_double(f[6]);
        ++rows;
    }
    if (rows != n_steps + 1) throw std::runtime_error("path csv: expected " + std::to_string(n_steps + 1) + " rows");

    path.last_finite_ask = path.degenerate_from ? path.pa[*path.degenerate_from + 1] : kNaN;
    double min_abs = std::numeric_limits<double>::infinity();
    for (int n = path.first_valid_step(); n <= n_steps; ++n) {
        if (std::isnan(path.la[n])) throw std::runtime_error("path csv: missing value at valid step " + std::to_string(n));
        min_abs = std::min(min_abs, std::abs(path.la[n]));
    }
    path.min_abs_la = min_abs;
    return path;
}

void write_file_atomically(const std::filesystem::path& target, const std::string& content) {
    const auto tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + target.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + target.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot rename into " + target.string());
    }
}

}  // namespace lob_lab
