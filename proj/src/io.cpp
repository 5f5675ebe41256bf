#include "klctl/io.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

#include "klctl/error.hpp"

namespace klctl {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::random_device rd;
    const fs::path tmp = parent / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw ConfigError("write failed for " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ConfigError("cannot move output into place at " + path.string());
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::size_t NumericTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ConfigError("CSV is missing column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

NumericTable parse_csv(std::string_view text) {
    NumericTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view line =
            trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_commas(line);
        if (table.header.empty()) {
            for (auto c : cells) table.header.emplace_back(trim(c));
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ConfigError("CSV line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " fields, expected " +
                              std::to_string(table.header.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) {
            c = trim(c);
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) {
                throw ConfigError("CSV line " + std::to_string(line_no) + ": not a number: '" +
                                  std::string(c) + "'");
            }
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw ConfigError("CSV is empty");
    return table;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "step,setpoint,kl_raw,kl_smoothed,beta\n";
    out.reserve(traj.rows.size() * 64);
    for (const auto& r : traj.rows) {
        out += std::to_string(r.step);
        out += ',';
        out += format_double(r.setpoint);
        out += ',';
        out += format_double(r.kl_raw);
        out += ',';
        out += format_double(r.kl_smoothed);
        out += ',';
        out += format_double(r.beta);
        out += '\n';
    }
    return out;
}

std::string region_csv(const std::vector<RegionCell>& cells) {
    std::string out = "kp,ki,routh_stable,eig_stable,spectral_radius,violated\n";
    for (const auto& c : cells) {
        std::string violated;
        for (auto cond : c.violated) {
            if (!violated.empty()) violated += ';';
            violated += condition_id(cond);
        }
        out += format_double(c.kp) + ',' + format_double(c.ki) + ',' +
               (c.routh_stable ? "1" : "0") + ',' + (c.eig_stable ? "1" : "0") + ',' +
               format_double(c.spectral_radius) + ',' + violated + '\n';
    }
    return out;
}

namespace {

std::vector<std::pair<double, double>> read_pairs(std::string_view csv_text, std::string_view x,
                                                  std::string_view y) {
    const NumericTable t = parse_csv(csv_text);
    const auto ix = t.column(x);
    const auto iy = t.column(y);
    std::vector<std::pair<double, double>> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.emplace_back(r[ix], r[iy]);
    return out;
}

}  // namespace

std::vector<std::pair<double, double>> read_step_kl(std::string_view csv_text) {
    return read_pairs(csv_text, "step", "kl");
}

std::vector<std::pair<double, double>> read_beta_kl(std::string_view csv_text) {
    return read_pairs(csv_text, "beta", "kl");
}

}  // namespace klctl
