#include "gb/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gb/error.hpp"

namespace gb {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col,
                  const std::string& path) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\r' || end[-1] == '\t')) --end;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        std::ostringstream os;
        os << path << ": non-numeric cell at row " << row << ", column " << col << " ('" << cell
           << "')";
        throw ValidationError(os.str());
    }
    return value;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_numbers;  // 1-based file line numbers
};

CsvTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path + ": cannot open file");
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split_line(line);
            continue;
        }
        t.rows.push_back(split_line(line));
        t.row_numbers.push_back(lineno);
        if (t.rows.back().size() != t.header.size()) {
            std::ostringstream os;
            os << path << ": row " << lineno << " has " << t.rows.back().size()
               << " cells, header has " << t.header.size();
            throw ValidationError(os.str());
        }
    }
    if (t.header.empty()) throw ValidationError(path + ": missing header line");
    return t;
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

}  // namespace

SurvivalDataset read_survival_csv(const std::string& path) {
    const CsvTable t = read_table(path);
    if (t.header.size() < 3 || trimmed(t.header[0]) != "time" || trimmed(t.header[1]) != "event")
        throw ValidationError(path + ": expected header 'time,event,x1,...,xp'");
    for (std::size_t j = 2; j < t.header.size(); ++j) {
        std::ostringstream want;
        want << "x" << (j - 1);
        if (trimmed(t.header[j]) != want.str())
            throw ValidationError(path + ": covariate columns must be named x1..xp in order");
    }
    const std::size_t n = t.rows.size();
    const std::size_t p = t.header.size() - 2;
    if (n == 0) throw ValidationError(path + ": no data rows");

    std::vector<double> times(n);
    std::vector<int> events(n);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row_no = t.row_numbers[i];
        times[i] = parse_cell(t.rows[i][0], row_no, 1, path);
        const double ev = parse_cell(t.rows[i][1], row_no, 2, path);
        if (ev != 0.0 && ev != 1.0) {
            std::ostringstream os;
            os << path << ": event flag must be 0 or 1 at row " << row_no;
            throw ValidationError(os.str());
        }
        events[i] = static_cast<int>(ev);
        for (std::size_t j = 0; j < p; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                parse_cell(t.rows[i][j + 2], row_no, j + 3, path);
    }
    try {
        return SurvivalDataset::make(std::move(times), std::move(events), std::move(X));
    } catch (const Error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

GroupedSample read_grouped_csv(const std::string& path) {
    const CsvTable t = read_table(path);
    if (t.header.size() != 2 || trimmed(t.header[0]) != "group" || trimmed(t.header[1]) != "value")
        throw ValidationError(path + ": expected header 'group,value'");
    std::vector<Group> groups;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string label = trimmed(t.rows[i][0]);
        const double v = parse_cell(t.rows[i][1], t.row_numbers[i], 2, path);
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return g.label == label; });
        if (it == groups.end()) groups.push_back(Group{label, {v}});
        else it->values.push_back(v);
    }
    try {
        return GroupedSample::make(std::move(groups));
    } catch (const Error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::vector<double> read_scalar_csv(const std::string& path) {
    const CsvTable t = read_table(path);
    if (t.header.size() != 1 || trimmed(t.header[0]) != "value")
        throw ValidationError(path + ": expected header 'value'");
    std::vector<double> values(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        values[i] = parse_cell(t.rows[i][0], t.row_numbers[i], 1, path);
    if (values.empty()) throw ValidationError(path + ": no data rows");
    return values;
}

void AtomicCsvWriter::comment(const std::string& line) { lines_.push_back("# " + line); }

void AtomicCsvWriter::row(const std::string& line) { lines_.push_back(line); }

void AtomicCsvWriter::commit() {
    const std::string tmp = path_ + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        for (const auto& l : lines_) out << l << "\n";
        if (!out) throw Error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path_);
}

std::string format_double(double v) {
    char buf[40];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    // otherwise the shortest representation that round-trips
    for (int prec = 1; prec <= 16; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace gb
