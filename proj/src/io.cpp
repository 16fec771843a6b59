#include "taildep/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace taildep {

namespace {

bool parse_double(const std::string& cell, double* out) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    if (begin == end) return false;
    const auto [ptr, ec] = std::from_chars(begin, end, *out);
    return ec == std::errc{} && ptr == end;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, delim)) cells.push_back(cell);
    if (!line.empty() && line.back() == delim) cells.push_back("");
    return cells;
}

struct RawCsv {
    std::vector<std::vector<double>> rows;
};

RawCsv read_csv_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open '" + path + "'");

    RawCsv csv;
    std::string line;
    int lineno = 0;
    bool maybe_header = true;
    size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char delim = line.find(';') != std::string::npos ? ';' : ',';
        const std::vector<std::string> cells = split(line, delim);
        std::vector<double> row(cells.size());
        bool numeric = true;
        size_t bad_col = 0;
        for (size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], &row[c])) {
                numeric = false;
                bad_col = c;
                break;
            }
        }
        if (!numeric) {
            if (maybe_header) {  // a leading non-numeric row is a header
                maybe_header = false;
                continue;
            }
            throw config_error("'" + path + "': non-numeric cell at line " +
                               std::to_string(lineno) + ", column " +
                               std::to_string(bad_col + 1));
        }
        maybe_header = false;
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw config_error("'" + path + "': line " + std::to_string(lineno) +
                               " has " + std::to_string(row.size()) +
                               " columns, expected " + std::to_string(width));
        csv.rows.push_back(std::move(row));
    }
    if (csv.rows.empty()) throw config_error("'" + path + "': no data rows");
    return csv;
}

}  // namespace

DataMatrix read_csv_matrix(const std::string& path) {
    const RawCsv csv = read_csv_rows(path);
    const int n = static_cast<int>(csv.rows.size());
    const int d = static_cast<int>(csv.rows.front().size());
    DataMatrix data(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) data(i, j) = csv.rows[i][j];
    return data;
}

void write_csv_matrix(const std::string& path, const DataMatrix& data) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write '" + path + "'");
    for (int j = 0; j < data.d(); ++j) out << (j ? ",x" : "x") << (j + 1);
    out << '\n';
    out.precision(17);
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.d(); ++j) {
            if (j) out << ',';
            out << data(i, j);
        }
        out << '\n';
    }
}

Dag read_dag_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open '" + path + "'");

    Dag dag;
    std::map<std::string, int> param_ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream tok(line);
        int parent = 0, child = 0;
        std::string name;
        if (!(tok >> parent)) continue;  // blank line
        if (!(tok >> child >> name))
            throw config_error("'" + path + "': line " + std::to_string(lineno) +
                               ": expected 'parent child param_name'");
        if (parent < 1 || child < 1)
            throw config_error("'" + path + "': line " + std::to_string(lineno) +
                               ": node ids are 1-based");
        const auto [it, inserted] =
            param_ids.emplace(name, static_cast<int>(param_ids.size()));
        dag.edges.push_back({parent - 1, child - 1, it->second, name});
        dag.d = std::max({dag.d, parent, child});
    }
    if (dag.edges.empty()) throw config_error("'" + path + "': no edges");
    dag.validate();
    return dag;
}

PointSet read_point_file(const std::string& path, int d) {
    const RawCsv csv = read_csv_rows(path);
    PointSet ps;
    ps.d = d;
    for (const auto& row : csv.rows) {
        if (static_cast<int>(row.size()) != d)
            throw config_error("'" + path + "': point row has " +
                               std::to_string(row.size()) + " columns, expected " +
                               std::to_string(d));
        ps.points.push_back(row);
    }
    ps.validate();
    return ps;
}

}  // namespace taildep
