#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amhfit/data.hpp"

namespace amhfit {

// Input-side failures carry the offending file row where one exists.
struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_number(const std::string& s, std::size_t file_row, const std::string& col) {
    if (s.empty())
        throw IngestError("row " + std::to_string(file_row) + ": missing value in column '" +
                          col + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size())
        throw IngestError("row " + std::to_string(file_row) + ": cannot parse '" + s +
                          "' in column '" + col + "'");
    return v;
}

struct ColumnTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows; // raw fields
    std::vector<std::size_t> file_rows;         // 1-based line numbers

    int column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw IngestError("unknown column '" + name + "'");
        return int(it - header.begin());
    }
};

inline ColumnTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path + "'");
    ColumnTable t;
    std::string line;
    std::size_t file_row = 0;
    while (std::getline(in, line)) {
        ++file_row;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw IngestError("row " + std::to_string(file_row) + ": expected " +
                              std::to_string(t.header.size()) + " fields, found " +
                              std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.file_rows.push_back(file_row);
    }
    if (t.header.empty()) throw IngestError("'" + path + "': no header row");
    if (t.rows.empty()) throw IngestError("'" + path + "': no data rows");
    return t;
}

} // namespace detail

// Reads a UTF-8 CSV with a header row into a Dataset under the given
// model layout. x must be coded {0,1}, y in {1..K}; count weights are
// honoured. Association columns named "factor:NAME" expand into one
// indicator per distinct value of NAME and replace the intercept;
// plain numeric association covariates keep a leading intercept column.
inline Dataset ingest_csv(const std::string& path, const ModelSpec& spec) {
    const detail::ColumnTable t = detail::read_table(path);
    const int cx = t.column(spec.x_column);
    const int cy = t.column(spec.y_column);
    const int cw = spec.weight_column.empty() ? -1 : t.column(spec.weight_column);
    const int cs = spec.subject_column.empty() ? -1 : t.column(spec.subject_column);
    if (spec.random_effects && cs < 0)
        throw IngestError("random effects require --subject");

    std::vector<int> c1, c2;
    for (const std::string& n : spec.z1_columns) c1.push_back(t.column(n));
    for (const std::string& n : spec.z2_columns) c2.push_back(t.column(n));

    struct WCol {
        int col = -1;       // source column; -1 is the intercept
        double match = 0.0; // indicator target for factor columns
        bool factor = false;
        std::string name;
    };
    std::vector<WCol> wcols;
    bool any_factor = false;
    for (const std::string& n : spec.zw_columns)
        if (n.rfind("factor:", 0) == 0) any_factor = true;
    if (!any_factor) wcols.push_back({-1, 0.0, false, "(intercept)"});
    for (const std::string& n : spec.zw_columns) {
        if (n.rfind("factor:", 0) == 0) {
            const std::string base = n.substr(7);
            const int col = t.column(base);
            std::vector<double> levels;
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                levels.push_back(detail::parse_number(t.rows[i][std::size_t(col)],
                                                      t.file_rows[i], base));
            std::sort(levels.begin(), levels.end());
            levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
            std::ostringstream label;
            for (double lv : levels) {
                label.str("");
                label << base << "=" << lv;
                wcols.push_back({col, lv, true, label.str()});
            }
        } else {
            wcols.push_back({t.column(n), 0.0, false, n});
        }
    }

    Dataset d;
    d.k_levels = spec.k_levels;
    d.z1_width = int(c1.size());
    d.z2_width = int(c2.size());
    d.zw_width = int(wcols.size());
    d.z1_names = spec.z1_columns;
    d.z2_names = spec.z2_columns;
    for (const WCol& w : wcols) d.zw_names.push_back(w.name);

    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& raw = t.rows[i];
        const std::size_t file_row = t.file_rows[i];
        DataRow r;
        const double xv = detail::parse_number(raw[std::size_t(cx)], file_row, spec.x_column);
        if (xv != 0.0 && xv != 1.0)
            throw IngestError("row " + std::to_string(file_row) + ": x must be 0 or 1, found " +
                              raw[std::size_t(cx)]);
        r.x = int(xv);
        const double yv = detail::parse_number(raw[std::size_t(cy)], file_row, spec.y_column);
        if (yv != std::floor(yv) || yv < 1.0 || yv > double(spec.k_levels))
            throw IngestError("row " + std::to_string(file_row) + ": y=" + raw[std::size_t(cy)] +
                              " outside {1.." + std::to_string(spec.k_levels) + "}");
        r.y = int(yv);
        if (cw >= 0) {
            r.weight = detail::parse_number(raw[std::size_t(cw)], file_row, spec.weight_column);
            if (!(r.weight >= 0.0))
                throw IngestError("row " + std::to_string(file_row) + ": negative weight");
        }
        if (cs >= 0)
            r.subject = std::int64_t(
                detail::parse_number(raw[std::size_t(cs)], file_row, spec.subject_column));
        for (int c : c1)
            r.z1.push_back(detail::parse_number(raw[std::size_t(c)], file_row, t.header[std::size_t(c)]));
        for (int c : c2)
            r.z2.push_back(detail::parse_number(raw[std::size_t(c)], file_row, t.header[std::size_t(c)]));
        r.zw.clear();
        for (const WCol& w : wcols) {
            if (w.col < 0)
                r.zw.push_back(1.0);
            else {
                const double v =
                    detail::parse_number(raw[std::size_t(w.col)], file_row, w.name);
                r.zw.push_back(w.factor ? (v == w.match ? 1.0 : 0.0) : v);
            }
        }
        d.rows.push_back(std::move(r));
    }
    return d;
}

// Writes simulated observations; one row per draw, optionally with the
// latent pair appended.
inline void write_simulation_csv(std::ostream& out, const Dataset& data,
                                 const std::vector<std::pair<double, double>>* latent) {
    out << "subject,x,y";
    for (int j = 0; j < data.z1_width; ++j)
        out << "," << (j < int(data.z1_names.size()) ? data.z1_names[std::size_t(j)]
                                                     : "z1_" + std::to_string(j + 1));
    for (int j = 0; j < data.z2_width; ++j)
        out << "," << (j < int(data.z2_names.size()) ? data.z2_names[std::size_t(j)]
                                                     : "z2_" + std::to_string(j + 1));
    if (latent) out << ",latent_x,latent_y";
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const DataRow& r = data.rows[i];
        out << r.subject << "," << r.x << "," << r.y;
        for (double v : r.z1) out << "," << v;
        for (double v : r.z2) out << "," << v;
        if (latent) out << "," << (*latent)[i].first << "," << (*latent)[i].second;
        out << "\n";
    }
}

} // namespace amhfit
