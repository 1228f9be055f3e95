#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace amhfit {

// One observation: outcomes, design rows for the three linear predictors
// and a count weight. z1/z2 hold covariate values only (thresholds are the
// intercepts); zw is the full design row for the association model and so
// includes its intercept column when one is wanted.
struct DataRow {
    std::int64_t subject = 0;
    int x = 0; // binary outcome in {0, 1}
    int y = 1; // ordinal outcome in {1..K}
    std::vector<double> z1;
    std::vector<double> z2;
    std::vector<double> zw{1.0};
    double weight = 1.0;
};

struct Dataset {
    std::vector<DataRow> rows;
    int k_levels = 2;
    int z1_width = 0;
    int z2_width = 0;
    int zw_width = 1;
    // optional column labels used in reports
    std::vector<std::string> z1_names, z2_names, zw_names;

    void validate() const {
        if (rows.empty()) throw std::invalid_argument("Dataset: no data rows");
        if (k_levels < 2) throw std::invalid_argument("Dataset: K must be >= 2");
        if (zw_width < 1) throw std::invalid_argument("Dataset: association design needs >= 1 column");
        for (const DataRow& r : rows) {
            if (r.x != 0 && r.x != 1) throw std::invalid_argument("Dataset: x must be 0 or 1");
            if (r.y < 1 || r.y > k_levels) throw std::invalid_argument("Dataset: y outside {1..K}");
            if (!(r.weight >= 0.0)) throw std::invalid_argument("Dataset: weights must be >= 0");
            if (int(r.z1.size()) != z1_width || int(r.z2.size()) != z2_width ||
                int(r.zw.size()) != zw_width)
                throw std::invalid_argument("Dataset: design row width mismatch");
        }
    }

    double total_weight() const {
        double t = 0.0;
        for (const DataRow& r : rows) t += r.weight;
        return t;
    }

    std::size_t n_subjects() const {
        std::vector<std::int64_t> ids;
        for (const DataRow& r : rows) ids.push_back(r.subject);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids.size();
    }
};

// Merges rows that agree in everything but the weight. The weighted
// likelihood is unchanged; fits on heavily replicated designs get cheaper.
inline Dataset aggregate(const Dataset& data) {
    Dataset out = data;
    auto key_less = [](const DataRow& a, const DataRow& b) {
        if (a.subject != b.subject) return a.subject < b.subject;
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        if (a.z1 != b.z1) return a.z1 < b.z1;
        if (a.z2 != b.z2) return a.z2 < b.z2;
        return a.zw < b.zw;
    };
    auto key_eq = [](const DataRow& a, const DataRow& b) {
        return a.subject == b.subject && a.x == b.x && a.y == b.y && a.z1 == b.z1 &&
               a.z2 == b.z2 && a.zw == b.zw;
    };
    std::stable_sort(out.rows.begin(), out.rows.end(), key_less);
    std::vector<DataRow> merged;
    for (const DataRow& r : out.rows) {
        if (!merged.empty() && key_eq(merged.back(), r))
            merged.back().weight += r.weight;
        else
            merged.push_back(r);
    }
    out.rows = std::move(merged);
    return out;
}

// Model configuration shared by ingestion and fitting. Column names refer
// to a CSV header; fits built from in-memory datasets only use k_levels,
// random_effects and gh_order.
struct ModelSpec {
    int k_levels = 2;
    std::string x_column = "x";
    std::string y_column = "y";
    std::vector<std::string> z1_columns;
    std::vector<std::string> z2_columns;
    std::vector<std::string> zw_columns; // "factor:NAME" expands to indicators
    std::string weight_column;
    std::string subject_column; // required iff random_effects
    bool random_effects = false;
    int gh_order = 20;
    std::uint64_t seed = 0;
};

} // namespace amhfit
