#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stbd/csv.hpp"
#include "stbd/linalg.hpp"

namespace stbd {

struct Location {
    std::string id;
    double lat = 0.0;  // degrees, [-90, 90]
    double lon = 0.0;  // degrees, [-180, 180]
};

struct Observation {
    int location_index = 0;
    int time_index = 0;
    double response = 0.0;
    std::vector<double> covariates;
};

struct Dataset {
    std::vector<Location> locations;
    int T = 0;
    std::vector<Observation> observations;
    std::vector<std::string> covariate_names;

    int S() const { return static_cast<int>(locations.size()); }
    int N() const { return static_cast<int>(observations.size()); }
    int m() const { return static_cast<int>(covariate_names.size()); }
};

struct Partition {
    std::vector<std::vector<int>> assignments;  // disjoint location-index sets
    std::uint64_t seed = 0;

    int Q() const { return static_cast<int>(assignments.size()); }
};

// Design for one subset: rows ordered by (subset-local location rank, time,
// replicate); cell_index maps each row to loc_local * T + time.
struct DesignBundle {
    Vector Y;
    Matrix X;                      // leading all-ones column
    std::vector<int> cell_index;   // per-row, into the m_q * T grid
    std::vector<int> K_diag;       // replicate count per grid cell
    std::vector<int> subset_locs;  // global location indices, subset order
    int T = 0;

    int m_q() const { return static_cast<int>(subset_locs.size()); }
    int G_q() const { return m_q() * T; }
    int N_q() const { return static_cast<int>(Y.size()); }
};

namespace detail {
inline void check_finite(double v, const std::string& what, std::size_t row) {
    if (!std::isfinite(v))
        throw std::runtime_error("non-finite " + what + " at data row " + std::to_string(row));
}
}  // namespace detail

struct CsvSchema {
    std::string location_id = "location_id";
    std::string lat = "lat";
    std::string lon = "lon";
    std::string time_index = "time_index";
    std::string response = "response";
    // remaining columns, in file order, are covariates
};

inline Dataset load_dataset(const std::string& path, const CsvSchema& schema = {}) {
    csv::Table t = csv::read_file(path);
    const int c_id = t.column(schema.location_id);
    const int c_lat = t.column(schema.lat);
    const int c_lon = t.column(schema.lon);
    const int c_time = t.column(schema.time_index);
    const int c_resp = t.column(schema.response);
    for (auto [c, name] : {std::pair{c_id, schema.location_id}, {c_lat, schema.lat},
                           {c_lon, schema.lon}, {c_time, schema.time_index},
                           {c_resp, schema.response}})
        if (c < 0) throw std::runtime_error(path + ": missing column '" + name + "'");

    Dataset ds;
    std::vector<int> covariate_cols;
    for (int c = 0; c < static_cast<int>(t.header.size()); ++c)
        if (c != c_id && c != c_lat && c != c_lon && c != c_time && c != c_resp) {
            covariate_cols.push_back(c);
            ds.covariate_names.push_back(t.header[static_cast<std::size_t>(c)]);
        }

    std::map<std::string, int> loc_index;
    std::vector<long> raw_times;
    raw_times.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        const std::string& id = row[static_cast<std::size_t>(c_id)];
        double lat = csv::parse_double(row[static_cast<std::size_t>(c_lat)], ctx);
        double lon = csv::parse_double(row[static_cast<std::size_t>(c_lon)], ctx);
        detail::check_finite(lat, "lat", r + 2);
        detail::check_finite(lon, "lon", r + 2);
        if (lat < -90 || lat > 90 || lon < -180 || lon > 180)
            throw std::runtime_error(ctx + ": coordinates out of range");

        auto it = loc_index.find(id);
        int li;
        if (it == loc_index.end()) {
            li = static_cast<int>(ds.locations.size());
            loc_index.emplace(id, li);
            ds.locations.push_back({id, lat, lon});
        } else {
            li = it->second;
            const Location& known = ds.locations[static_cast<std::size_t>(li)];
            if (known.lat != lat || known.lon != lon)
                throw std::runtime_error(ctx + ": duplicate location id '" + id +
                                         "' with conflicting coordinates");
        }

        Observation obs;
        obs.location_index = li;
        raw_times.push_back(csv::parse_long(row[static_cast<std::size_t>(c_time)], ctx));
        obs.response = csv::parse_double(row[static_cast<std::size_t>(c_resp)], ctx);
        detail::check_finite(obs.response, "response", r + 2);
        for (int c : covariate_cols) {
            double v = csv::parse_double(row[static_cast<std::size_t>(c)], ctx);
            detail::check_finite(v, "covariate", r + 2);
            obs.covariates.push_back(v);
        }
        ds.observations.push_back(std::move(obs));
    }

    // compact time indices to 0..T-1 preserving numeric order
    std::vector<long> uniq = raw_times;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::map<long, int> time_map;
    for (std::size_t i = 0; i < uniq.size(); ++i) time_map[uniq[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < ds.observations.size(); ++i)
        ds.observations[i].time_index = time_map[raw_times[i]];
    ds.T = static_cast<int>(uniq.size());
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    csv::Writer w(path);
    std::string header = "location_id,lat,lon,time_index,response";
    for (const auto& n : ds.covariate_names) header += "," + n;
    w.row(header);
    for (const auto& obs : ds.observations) {
        const Location& loc = ds.locations[static_cast<std::size_t>(obs.location_index)];
        std::ostringstream line;
        line.precision(17);
        line << loc.id << ',' << loc.lat << ',' << loc.lon << ',' << obs.time_index << ','
             << obs.response;
        for (double v : obs.covariates) line << ',' << v;
        w.row(line.str());
    }
}

// Shuffle-then-slice: the first Q-1 sets take floor(S/Q) locations each and
// the last set keeps the remainder (983/20 -> 19x49 + 52).  Deterministic in
// (S, Q, seed).
inline Partition partition_locations(const Dataset& ds, int Q, std::uint64_t seed) {
    const int S = ds.S();
    if (Q <= 0) throw std::invalid_argument("partition_locations: Q must be positive");
    if (Q > S) throw std::invalid_argument("partition_locations: Q exceeds location count");

    std::vector<int> order(static_cast<std::size_t>(S));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(seed);
    std::shuffle(order.begin(), order.end(), gen);

    Partition p;
    p.seed = seed;
    const int base = S / Q;
    int pos = 0;
    for (int q = 0; q < Q; ++q) {
        int size = q < Q - 1 ? base : S - base * (Q - 1);
        p.assignments.emplace_back(order.begin() + pos, order.begin() + pos + size);
        pos += size;
    }
    return p;
}

inline DesignBundle build_design(const Dataset& ds, const std::vector<int>& subset) {
    if (subset.empty()) throw std::invalid_argument("build_design: empty subset");
    const int S = ds.S();
    std::vector<int> local_rank(static_cast<std::size_t>(S), -1);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        int g = subset[i];
        if (g < 0 || g >= S) throw std::invalid_argument("build_design: bad location index");
        local_rank[static_cast<std::size_t>(g)] = static_cast<int>(i);
    }

    std::vector<int> rows;
    for (int r = 0; r < ds.N(); ++r)
        if (local_rank[static_cast<std::size_t>(ds.observations[static_cast<std::size_t>(r)]
                                                    .location_index)] >= 0)
            rows.push_back(r);
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
        const auto& oa = ds.observations[static_cast<std::size_t>(a)];
        const auto& ob = ds.observations[static_cast<std::size_t>(b)];
        int la = local_rank[static_cast<std::size_t>(oa.location_index)];
        int lb = local_rank[static_cast<std::size_t>(ob.location_index)];
        if (la != lb) return la < lb;
        return oa.time_index < ob.time_index;
    });

    DesignBundle d;
    d.T = ds.T;
    d.subset_locs = subset;
    const int n = static_cast<int>(rows.size());
    const int m = ds.m();
    d.Y.resize(n);
    d.X.resize(n, m + 1);
    d.cell_index.resize(static_cast<std::size_t>(n));
    d.K_diag.assign(static_cast<std::size_t>(subset.size()) * static_cast<std::size_t>(ds.T), 0);
    for (int i = 0; i < n; ++i) {
        const auto& obs = ds.observations[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
        d.Y(i) = obs.response;
        d.X(i, 0) = 1.0;
        for (int j = 0; j < m; ++j) d.X(i, j + 1) = obs.covariates[static_cast<std::size_t>(j)];
        int cell = local_rank[static_cast<std::size_t>(obs.location_index)] * ds.T + obs.time_index;
        d.cell_index[static_cast<std::size_t>(i)] = cell;
        ++d.K_diag[static_cast<std::size_t>(cell)];
    }
    return d;
}

// Normalized time trend: linear = t/(T-1) in [0,1], quadratic = linear^2.
struct TimeTrend {
    std::vector<double> linear;
    std::vector<double> quadratic;
};

inline TimeTrend time_trend_covariates(int T) {
    if (T < 1) throw std::invalid_argument("time_trend_covariates: T must be >= 1");
    TimeTrend tt;
    for (int t = 0; t < T; ++t) {
        double u = T == 1 ? 0.0 : static_cast<double>(t) / (T - 1);
        tt.linear.push_back(u);
        tt.quadratic.push_back(u * u);
    }
    return tt;
}

}  // namespace stbd
