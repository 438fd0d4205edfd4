#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stbd/combine.hpp"
#include "stbd/csv.hpp"
#include "stbd/dataset.hpp"

namespace stbd {

inline void save_partition(const Partition& part, const Dataset& ds, const std::string& path) {
    csv::Writer w(path);
    w.row("location_id,subset_index");
    for (int q = 0; q < part.Q(); ++q)
        for (int g : part.assignments[static_cast<std::size_t>(q)])
            w.row(ds.locations[static_cast<std::size_t>(g)].id, q);
}

inline Partition load_partition(const std::string& path, const Dataset& ds) {
    csv::Table t = csv::read_file(path);
    int c_id = t.column("location_id");
    int c_q = t.column("subset_index");
    if (c_id < 0 || c_q < 0) throw std::runtime_error(path + ": missing partition columns");
    std::map<std::string, int> loc_index;
    for (int i = 0; i < ds.S(); ++i) loc_index[ds.locations[static_cast<std::size_t>(i)].id] = i;
    Partition p;
    for (const auto& row : t.rows) {
        auto it = loc_index.find(row[static_cast<std::size_t>(c_id)]);
        if (it == loc_index.end())
            throw std::runtime_error(path + ": unknown location id " +
                                     row[static_cast<std::size_t>(c_id)]);
        int q = static_cast<int>(csv::parse_long(row[static_cast<std::size_t>(c_q)], path));
        if (q < 0) throw std::runtime_error(path + ": negative subset index");
        if (q >= static_cast<int>(p.assignments.size()))
            p.assignments.resize(static_cast<std::size_t>(q) + 1);
        p.assignments[static_cast<std::size_t>(q)].push_back(it->second);
    }
    return p;
}

inline void save_chain(const Chain& chain, const std::string& path) {
    csv::Writer w(path);
    std::string header;
    for (std::size_t j = 0; j < chain.names.size(); ++j)
        header += (j ? "," : "") + chain.names[j];
    w.row(header);
    for (int i = 0; i < chain.L(); ++i) {
        std::ostringstream line;
        line.precision(17);
        for (int j = 0; j < chain.draws.cols(); ++j) line << (j ? "," : "") << chain.draws(i, j);
        w.row(line.str());
    }
}

inline void save_v_mean(const Chain& chain, const DesignBundle& design, const Dataset& ds,
                        const std::string& path) {
    csv::Writer w(path);
    w.row("location_id,time_index,v_mean");
    for (int l = 0; l < design.m_q(); ++l) {
        const std::string& id =
            ds.locations[static_cast<std::size_t>(design.subset_locs[static_cast<std::size_t>(l)])].id;
        for (int t = 0; t < design.T; ++t)
            w.row(id, t, chain.v_mean(static_cast<Eigen::Index>(l) * design.T + t));
    }
}

inline void save_matrix_csv(const Matrix& m, const std::vector<std::string>& names,
                            const std::string& path) {
    csv::Writer w(path);
    std::string header;
    for (std::size_t j = 0; j < names.size(); ++j) header += (j ? "," : "") + names[j];
    w.row(header);
    for (int i = 0; i < m.rows(); ++i) {
        std::ostringstream line;
        line.precision(17);
        for (int j = 0; j < m.cols(); ++j) line << (j ? "," : "") << m(i, j);
        w.row(line.str());
    }
}

inline void save_summary(const std::vector<SummaryRow>& rows, const std::string& path) {
    csv::Writer w(path);
    w.row("parameter,mean,q2.5,q97.5");
    for (const auto& r : rows) {
        std::ostringstream line;
        line.precision(17);
        line << r.name << ',' << r.mean << ',' << r.q025 << ',' << r.q975;
        w.row(line.str());
    }
}

inline void save_v_hat(const Vector& v, const Dataset& ds, const std::string& path) {
    csv::Writer w(path);
    w.row("location_id,time_index,v_hat");
    for (int i = 0; i < ds.S(); ++i)
        for (int t = 0; t < ds.T; ++t)
            w.row(ds.locations[static_cast<std::size_t>(i)].id, t,
                  v(static_cast<Eigen::Index>(i) * ds.T + t));
}

inline Vector load_v_hat(const std::string& path, const Dataset& ds) {
    csv::Table t = csv::read_file(path);
    int c_id = t.column("location_id");
    int c_t = t.column("time_index");
    int c_v = t.column("v_hat");
    if (c_id < 0 || c_t < 0 || c_v < 0) throw std::runtime_error(path + ": missing v_hat columns");
    std::map<std::string, int> loc_index;
    for (int i = 0; i < ds.S(); ++i) loc_index[ds.locations[static_cast<std::size_t>(i)].id] = i;
    Vector v = Vector::Zero(static_cast<Eigen::Index>(ds.S()) * ds.T);
    for (const auto& row : t.rows) {
        auto it = loc_index.find(row[static_cast<std::size_t>(c_id)]);
        if (it == loc_index.end()) continue;  // v_hat may cover more locations than this dataset
        long tt = csv::parse_long(row[static_cast<std::size_t>(c_t)], path);
        if (tt < 0 || tt >= ds.T) continue;
        v(static_cast<Eigen::Index>(it->second) * ds.T + tt) =
            csv::parse_double(row[static_cast<std::size_t>(c_v)], path);
    }
    return v;
}

inline void save_keyvalue(const std::vector<std::pair<std::string, std::string>>& kv,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [k, v] : kv) out << k << " " << v << '\n';
}

inline std::map<std::string, std::string> load_keyvalue(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto sp = line.find(' ');
        if (sp == std::string::npos) continue;
        kv[line.substr(0, sp)] = line.substr(sp + 1);
    }
    return kv;
}

// Rebuild a fitted model from the files cmd_fit wrote: partition, per-subset
// chains and latent means, plus the grids/variant recorded in fit_meta.
inline DnCFit load_fit(const std::string& dir, const Dataset& train_ds) {
    auto meta = load_keyvalue(dir + "/fit_meta.txt");
    auto parse_grid = [](const std::string& s) {
        std::vector<double> g;
        std::istringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) g.push_back(std::stod(tok));
        return g;
    };
    DnCFit fit;
    fit.partition = load_partition(dir + "/partition.csv", train_ds);
    fit.tables = build_grid_tables(train_ds, fit.partition, parse_grid(meta.at("phi_s_grid")),
                                   parse_grid(meta.at("phi_t_grid")));
    const int Q = fit.partition.Q();
    for (int q = 0; q < Q; ++q) {
        SubsetFit sf;
        sf.subset_index = q;
        sf.design = build_design(train_ds, fit.partition.assignments[static_cast<std::size_t>(q)]);
        sf.p = static_cast<double>(train_ds.N()) / sf.design.N_q();

        csv::Table t = csv::read_file(dir + "/chain_" + std::to_string(q) + ".csv");
        sf.chain.names = t.header;
        sf.chain.draws.resize(static_cast<Eigen::Index>(t.rows.size()),
                              static_cast<Eigen::Index>(t.header.size()));
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            for (std::size_t j = 0; j < t.header.size(); ++j)
                sf.chain.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    csv::parse_double(t.rows[i][j], "chain csv");

        csv::Table vt = csv::read_file(dir + "/v_mean_" + std::to_string(q) + ".csv");
        int c_id = vt.column("location_id"), c_t = vt.column("time_index"),
            c_v = vt.column("v_mean");
        std::map<std::string, int> local;
        for (std::size_t l = 0; l < sf.design.subset_locs.size(); ++l)
            local[train_ds.locations[static_cast<std::size_t>(sf.design.subset_locs[l])].id] =
                static_cast<int>(l);
        sf.chain.v_mean = Vector::Zero(sf.design.G_q());
        for (const auto& row : vt.rows) {
            int l = local.at(row[static_cast<std::size_t>(c_id)]);
            long tt = csv::parse_long(row[static_cast<std::size_t>(c_t)], "v_mean csv");
            sf.chain.v_mean(static_cast<Eigen::Index>(l) * sf.design.T + tt) =
                csv::parse_double(row[static_cast<std::size_t>(c_v)], "v_mean csv");
        }
        detail::chain_moments(sf);
        fit.fits.push_back(std::move(sf));
    }
    return fit;
}

}  // namespace stbd
