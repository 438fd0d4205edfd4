#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stbd/dataset.hpp"
#include "stbd/geodesic.hpp"
#include "stbd/linalg.hpp"

namespace stbd {

inline Matrix distance_matrix(const std::vector<Location>& locs) {
    const int S = static_cast<int>(locs.size());
    Matrix D = Matrix::Zero(S, S);
    for (int i = 0; i < S; ++i)
        for (int j = i + 1; j < S; ++j) {
            double d = vincenty_km(locs[static_cast<std::size_t>(i)].lat,
                                   locs[static_cast<std::size_t>(i)].lon,
                                   locs[static_cast<std::size_t>(j)].lat,
                                   locs[static_cast<std::size_t>(j)].lon);
            D(i, j) = D(j, i) = d;
        }
    return D;
}

// Temporal lag matrix: |t_u - t_v| on raw month indices.
inline Matrix lag_matrix(int T) {
    Matrix D(T, T);
    for (int u = 0; u < T; ++u)
        for (int v = 0; v < T; ++v) D(u, v) = std::abs(u - v);
    return D;
}

inline Matrix exp_correlation(const Matrix& D, double phi) {
    if (phi <= 0.0) throw std::invalid_argument("exp_correlation: phi must be positive");
    return (-phi * D.array()).exp().matrix();
}

inline std::vector<double> default_phi_s_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 10; ++i) g.push_back(1.0 + 0.2 * i);
    return g;
}

inline std::vector<double> default_phi_t_grid() { return {0.2, 0.4, 0.6, 0.8, 1.0}; }

// Per-subset spatial tables at one phi_s value.
struct SpatialSubsetTable {
    Matrix sigma;            // Sigma_s(q), subset-local correlation block
    Matrix tilde_inv;        // diagonal block of the full Sigma_s^{-1}
    double logdet_sigma;     // log|Sigma_s(q)| (untilded block)
    Matrix tilde_inv_chol;   // lower Cholesky of tilde_inv, for precision draws
};

struct SpatialTable {
    double phi_s;
    std::vector<SpatialSubsetTable> subsets;
};

struct TemporalTable {
    double phi_t;
    Matrix sigma;
    Matrix sigma_inv;
    Matrix sigma_inv_chol;  // lower Cholesky of sigma_inv
    double logdet_sigma;
};

// Everything the sampler needs per (phi_s, phi_t) grid point, computed once.
// Spatial dependence across subsets enters through tilde_inv, the diagonal
// block of the inverse of the full ordered spatial correlation matrix.
struct GridTables {
    std::vector<double> phi_s_grid;
    std::vector<double> phi_t_grid;
    std::vector<SpatialTable> spatial;    // one per phi_s
    std::vector<TemporalTable> temporal;  // one per phi_t
    int T = 0;

    int grid_size() const {
        return static_cast<int>(phi_s_grid.size() * phi_t_grid.size());
    }
    int nearest_phi_s(double phi) const { return nearest(phi_s_grid, phi); }
    int nearest_phi_t(double phi) const { return nearest(phi_t_grid, phi); }

private:
    static int nearest(const std::vector<double>& grid, double v) {
        int best = 0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (std::abs(grid[i] - v) < std::abs(grid[static_cast<std::size_t>(best)] - v))
                best = static_cast<int>(i);
        return best;
    }
};

inline Matrix inverse_spd(const Matrix& M) {
    CholResult c = chol_psd(M);
    return c.L.transpose().triangularView<Eigen::Upper>().solve(
        Matrix(c.L.triangularView<Eigen::Lower>().solve(Matrix::Identity(M.rows(), M.cols()))));
}

inline GridTables build_grid_tables(const Dataset& ds, const Partition& part,
                                    const std::vector<double>& phi_s_grid,
                                    const std::vector<double>& phi_t_grid) {
    if (phi_s_grid.empty() || phi_t_grid.empty())
        throw std::invalid_argument("build_grid_tables: empty grid");

    // locations reordered by subset so subset blocks are contiguous
    std::vector<Location> ordered;
    std::vector<int> block_sizes;
    for (const auto& subset : part.assignments) {
        block_sizes.push_back(static_cast<int>(subset.size()));
        for (int g : subset) ordered.push_back(ds.locations[static_cast<std::size_t>(g)]);
    }
    Matrix D = distance_matrix(ordered);
    Matrix Dt = lag_matrix(ds.T);

    GridTables tables;
    tables.phi_s_grid = phi_s_grid;
    tables.phi_t_grid = phi_t_grid;
    tables.T = ds.T;

    for (double phi_s : phi_s_grid) {
        SpatialTable st;
        st.phi_s = phi_s;
        Matrix sigma_s = exp_correlation(D, phi_s);
        std::vector<Matrix> inv_blocks;
        try {
            inv_blocks = block_diag_of_inverse(sigma_s, block_sizes);
        } catch (const std::exception& e) {
            throw std::runtime_error("build_grid_tables: factorization failed at phi_s=" +
                                     std::to_string(phi_s) + ": " + e.what());
        }
        int offset = 0;
        for (std::size_t q = 0; q < block_sizes.size(); ++q) {
            const int mq = block_sizes[q];
            SpatialSubsetTable sub;
            sub.sigma = sigma_s.block(offset, offset, mq, mq);
            sub.tilde_inv = inv_blocks[q];
            sub.logdet_sigma = logdet_psd(sub.sigma);
            sub.tilde_inv_chol = chol_psd(sub.tilde_inv).L;
            st.subsets.push_back(std::move(sub));
            offset += mq;
        }
        tables.spatial.push_back(std::move(st));
    }

    for (double phi_t : phi_t_grid) {
        TemporalTable tt;
        tt.phi_t = phi_t;
        tt.sigma = exp_correlation(Dt, phi_t);
        try {
            tt.sigma_inv = inverse_spd(tt.sigma);
            tt.logdet_sigma = logdet_psd(tt.sigma);
            tt.sigma_inv_chol = chol_psd(tt.sigma_inv).L;
        } catch (const std::exception& e) {
            throw std::runtime_error("build_grid_tables: factorization failed at phi_t=" +
                                     std::to_string(phi_t) + ": " + e.what());
        }
        tables.temporal.push_back(std::move(tt));
    }
    return tables;
}

}  // namespace stbd
