#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace stbd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct CholResult {
    Matrix L;
    double jitter = 0.0;  // amount added to the diagonal, 0 if none needed
};

// Cholesky with escalating relative jitter: start at 1e-8 * mean(diag),
// escalate by 10x up to 1e-4 * mean(diag), then give up.
inline CholResult chol_psd(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("chol_psd: matrix not square");
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

    double scale = M.diagonal().mean();
    if (scale <= 0.0) scale = 1.0;
    for (double rel = 1e-8; rel <= 1e-4 * 1.0000001; rel *= 10.0) {
        double jitter = rel * scale;
        Matrix Mj = M;
        Mj.diagonal().array() += jitter;
        llt.compute(Mj);
        if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
    throw std::runtime_error("chol_psd: matrix not positive definite after max jitter");
}

inline double logdet_psd(const Matrix& M) {
    CholResult c = chol_psd(M);
    return 2.0 * c.L.diagonal().array().log().sum();
}

// (A^{-1} (x) B^{-1}) x without forming the Kronecker product.  x is stacked
// by columns of a rows(B) x rows(A) matrix (each A-index owns a contiguous
// B-length block).
inline Vector kron_pair_solve(const Matrix& A_inv, const Matrix& B_inv, const Vector& x) {
    const auto na = A_inv.rows();
    const auto nb = B_inv.rows();
    if (x.size() != na * nb) throw std::invalid_argument("kron_pair_solve: dimension mismatch");
    Eigen::Map<const Matrix> X(x.data(), nb, na);
    Matrix R = B_inv * X * A_inv.transpose();
    return Eigen::Map<Vector>(R.data(), na * nb);
}

// Diagonal blocks of M^{-1} without materializing the full inverse.
// At each step the current matrix covers blocks 1..q; the trailing block of
// its inverse is (D - B^T L^{-1} B)^{-1}, and blocks 1..q-1 of the inverse
// equal the diagonal blocks of (L - B D^{-1} B^T)^{-1}, so the recursion
// continues on that Schur-updated leading part.
inline std::vector<Matrix> block_diag_of_inverse(const Matrix& M,
                                                 const std::vector<int>& block_sizes) {
    int total = 0;
    for (int b : block_sizes) {
        if (b <= 0) throw std::invalid_argument("block_diag_of_inverse: nonpositive block size");
        total += b;
    }
    if (total != M.rows() || M.rows() != M.cols())
        throw std::invalid_argument("block_diag_of_inverse: block sizes do not sum to dimension");

    std::vector<Matrix> out(block_sizes.size());
    Matrix cur = M;
    for (int q = static_cast<int>(block_sizes.size()) - 1; q >= 1; --q) {
        const int d = block_sizes[static_cast<std::size_t>(q)];
        const int n = static_cast<int>(cur.rows());
        const int lead = n - d;
        Matrix L = cur.topLeftCorner(lead, lead);
        Matrix B = cur.topRightCorner(lead, d);
        Matrix D = cur.bottomRightCorner(d, d);

        CholResult cl = chol_psd(L);
        Matrix LinvB = cl.L.transpose().triangularView<Eigen::Upper>().solve(
            Matrix(cl.L.triangularView<Eigen::Lower>().solve(B)));
        Matrix schur = D - B.transpose() * LinvB;
        schur = 0.5 * (schur + schur.transpose());
        CholResult cs = chol_psd(schur);
        out[static_cast<std::size_t>(q)] = cs.L.transpose().triangularView<Eigen::Upper>().solve(
            Matrix(cs.L.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d))));

        CholResult cd = chol_psd(D);
        Matrix DinvBt = cd.L.transpose().triangularView<Eigen::Upper>().solve(
            Matrix(cd.L.triangularView<Eigen::Lower>().solve(Matrix(B.transpose()))));
        cur = L - B * DinvBt;
        cur = 0.5 * (cur + cur.transpose());
    }
    {
        const int d = block_sizes[0];
        CholResult c0 = chol_psd(cur);
        out[0] = c0.L.transpose().triangularView<Eigen::Upper>().solve(
            Matrix(c0.L.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d))));
    }
    return out;
}

// Symmetric principal square root, eigenvalues clipped at zero.
inline Matrix matrix_sqrt_psd(const Matrix& S) {
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + S.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("matrix_sqrt_psd: asymmetric input");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    Vector ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

struct ConditionalGaussian {
    Vector mean;
    Matrix cov;
};

// Conditional of block 1 given block 2 = z2 for a joint zero-mean Gaussian
// with blocks (S11, S12; S21, S22).  S22_inv is supplied by the caller.
inline ConditionalGaussian conditional_gaussian(const Matrix& S11, const Matrix& S12,
                                                const Matrix& S22_inv, const Vector& z2) {
    if (S12.cols() != S22_inv.rows() || S22_inv.cols() != z2.size() || S11.rows() != S12.rows())
        throw std::invalid_argument("conditional_gaussian: dimension mismatch");
    Matrix W = S12 * S22_inv;
    return {W * z2, S11 - W * S12.transpose()};
}

}  // namespace stbd
