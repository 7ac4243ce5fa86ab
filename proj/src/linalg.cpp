#include "tftsim/linalg.hpp"

#include "tftsim/errors.hpp"

#include <lapacke.h>

#include <string>
#include <vector>

namespace tft {

EigenPairs eigh(const Eigen::MatrixXd& a)
{
    const lapack_int n = static_cast<lapack_int>(a.rows());
    EigenPairs out;
    out.vectors = a;
    out.values.resize(n);
    if (n == 0)
        return out;
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n,
                                     out.values.data());
    if (info != 0)
        throw NumericError("dsyevd failed with info=" + std::to_string(info));
    return out;
}

EigenPairs eigh_lowest(const Eigen::MatrixXd& a, int count)
{
    const lapack_int n = static_cast<lapack_int>(a.rows());
    if (count >= n)
        return eigh(a);
    Eigen::MatrixXd work = a;
    Eigen::VectorXd w(n);
    EigenPairs out;
    out.vectors.resize(n, count);
    std::vector<lapack_int> isuppz(2 * static_cast<size_t>(count));
    lapack_int found = 0;
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, work.data(), n, 0.0, 0.0, 1,
                                     count, 0.0, &found, w.data(), out.vectors.data(), n,
                                     isuppz.data());
    if (info != 0 || found != count)
        throw NumericError("dsyevr failed with info=" + std::to_string(info));
    out.values = w.head(count);
    return out;
}

Eigen::VectorXd eigvalsh(const Eigen::MatrixXd& a)
{
    const lapack_int n = static_cast<lapack_int>(a.rows());
    Eigen::MatrixXd work = a;
    Eigen::VectorXd w(n);
    if (n == 0)
        return w;
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, work.data(), n, w.data());
    if (info != 0)
        throw NumericError("dsyevd failed with info=" + std::to_string(info));
    return w;
}

EigenPairs eigh_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, int count)
{
    const lapack_int n = static_cast<lapack_int>(diag.size());
    if (offdiag.size() != n - 1)
        throw NumericError("tridiagonal: off-diagonal length mismatch");
    Eigen::VectorXd d = diag;
    Eigen::VectorXd e(n);
    e.head(n - 1) = offdiag;
    e(n - 1) = 0.0;
    Eigen::VectorXd w(n);
    EigenPairs out;
    out.vectors.resize(n, count);
    std::vector<lapack_int> isuppz(2 * static_cast<size_t>(count));
    lapack_int found = 0;
    lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0, 0.0, 1,
                                     count, 0.0, &found, w.data(), out.vectors.data(), n,
                                     isuppz.data());
    if (info != 0 || found != count)
        throw NumericError("dstevr failed with info=" + std::to_string(info));
    out.values = w.head(count);
    return out;
}

void fix_column_signs(Eigen::MatrixXd& v)
{
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index imax = 0;
        v.col(j).cwiseAbs().maxCoeff(&imax);
        if (v(imax, j) < 0.0)
            v.col(j) *= -1.0;
    }
}

} // namespace tft
