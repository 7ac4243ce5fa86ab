#pragma once

#include <Eigen/Dense>

namespace tft {

struct EigenPairs {
    Eigen::VectorXd values;  // ascending
    Eigen::MatrixXd vectors; // columns
};

// All eigenpairs of a real symmetric matrix (lower triangle is read).
EigenPairs eigh(const Eigen::MatrixXd& a);

// The `count` lowest eigenpairs of a real symmetric matrix.
EigenPairs eigh_lowest(const Eigen::MatrixXd& a, int count);

Eigen::VectorXd eigvalsh(const Eigen::MatrixXd& a);

// Lowest `count` eigenpairs of the symmetric tridiagonal matrix given by its
// diagonal and sub-diagonal.
EigenPairs eigh_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, int count);

// Flip each column's sign so that its largest-magnitude entry is positive.
void fix_column_signs(Eigen::MatrixXd& v);

} // namespace tft
