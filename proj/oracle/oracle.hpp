#pragma once

// Dense reference implementations used to check the sparse, local-form code.
// Everything here is built from first principles (index sets, dense products,
// LU with partial pivoting) and deliberately shares no arithmetic with the
// library beyond reading its inputs.

#include <Eigen/Dense>
#include <cstddef>
#include <set>
#include <vector>

#include "asyncdd/decomp.hpp"
#include "asyncdd/linalg.hpp"

namespace asyncdd::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd dense(const CsrMatrix& a);
VectorXd to_eigen(const std::vector<double>& v);

/// R_p built from the sorted extended set.
MatrixXd restriction(const decomp::IndexSet& overlap, std::size_t global_size);
/// D_p: 1 on the local positions of base-set members.
MatrixXd ownership(const decomp::IndexSet& base, const decomp::IndexSet& overlap);
/// D_q^(p): 1 on N_q^(0) \ N_p, identity for q == p.
MatrixXd js_mask(const decomp::SubdomainMap& p, const decomp::SubdomainMap& q);

/// N_p by repeated neighbour closure with std::set.
std::set<std::size_t> closure(const CsrMatrix& a, const decomp::IndexSet& base, std::size_t depth);

/// sum_p R_p^T D_p A_p^{-1} R_p.
MatrixXd ras_preconditioner(const CsrMatrix& a, const std::vector<decomp::SubdomainMap>& maps);
/// R_0^T (R_0 A R_0^T)^{-1} R_0.
MatrixXd coarse_correction(const CsrMatrix& a, const CsrMatrix& r0);

/// u^1..u^iterations of u <- u + M (f - A u), u^0 = 0.
std::vector<VectorXd> richardson(const MatrixXd& a, const VectorXd& f, const MatrixXd& m,
                                 std::size_t iterations);

/// Jacobi-Schwarz in local form: entry [k][p] is w_p^{k+1}, w^0 = 0.
std::vector<std::vector<VectorXd>> js_iterates(const CsrMatrix& a, const std::vector<double>& f,
                                               const std::vector<decomp::SubdomainMap>& maps,
                                               std::size_t iterations);

/// sum_q R_p R_q^T t_q for local vectors t_q.
VectorXd accumulate(const std::vector<decomp::SubdomainMap>& maps, std::size_t p,
                    const std::vector<std::vector<double>>& t, std::size_t global_size);

/// Solution of a x = b by Gaussian elimination with partial pivoting.
VectorXd gaussian_solve(MatrixXd a, VectorXd b);

}  // namespace asyncdd::oracle
