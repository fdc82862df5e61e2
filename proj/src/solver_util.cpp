#include "crossch/solver_util.hpp"

namespace crossch {

PcgResult pcg(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
              const std::vector<double>& b, const std::vector<double>& diag,
              std::vector<double>& x, double tol, int max_iter) {
    const std::size_t m = b.size();
    PcgResult res;
    const double bnorm = norm2(b);
    x.assign(m, 0.0);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    std::vector<double> r = b;  // r = b - A*0
    std::vector<double> z(m), p(m), Ap(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot(r, z);

    for (int k = 0; k < max_iter; ++k) {
        apply(p, Ap);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0) break;  // loss of positive definiteness in finite precision
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < m; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        res.iterations = k + 1;
        const double rel = norm2(r) / bnorm;
        if (rel <= tol) {
            res.converged = true;
            res.rel_residual = rel;
            return res;
        }
        for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / diag[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
    }
    res.rel_residual = norm2(r) / bnorm;
    return res;
}

}  // namespace crossch
