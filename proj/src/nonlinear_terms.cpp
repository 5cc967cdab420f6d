#include "chbctl/nonlinear.hpp"

#include "chbctl/errors.hpp"

namespace chb {

NonlinearTerms eval_nonlinear(const Grid& grid, const OperatorSet& ops, std::span<const double> w,
                              std::span<const double> psi, double phibar) {
    const std::size_t ni = grid.interior_count();
    const std::size_t nn = grid.node_count();
    if (w.size() != ni || psi.size() != nn) throw ContractViolation("eval_nonlinear: fields do not match the grid");

    const std::vector<double> wx = ops.d1_dir.apply(w);
    const std::vector<double> px = ops.d1_neu.apply(psi);
    const std::vector<double> pxx = ops.d2_neu.apply(psi);
    const double b = phibar;

    NonlinearTerms out{std::vector<double>(ni), std::vector<double>(nn)};
    for (std::size_t r = 0; r < ni; ++r) {
        const std::size_t i = r + 1;
        const double p = psi[i];
        const double p1 = px[i];
        out.n1[r] = -w[r] * wx[r] - p1 * pxx[i] + 4.0 * p * p * p * p1 + 12.0 * b * p * p * p1 +
                    12.0 * b * b * p * p1 - 4.0 * p * p1;
    }
    for (std::size_t i = 0; i < nn; ++i) {
        const double u = (i == 0 || i + 1 == nn) ? 0.0 : w[i - 1];
        const double p = psi[i];
        const double p1 = px[i];
        const double p2 = pxx[i];
        out.n2[i] = -u * p1 + 12.0 * p * p * p2 + 24.0 * b * p * p2 + 24.0 * p * p1 * p1 + 24.0 * b * p1 * p1;
    }
    return out;
}

}  // namespace chb
