"""Pure-numpy twin of the compiled ADMM iteration kernel.

Operator-splitting iterations for
    minimize 1/2 x'Px + q'x  subject to  l <= Cx <= u
given a precomputed dense inverse of M = P + sigma*I + rho*C'C.

Same update order as _qp_cy.pyx; the two backends agree to solver tolerance
(BLAS summation order differs, so agreement is not bitwise here).
"""

import numpy as np


def admm_iterate(Minv, P, C, q, l, u, x, z, y, sigma, rho, alpha,
                 max_iter, check_every, eps_abs, eps_rel):
    """Run ADMM updates in place on x, z, y.

    Returns (iterations_used, primal_residual, dual_residual); residuals are
    the last computed infinity norms.
    """
    Ct = C.T
    pri = np.inf
    dua = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rhs = sigma * x - q + Ct @ (rho * z - y)
        xt = Minv @ rhs
        zt = C @ xt
        x_new = alpha * xt + (1.0 - alpha) * x
        v = alpha * zt + (1.0 - alpha) * z + y / rho
        z_new = np.clip(v, l, u)
        y += rho * (alpha * zt + (1.0 - alpha) * z - z_new)
        x[:] = x_new
        z[:] = z_new
        if it % check_every == 0 or it == max_iter:
            cx = C @ x
            px = P @ x
            cty = Ct @ y
            pri = float(np.max(np.abs(cx - z))) if z.size else 0.0
            dua = float(np.max(np.abs(px + q + cty)))
            eps_pri = eps_abs + eps_rel * max(
                float(np.max(np.abs(cx))) if cx.size else 0.0,
                float(np.max(np.abs(z))) if z.size else 0.0)
            eps_dua = eps_abs + eps_rel * max(
                float(np.max(np.abs(px))),
                float(np.max(np.abs(cty))),
                float(np.max(np.abs(q))))
            if pri <= eps_pri and dua <= eps_dua:
                break
    return it, pri, dua
