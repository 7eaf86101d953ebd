"""
Closed forms of the enhancement for linear (m=2) and quadratic (m=3) splines.

These are evaluated independently of the generic pipeline and serve as
oracles for it. Knot differences are taken around the 0-based knot index ell.
"""

import numpy as np

from bspline import basis_row
from errors import MultipleKnot, WrongOrder
from gram_dual import kernel_K_eval


def _require_order(kv, m):
    if kv.order != m:
        raise WrongOrder(f"closed form needs order {m}, knot vector has order {kv.order}")


def kappa_m2(kv, ell):
    """kappa_l = (t_l - t_{l-1})^2 (t_{l+1} - t_l)^2 / (18 (t_{l+1} - t_{l-1}))"""
    _require_order(kv, 2)
    t = kv.knots
    left, right = t[ell] - t[ell - 1], t[ell + 1] - t[ell]
    return left ** 2 * right ** 2 / (18.0 * (left + right))


def z_matrix_m2(kv):
    """Lower triangular Z of shape n x (n-2) with I - Gamma S = Z D_3 D_2"""
    _require_order(kv, 2)
    t, n = kv.array, kv.n
    Z = np.zeros((n, n - 2))
    for j in range(n - 2):
        p, q = t[j + 2] - t[j + 1], t[j + 3] - t[j + 2]
        Z[j, j] = p * q ** 2 / (18.0 * (p + q))
        Z[j + 1, j] = -p * q / 18.0
        Z[j + 2, j] = p ** 2 * q / (18.0 * (p + q))
    return Z


def closed_form_m2(kv, ell):
    """(kappa_l, Z) for order 2"""
    return kappa_m2(kv, ell), z_matrix_m2(kv)


def s_matrix_m2(kv):
    """
    Approximate-dual matrix for order 2 from its explicit entries.

    s_jj = 2/(t_{j+2}-t_j) + 2(alpha_{j-1}+alpha_j)/(t_{j+2}-t_j)^2 and
    s_{j,j+1} = -2 alpha_j / ((t_{j+2}-t_j)(t_{j+3}-t_{j+1})), with
    alpha_j = (t_{j+2}-t_{j+1})^2 / (t_{j+3}-t_j) and alpha outside 0..n-2 zero.
    """
    _require_order(kv, 2)
    t, n = kv.array, kv.n
    alpha = np.zeros(n + 1)
    for j in range(n - 1):
        alpha[j + 1] = (t[j + 2] - t[j + 1]) ** 2 / (t[j + 3] - t[j])
    S = np.zeros((n, n))
    for j in range(n):
        width = t[j + 2] - t[j]
        S[j, j] = 2.0 / width + 2.0 * (alpha[j] + alpha[j + 1]) / width ** 2
    for j in range(n - 1):
        beta = -2.0 * alpha[j + 1] / ((t[j + 2] - t[j]) * (t[j + 3] - t[j + 1]))
        S[j, j + 1] = S[j + 1, j] = beta
    return S


def gram_matrix_m2(kv):
    """gamma_jj = (t_{j+2}-t_j)/3, gamma_{j,j+1} = (t_{j+2}-t_{j+1})/6"""
    _require_order(kv, 2)
    t, n = kv.array, kv.n
    G = np.diag((t[2:n + 2] - t[:n]) / 3.0)
    off = (t[2:n + 1] - t[1:n]) / 6.0
    return G + np.diag(off, 1) + np.diag(off, -1)


def closed_form_m3(kv, ell):
    """
    (mu_l, kappa_l, nu_l) of w_l = mu_l e_{l-4} + kappa_l e_{l-3} + nu_l e_{l-2} (1-based positions)
    for order 3 and a simple interior knot.

    (a, b, c, d, e, f) are the six consecutive knot differences around the knot.
    """
    _require_order(kv, 3)
    if kv.multiplicity(ell) != 1:
        raise MultipleKnot(f"order-3 closed form covers simple knots only, knot {ell} is multiple")
    t = kv.knots
    a, b, c, d, e, f = (t[ell + s + 1] - t[ell + s] for s in range(-3, 3))
    mu = (b ** 2 * (a + b + c) ** 2 + a * (a + b) * (b + c) * c) * d ** 4 / (
        600.0 * (a + b + c + d) * (b + c + d) * (c + d))
    nu = (e ** 2 * (d + e + f) ** 2 + f * (e + f) * (d + e) * d) * c ** 4 / (
        600.0 * (c + d + e + f) * (c + d + e) * (c + d))
    return mu, kappa_m3(b, c, d, e), nu


def kappa_m3(b, c, d, e):
    """Middle coefficient of the order-3 closed form; numerator homogeneous of degree 9"""
    numerator = (
        c ** 2 * (b + c) * (c + d) * (d + e) ** 3 * (b + c + d) ** 2
        + c ** 2 * d ** 3 * (b + c) * (c + d + e) * (b + c + d + e) ** 2
        + c ** 2 * d * (b + c) * (d + e) ** 2 * (b + c + d) ** 2 * (c + d + e)
        + c ** 2 * d ** 2 * (b + c) * (c + d) * (d + e) * (b + c + d + e) ** 2
        + b * c ** 2 * d ** 2 * (d + e) ** 2 * (b + c + d) * (b + c + d + e)
        + b * d ** 2 * (b + c) ** 2 * (c + d) * (d + e) ** 2 * (c + d + e)
        + b ** 2 * c * d ** 2 * (d + e) ** 3 * (b + c + d)
        + b ** 2 * c * d ** 3 * (d + e) ** 2 * (b + c + d + e)
    )
    return numerator / (600.0 * (b + c + d) * (b + c + d + e) * (c + d) * (c + d + e))


def w_row_m3(kv, ell):
    """Order-3 B row of a simple knot, placed at 0-based positions ell-4, ell-3, ell-2"""
    mu, kappa, nu = closed_form_m3(kv, ell)
    row = np.zeros(kv.n - 3)
    for pos, value in zip((ell - 4, ell - 3, ell - 2), (mu, kappa, nu)):
        if 0 <= pos < row.size:
            row[pos] = value
    return row


def kernel_L_m2_separated(ad, sel, x, y):
    """
    Kernel L for order 2 and simple selected knots at least two indices apart:

        L(x, y) = K(x, y) + sum_j kappa_j / N_{4,l_j-2}(t_{l_j}) N''_{4,l_j-2}(x) N''_{4,l_j-2}(y)
    """
    kv = ad.kv
    _require_order(kv, 2)
    total = kernel_K_eval(ad, x, y)
    for ell in sel.indices:
        k = ell - 2
        value = basis_row(kv, 4, kv.knots[ell])[k]
        dx = basis_row(kv, 4, x, 2)[k]
        dy = basis_row(kv, 4, y, 2)[k]
        total += kappa_m2(kv, ell) / value * dx * dy
    return total
