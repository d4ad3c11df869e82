"""Oseen tensor (Stokeslet) algebra: evaluation, gradient, near/far splitting,
and L^p norms of kernel translation increments.

The fundamental tensor of the steady Stokes operator in three dimensions is

    E(x) = 1/(8 pi |x|) * (Id + x ox x / |x|^2),

homogeneous of degree -1, symmetric, even.  A blob parameter eps > 0 replaces
|x| by sqrt(|x|^2 + eps^2) in both the prefactor and the dyadic part, which
keeps E bounded at the origin (E_eps(0) = Id/(8 pi eps)).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

EIGHT_PI = 8.0 * np.pi


def _as_points(x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError("expected shape (3,) or (n, 3), got %r" % (x.shape,))
    return x, single


def oseen_eval(x, eps=0.0):
    """Evaluate the (regularized) Oseen tensor at one or many points.

    Returns (3, 3) for a single point, (n, 3, 3) for a batch.  eps = 0 gives
    the singular tensor and rejects evaluation at the origin.
    """
    pts, single = _as_points(x)
    r2 = np.einsum("ni,ni->n", pts, pts) + eps * eps
    if np.any(r2 == 0.0):
        raise ValueError("singular kernel evaluated at the origin with eps = 0")
    rinv = 1.0 / np.sqrt(r2)
    out = np.einsum("ni,nj->nij", pts, pts) * (rinv ** 3)[:, None, None]
    out[:, 0, 0] += rinv
    out[:, 1, 1] += rinv
    out[:, 2, 2] += rinv
    out /= EIGHT_PI
    return out[0] if single else out


def oseen_grad(x, eps=0.0):
    """Gradient of the Oseen tensor, G[..., i, j, k] = d_k E_ij.

    Closed form (regularized radius rho = sqrt(|x|^2 + eps^2)):

        8 pi d_k E_ij = -delta_ij x_k / rho^3
                        + (delta_ik x_j + delta_jk x_i) / rho^3
                        - 3 x_i x_j x_k / rho^5

    Homogeneous of degree -2 and odd when eps = 0.
    """
    pts, single = _as_points(x)
    r2 = np.einsum("ni,ni->n", pts, pts) + eps * eps
    if np.any(r2 == 0.0):
        raise ValueError("singular gradient evaluated at the origin with eps = 0")
    ri3 = r2 ** -1.5
    ri5 = r2 ** -2.5
    n = pts.shape[0]
    eye = np.eye(3)
    g = np.zeros((n, 3, 3, 3))
    g += np.einsum("ij,nk->nijk", eye, pts)[...] * (-ri3)[:, None, None, None]
    g += np.einsum("ik,nj->nijk", eye, pts) * ri3[:, None, None, None]
    g += np.einsum("jk,ni->nijk", eye, pts) * ri3[:, None, None, None]
    g += np.einsum("ni,nj,nk->nijk", pts, pts, pts) * (-3.0 * ri5)[:, None, None, None]
    g /= EIGHT_PI
    return g[0] if single else g


# ---------------------------------------------------------------------------
# Quintic cutoff and the near/far kernel splitting


def cutoff_profile(s):
    """C^2 radial cutoff: 1 on [0, 1], quintic smoothstep down to 0 on [1, 2].

    The transition is 1 - (6 t^5 - 15 t^4 + 10 t^3) with t = s - 1, so first
    and second derivatives vanish at both junctions.
    """
    s = np.asarray(s, dtype=np.float64)
    t = np.clip(s - 1.0, 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def kernel_split(x, cutoff_radius=1.0, eps=0.0):
    """Split E = E_near + E_far with the quintic cutoff at scale cutoff_radius.

    E_near = E * eta(|x|/a) keeps the integrable singularity on a compact set
    (so it lies in L^p for every p in [1, 3)); E_far = E * (1 - eta(|x|/a)) is
    bounded by sup_{|x| >= a} |E|.  The two summands add back to E exactly.
    """
    pts, single = _as_points(x)
    full = oseen_eval(pts, eps=eps)
    r = np.sqrt(np.einsum("ni,ni->n", pts, pts))
    eta = cutoff_profile(r / cutoff_radius)
    near = full * eta[:, None, None]
    far = full - near
    if single:
        return near[0], far[0]
    return near, far


# ---------------------------------------------------------------------------
# L^p norm of the translation increment tau_h E - E
#
# By rotation invariance the norm depends on |h| only, so h is aligned with
# e3.  The point symmetry x -> -x - h swaps the two singularities and leaves
# the integrand invariant, hence it suffices to integrate over the half space
# x3 > -|h|/2 (which contains only the singularity at 0) and double.  In
# spherical coordinates about the origin,
#
#   I = 4 pi int_0^pi sin(phi) int_0^{R(phi)} D(r, phi)^p r^2 dr dphi,
#
# with D the Frobenius norm of the increment and R(phi) the exit radius of
# the half space along direction phi.


def _frob_increment(r, phi, c):
    # x = r (sin phi, 0, cos phi), shifted point x + (0, 0, c)
    sp, cp = np.sin(phi), np.cos(phi)
    x = np.empty((r.size, 3))
    x[:, 0] = r * sp
    x[:, 1] = 0.0
    x[:, 2] = r * cp
    xh = x.copy()
    xh[:, 2] += c
    diff = oseen_eval(xh) - oseen_eval(x)
    return np.sqrt(np.einsum("nij,nij->n", diff, diff))


def _gauss_patches(edges, order):
    """Gauss-Legendre nodes/weights on a sequence of abutting intervals."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    a = edges[:-1]
    b = edges[1:]
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    nodes = (mid + half * gx[None, :]).ravel()
    weights = (half * gw[None, :]).ravel()
    return nodes, weights


def _radial_integral(phi, c, p, depth, order):
    """int_0^{R(phi)} D^p r^2 dr for one polar angle, with geometric patch
    refinement into the r = 0 singularity and a power-law stub below the
    innermost patch (D ~ 1/r there, so the integrand is ~ r^(2-p))."""
    cp = np.cos(phi)
    r_exit = np.inf if cp >= 0.0 else c / (-2.0 * cp)

    a = min(0.5 * c, r_exit)
    edges = a * 2.0 ** -np.arange(depth, -1, -1.0)
    nodes = [edges]
    total = 0.0

    # mid segment [a, min(3c, R)] and, for finite exit, [.., R]
    b = min(3.0 * c, r_exit)
    seg_edges = [np.linspace(a, b, 7)]
    if r_exit < np.inf and r_exit > b:
        seg_edges.append(np.linspace(b, r_exit, 5))

    all_nodes = []
    all_weights = []
    n0, w0 = _gauss_patches(edges, order)
    all_nodes.append(n0)
    all_weights.append(w0)
    for se in seg_edges:
        n1, w1 = _gauss_patches(se, order)
        all_nodes.append(n1)
        all_weights.append(w1)

    r = np.concatenate(all_nodes)
    w = np.concatenate(all_weights)
    integrand = _frob_increment(r, phi, c) ** p * r * r
    total += float(np.dot(integrand, w))

    # stub below the innermost patch: D ~ D(r0) r0 / r
    r0 = edges[0]
    d0 = float(_frob_increment(np.array([r0]), phi, c)[0])
    total += d0 ** p * r0 ** 3 / (3.0 - p)

    if r_exit == np.inf:
        # far tail via u = 1/r; integrand ~ u^(2p-4), integrable for p > 3/2
        u_hi = 1.0 / b
        u_edges = u_hi * 2.0 ** -np.arange(depth, -1, -1.0)
        un, uw = _gauss_patches(u_edges, order)
        ru = 1.0 / un
        g = _frob_increment(ru, phi, c) ** p * un ** -4
        total += float(np.dot(g, uw))
        u0 = u_edges[0]
        g0 = float(_frob_increment(np.array([1.0 / u0]), phi, c)[0]) ** p * u0 ** (-4.0)
        total += g0 * u0 / (2.0 * p - 3.0)
    return total


def translation_lp_norm(h, p, tol=1e-4):
    """|| E(. + h) - E ||_{L^p(R^3)} with a quadrature error estimate.

    Valid for p in (3/2, 3), where the increment is integrable both at the
    singularities and at infinity.  Returns (value, err_estimate); the
    estimate compares two refinement levels of the radial rule and includes
    the reported error of the outer angular quadrature.

    The exact scaling value = const(p) * |h|^(3/p - 1) follows from the
    degree -1 homogeneity of the kernel.
    """
    h = np.asarray(h, dtype=np.float64)
    c = float(np.linalg.norm(h)) if h.ndim else float(abs(h))
    if c == 0.0:
        return 0.0, 0.0
    if not (1.5 < p < 3.0):
        raise ValueError("translation increment is in L^p only for p in (3/2, 3)")

    results = []
    for depth, order in ((12, 16), (18, 24)):
        val, err = quad(
            lambda phi: np.sin(phi) * _radial_integral(phi, c, p, depth, order),
            0.0,
            np.pi,
            points=[0.5 * np.pi],
            limit=200,
            epsabs=tol / (8.0 * np.pi),
            epsrel=1e-9,
        )
        results.append((4.0 * np.pi * val, 4.0 * np.pi * err))
    ip_coarse = results[0][0]
    ip, outer_err = results[1]
    norm = ip ** (1.0 / p)
    dip = abs(ip - ip_coarse) + outer_err
    err_est = norm / p * dip / ip if ip > 0.0 else 0.0
    return norm, err_est
