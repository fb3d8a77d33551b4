"""First-order linear elliptic system with variable coefficients on a rectangle.

The system

    d1(lam1(y2) v1) + d2(lam2(y2) v2) = H1
    d1(lam3(y2) v2) - d2(lam4(y2) v1) = H2

with v1 prescribed on the two vertical sides, v2 = 0 on the bottom and
v2 = h3 on the top, is solvable iff the data satisfy

    int lam1*(h2 - h1) dy2 + int lam2(m_bar)*h3 dy1 = int int H1.

The solve splits the unknown into two potentials: a "hat" part with
d2 phi_hat = lam3 v2, d1 phi_hat = lam4 v1 absorbing H1 and all boundary
data through a Neumann problem (gauge: zero grid mean), and a "check"
part with d2 phi_check = -lam1 v1, d1 phi_check = lam2 v2 absorbing H2
through a homogeneous Dirichlet problem.

Discretisation: node-centred finite volumes (half cells on the boundary)
for the Neumann problem and the classical 5-point stencil for the
Dirichlet one, both in divergence form, second order.  The finite-volume
flux bookkeeping makes the discrete solvability identity hold exactly:
summing the assembled equations telescopes to the trapezoid form of the
compatibility condition, so the defect gate and the assembly can never
disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IncompatibleDataError, InvalidStateError, NonConvergenceError
from .fd import d1 as _d1, d2 as _d2

__all__ = [
    "EllipticProblem",
    "EllipticSolution",
    "SolveOptions",
    "compatibility_defect",
    "solve",
    "solve_scalar",
]

_DIRECT_LIMIT = 500_000  # unknowns above which the iterative fallback kicks in


@dataclass
class EllipticProblem:
    """Rectangle [L1,L2] x [0,m_bar] with n1 x n2 nodes and nodal data.

    lam1..lam4 are positive coefficient arrays on the y2 nodes; H1, H2 are
    (n1, n2) source arrays; h1, h2 are v1-data on the left/right sides
    (arrays on y2), h3 is v2-data on the top (array on y1).  The bottom
    condition v2 = 0 is built in.
    """

    L1: float
    L2: float
    m_bar: float
    n1: int
    n2: int
    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray
    lam4: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray

    def __post_init__(self):
        for name in ("lam1", "lam2", "lam3", "lam4"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.n2,):
                raise InvalidStateError(f"{name} must have shape ({self.n2},)")
            if np.any(arr <= 0.0):
                raise InvalidStateError(f"{name} must be positive (min {arr.min():.3e})")
            setattr(self, name, arr)
        for name in ("H1", "H2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.n1, self.n2):
                raise InvalidStateError(f"{name} must have shape ({self.n1},{self.n2})")
            setattr(self, name, arr)
        self.h1 = np.asarray(self.h1, dtype=float)
        self.h2 = np.asarray(self.h2, dtype=float)
        self.h3 = np.asarray(self.h3, dtype=float)
        if self.h1.shape != (self.n2,) or self.h2.shape != (self.n2,):
            raise InvalidStateError("h1/h2 must be y2-profiles")
        if self.h3.shape != (self.n1,):
            raise InvalidStateError("h3 must be a y1-profile")

    @property
    def y1(self):
        return np.linspace(self.L1, self.L2, self.n1)

    @property
    def y2(self):
        return np.linspace(0.0, self.m_bar, self.n2)

    @property
    def spacing(self):
        return (self.L2 - self.L1) / (self.n1 - 1), self.m_bar / (self.n2 - 1)


@dataclass
class SolveOptions:
    defect_tol: float = 1e-9
    project: bool = False
    method: str = "auto"  # auto | direct | cg
    cg_tol: float = 1e-12
    cg_maxiter: int = 20000


@dataclass
class EllipticSolution:
    v1: np.ndarray
    v2: np.ndarray
    defect: float                 # defect of the data as given
    projected_defect: float       # defect after the optional h2 shift
    h2_shift: float               # constant subtracted from h2 (0 if no projection)
    residuals: tuple              # interior max |eq1|, |eq2|
    corner_residuals: tuple       # same, restricted to corner neighbourhoods
    phi_hat: np.ndarray
    phi_check: np.ndarray
    problem: EllipticProblem = field(repr=False, default=None)


def _trap_w(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def compatibility_defect(p: EllipticProblem) -> float:
    """LHS minus RHS of the solvability condition, trapezoid quadrature.

    The weights are identical to the finite-volume assembly, so a zero
    defect here is exactly discrete solvability of the Neumann problem.
    """
    h1s, h2s = p.spacing
    wy2 = _trap_w(p.n2) * h2s
    wy1 = _trap_w(p.n1) * h1s
    lhs = np.sum(p.lam1 * (p.h2 - p.h1) * wy2) + p.lam2[-1] * np.sum(p.h3 * wy1)
    rhs = float(wy1 @ p.H1 @ wy2)
    return float(lhs - rhs)


def _fv_rhs(rhs, gL, gR, gB, gT, n1, n2, h1, h2):
    """Finite-volume right-hand side with boundary-flux data folded in."""
    wj = _trap_w(n2) * h2
    wi = _trap_w(n1) * h1
    F = -(rhs * wi[:, None] * wj[None, :])
    F[0, :] += -gL * wj
    F[-1, :] += gR * wj
    F[:, 0] += -gB * wi
    F[:, -1] += gT * wi
    return F


def solvability_sum(p: EllipticProblem) -> float:
    """Plain sum of the assembled Neumann right-hand side.

    By the finite-volume flux bookkeeping this telescopes exactly to the
    trapezoid compatibility defect of the data.
    """
    h1s, h2s = p.spacing
    F = _fv_rhs(p.H1, p.lam1 * p.h1, p.lam1 * p.h2, np.zeros(p.n1),
                p.lam2[-1] * p.h3, p.n1, p.n2, h1s, h2s)
    return float(F.sum())


def _face_conductances(a_node, b_node, n1, n2, h1, h2):
    """Horizontal/vertical face conductances for the FV Laplacian."""
    wj = _trap_w(n2)
    wi = _trap_w(n1)
    gh = np.broadcast_to(a_node * wj * h2 / h1, (n1 - 1, n2)).copy()
    bh = 0.5 * (b_node[1:] + b_node[:-1])
    gv = wi[:, None] * bh[None, :] * h1 / h2
    return gh, gv


def _assemble_fv(a_node, b_node, n1, n2, h1, h2):
    gh, gv = _face_conductances(a_node, b_node, n1, n2, h1, h2)
    idx = np.arange(n1 * n2).reshape(n1, n2)
    ph = idx[:-1, :].ravel(); qh = idx[1:, :].ravel(); vh = gh.ravel()
    pv = idx[:, :-1].ravel(); qv = idx[:, 1:].ravel(); vv = gv.ravel()
    rows = np.concatenate([ph, qh, ph, qh, pv, qv, pv, qv])
    cols = np.concatenate([ph, qh, qh, ph, pv, qv, qv, pv])
    vals = np.concatenate([vh, vh, -vh, -vh, vv, vv, -vv, -vv])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n1 * n2, n1 * n2))


def solve_scalar(kind, a, b, rhs, bdata=None, n1=None, n2=None, h1=None, h2=None,
                 method="auto", cg_tol=1e-12, cg_maxiter=20000):
    """Divergence-form scalar solve d1(a(y2) d1 phi) + d2(b(y2) d2 phi) = rhs.

    kind = "neumann": bdata = (gL, gR, gB, gT) are the boundary values of the
    conormal flux (a*d1phi on vertical sides, b*d2phi on horizontal sides);
    the solution is fixed by the zero-grid-mean gauge and the data must be
    discretely compatible (the caller gates on the defect).

    kind = "dirichlet": homogeneous Dirichlet, bdata ignored.

    Returns the (n1, n2) potential.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise InvalidStateError("scalar solver needs positive coefficients")
    N = n1 * n2
    use_direct = method == "direct" or (method == "auto" and N <= _DIRECT_LIMIT)

    if kind == "neumann":
        K = _assemble_fv(a, b, n1, n2, h1, h2)
        gL, gR, gB, gT = bdata
        F = _fv_rhs(rhs, gL, gR, gB, gT, n1, n2, h1, h2).ravel()
        if use_direct:
            e = np.ones((N, 1))
            Kb = sp.bmat([[K, e], [e.T, None]], format="csc")
            sol = spla.spsolve(Kb, np.concatenate([F, [0.0]]))
            phi = sol[:N]
        else:
            proj = lambda x: x - x.mean()
            op = spla.LinearOperator((N, N), matvec=lambda x: K @ proj(x))
            M = spla.LinearOperator((N, N), matvec=lambda x: proj(x / K.diagonal()))
            phi, info = spla.cg(op, proj(F), rtol=cg_tol, maxiter=cg_maxiter, M=M)
            if info != 0:
                raise NonConvergenceError(
                    f"CG on the Neumann potential failed (info={info}, "
                    f"maxiter={cg_maxiter}, tol={cg_tol})"
                )
            phi = proj(phi)
        phi = phi - phi.mean()
        return phi.reshape(n1, n2)

    if kind == "dirichlet":
        bh = 0.5 * (b[1:] + b[:-1])
        ni, nj = n1 - 2, n2 - 2
        jj = np.arange(1, n2 - 1)
        cH = np.broadcast_to(a[jj] / h1**2, (ni, nj))
        cVp = np.broadcast_to(bh[jj] / h2**2, (ni, nj))
        cVm = np.broadcast_to(bh[jj - 1] / h2**2, (ni, nj))
        diag = 2.0 * cH + cVp + cVm
        idx = np.arange(ni * nj).reshape(ni, nj)
        rows = [idx.ravel()]
        cols = [idx.ravel()]
        vals = [diag.ravel()]
        rows += [idx[:-1, :].ravel(), idx[1:, :].ravel()]
        cols += [idx[1:, :].ravel(), idx[:-1, :].ravel()]
        vals += [-cH[:-1, :].ravel(), -cH[1:, :].ravel()]
        rows += [idx[:, :-1].ravel(), idx[:, 1:].ravel()]
        cols += [idx[:, 1:].ravel(), idx[:, :-1].ravel()]
        vals += [-cVp[:, :-1].ravel(), -cVm[:, 1:].ravel()]
        K = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ni * nj, ni * nj),
        )
        F = -rhs[1:-1, 1:-1].ravel()
        if use_direct:
            phi_i = spla.spsolve(K.tocsc(), F)
        else:
            M = spla.LinearOperator((ni * nj, ni * nj), matvec=lambda x: x / K.diagonal())
            phi_i, info = spla.cg(K, F, rtol=cg_tol, maxiter=cg_maxiter, M=M)
            if info != 0:
                raise NonConvergenceError(
                    f"CG on the Dirichlet potential failed (info={info})"
                )
        phi = np.zeros((n1, n2))
        phi[1:-1, 1:-1] = phi_i.reshape(ni, nj)
        return phi

    raise ValueError(f"unknown kind {kind!r}")


def solve(p: EllipticProblem, opts: SolveOptions = None) -> EllipticSolution:
    """Solve the first-order system by the two-potential decomposition.

    The data must satisfy the compatibility condition up to
    ``opts.defect_tol``; with ``opts.project`` the defect is removed by
    subtracting the constant ``defect / int lam1`` from h2 (the shift is
    reported on the solution).
    """
    opts = opts or SolveOptions()
    defect = compatibility_defect(p)
    h2_data = p.h2
    shift = 0.0
    if abs(defect) > opts.defect_tol:
        if not opts.project:
            raise IncompatibleDataError(
                "elliptic data violate the solvability condition", defect
            )
        h1s, h2s = p.spacing
        int_lam1 = float(np.sum(p.lam1 * _trap_w(p.n2)) * h2s)
        shift = defect / int_lam1
        h2_data = p.h2 - shift
    p_eff = EllipticProblem(
        p.L1, p.L2, p.m_bar, p.n1, p.n2, p.lam1, p.lam2, p.lam3, p.lam4,
        p.H1, p.H2, p.h1, h2_data, p.h3,
    )
    projected = compatibility_defect(p_eff)
    h1s, h2s = p.spacing

    # hat potential: Neumann, carries H1 and all boundary data
    phi_hat = solve_scalar(
        "neumann", p.lam1 / p.lam4, p.lam2 / p.lam3, p_eff.H1,
        bdata=(p.lam1 * p.h1, p.lam1 * h2_data, np.zeros(p.n1), p.lam2[-1] * p.h3),
        n1=p.n1, n2=p.n2, h1=h1s, h2=h2s,
        method=opts.method, cg_tol=opts.cg_tol, cg_maxiter=opts.cg_maxiter,
    )
    # check potential: homogeneous Dirichlet, carries H2
    phi_check = solve_scalar(
        "dirichlet", p.lam3 / p.lam2, p.lam4 / p.lam1, p_eff.H2,
        n1=p.n1, n2=p.n2, h1=h1s, h2=h2s,
        method=opts.method, cg_tol=opts.cg_tol, cg_maxiter=opts.cg_maxiter,
    )

    v1 = _d1(phi_hat, h1s) / p.lam4 - _d2(phi_check, h2s) / p.lam1
    v2 = _d2(phi_hat, h2s) / p.lam3 + _d1(phi_check, h1s) / p.lam2
    # boundary conditions hold exactly at the nodes
    v1[0, :] = p.h1
    v1[-1, :] = h2_data
    v2[:, 0] = 0.0
    v2[:, -1] = p.h3

    r1 = _d1(p.lam1 * v1, h1s) + _d2(p.lam2 * v2, h2s) - p_eff.H1
    r2 = _d1(p.lam3 * v2, h1s) - _d2(p.lam4 * v1, h2s) - p_eff.H2
    interior = (slice(1, -1), slice(1, -1))
    res = (float(np.abs(r1[interior]).max()), float(np.abs(r2[interior]).max()))
    k = max(2, min(p.n1, p.n2) // 16)
    corner_mask = np.zeros((p.n1, p.n2), dtype=bool)
    for si in (slice(0, k), slice(-k, None)):
        for sj in (slice(0, k), slice(-k, None)):
            corner_mask[si, sj] = True
    cres = (float(np.abs(r1[corner_mask]).max()), float(np.abs(r2[corner_mask]).max()))

    return EllipticSolution(
        v1=v1, v2=v2, defect=defect, projected_defect=projected, h2_shift=shift,
        residuals=res, corner_residuals=cres,
        phi_hat=phi_hat, phi_check=phi_check, problem=p_eff,
    )
