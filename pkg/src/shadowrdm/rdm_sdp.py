"""Energy minimization over approximately N-representable 2-RDMs.

The semidefinite program keeps the particle-particle block D (antisymmetric
pair space), the hole-hole block Q (same space), and the particle-hole block
G (full r^2 space) as separate positive-semidefinite variables tied together
by elementwise linear equalities, plus the trace condition and one linear
row per measured pair occupation.  Measured rows become two-sided interval
constraints when a tolerance is attached.

The solver is an augmented-Lagrangian boundary-point iteration: a linear
solve for the dual vector, a blockwise projection onto the cones, and a
multiplier update for the primal matrix.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .fci import TwoRDM, unpack_2rdm
from .hamiltonians import ReducedHamiltonian, pair_indices
from .shadows import ShadowRecord, shadow_constraint_rows

__all__ = [
    "ConditionSet",
    "SolverStatus",
    "SDPBlock",
    "ConstraintRow",
    "SDPProblem",
    "SDPSolution",
    "SolverOptions",
    "SDPBuildError",
    "map_d_to_q",
    "map_d_to_g",
    "build_sdp",
    "solve_sdp",
    "v2rdm",
    "sv2rdm",
    "RdmResult",
    "frobenius_error",
]


class SDPBuildError(ValueError):
    """Problem construction failed (e.g. provably infeasible bounds)."""


class _ContradictionError(Exception):
    """Internal: identical constraint rows with incompatible right sides."""


@dataclass(frozen=True)
class ConditionSet:
    """Which positivity blocks to impose; the particle-particle condition D
    is always on."""

    q: bool = True
    g: bool = True

    @classmethod
    def parse(cls, text: str) -> "ConditionSet":
        t = text.strip().lower()
        if t == "d":
            return cls(q=False, g=False)
        if t == "dq":
            return cls(q=True, g=False)
        if t == "dqg":
            return cls(q=True, g=True)
        raise ValueError(f"unknown condition set {text!r} (want d, dq, or dqg)")

    @property
    def label(self) -> str:
        return "D" + ("Q" if self.q else "") + ("G" if self.g else "")


class SolverStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SDPBlock:
    name: str
    dim: int
    kind: str  # "psd" or "diag" (nonnegative diagonal)


class ConstraintRow:
    """Sparse linear functional over the problem blocks.

    For psd blocks terms are (i, j, coeff) triplets applied to the full
    matrix entry (i, j); for diag blocks j must equal i.
    """

    __slots__ = ("terms",)

    def __init__(self) -> None:
        self.terms: dict[str, tuple[list[int], list[int], list[float]]] = {}

    def add(self, block: str, i: int, j: int, coeff: float) -> None:
        ii, jj, vv = self.terms.setdefault(block, ([], [], []))
        ii.append(i)
        jj.append(j)
        vv.append(coeff)

    def add_matrix(self, block: str, mat: np.ndarray) -> None:
        ii, jj = np.nonzero(mat)
        bucket = self.terms.setdefault(block, ([], [], []))
        bucket[0].extend(ii.tolist())
        bucket[1].extend(jj.tolist())
        bucket[2].extend(mat[ii, jj].tolist())

    def apply(self, blocks: dict[str, np.ndarray]) -> float:
        """Evaluate <row, X> against per-block values (matrices or diagonals)."""
        acc = 0.0
        for name, (ii, jj, vv) in self.terms.items():
            x = blocks[name]
            for i, j, v in zip(ii, jj, vv):
                acc += v * (x[i] if x.ndim == 1 else x[i, j])
        return acc


@dataclass
class SDPProblem:
    blocks: list[SDPBlock]
    objective: dict[str, np.ndarray]
    equalities: list[tuple[ConstraintRow, float]]
    intervals: list[tuple[ConstraintRow, float, float]] = field(default_factory=list)

    def block(self, name: str) -> SDPBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


@dataclass
class SDPSolution:
    blocks: dict[str, np.ndarray]
    objective_value: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: SolverStatus
    residual_history: np.ndarray | None = None


@dataclass(frozen=True)
class SolverOptions:
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    max_iter: int = 20000
    penalty_init: float | None = None
    adapt_every: int = 100
    keep_history: bool = False
    debug_json: str | None = None


# ---------------------------------------------------------------------------
# Metric-matrix maps (validated against direct operator evaluation in tests)

def map_d_to_q(d2: TwoRDM, d1: np.ndarray, n_electrons: int) -> np.ndarray:
    """Hole-pair metric on the packed pair space:

    Q[(ij),(kl)] = D[(ij),(kl)] + d_ik d_jl - d_il d_jk
                   - d_jl D1_ik + d_jk D1_il + d_il D1_jk - d_ik D1_jl
    """
    r = d2.n_spin
    d1 = np.asarray(d1, dtype=float)
    if d1.shape != (r, r):
        raise ValueError("1-RDM dimension mismatch")
    eye = np.eye(r)
    q4 = (unpack_2rdm(d2)
          + np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye)
          - np.einsum("jl,ik->ijkl", eye, d1) + np.einsum("jk,il->ijkl", eye, d1)
          + np.einsum("il,jk->ijkl", eye, d1) - np.einsum("ik,jl->ijkl", eye, d1))
    pairs = pair_indices(r)
    pi = np.array([p for p, _ in pairs])
    pj = np.array([q for _, q in pairs])
    return np.ascontiguousarray(q4[pi[:, None], pj[:, None], pi[None, :], pj[None, :]])


def map_d_to_g(d2: TwoRDM, d1: np.ndarray) -> np.ndarray:
    """Particle-hole metric on the full r^2 space, row index p*r + q:

    G[(pq),(rs)] = d_qs D1_pr - D[p,s,r,q]
    """
    r = d2.n_spin
    d1 = np.asarray(d1, dtype=float)
    if d1.shape != (r, r):
        raise ValueError("1-RDM dimension mismatch")
    d4 = unpack_2rdm(d2)
    g4 = np.einsum("pr,qs->pqrs", d1, np.eye(r)) - d4.transpose(0, 3, 2, 1)
    return np.ascontiguousarray(g4.reshape(r * r, r * r))


# ---------------------------------------------------------------------------
# Problem assembly

def _pair_sign(x: int, y: int) -> int:
    return 1 if x < y else -1


def _add_one_rdm_terms(row: ConstraintRow, x: int, y: int, coeff: float,
                       r: int, pidx: dict[tuple[int, int], int]) -> None:
    """Add coeff * D1[x, y] expressed through packed D elements (the 1/(N-1)
    contraction weight must already be folded into coeff)."""
    for m in range(r):
        if m == x or m == y:
            continue
        a = pidx[(x, m) if x < m else (m, x)]
        b = pidx[(y, m) if y < m else (m, y)]
        row.add("D", a, b, coeff * _pair_sign(x, m) * _pair_sign(y, m))


def build_sdp(red: ReducedHamiltonian, conditions: ConditionSet,
              shadows: list[ShadowRecord]) -> SDPProblem:
    """Assemble the SDP: positivity blocks per the condition set, the trace
    condition, elementwise equalities tying Q and G to the D block, and one
    row per measured pair occupation (interval when its tolerance is
    positive).  With no shadows this is the plain variational problem.
    """
    r = red.n_spin
    n = red.n_electrons
    pairs = pair_indices(r)
    npair = len(pairs)
    pidx = {pq: t for t, pq in enumerate(pairs)}
    w = 1.0 / (n - 1)

    blocks = [SDPBlock("D", npair, "psd")]
    if conditions.q:
        blocks.append(SDPBlock("Q", npair, "psd"))
    if conditions.g:
        blocks.append(SDPBlock("G", r * r, "psd"))

    equalities: list[tuple[ConstraintRow, float]] = []
    intervals: list[tuple[ConstraintRow, float, float]] = []

    trace_row = ConstraintRow()
    for t in range(npair):
        trace_row.add("D", t, t, 1.0)
    equalities.append((trace_row, n * (n - 1) / 2.0))

    if conditions.q:
        for a, (i, j) in enumerate(pairs):
            for b, (k, l) in enumerate(pairs):
                row = ConstraintRow()
                row.add("Q", a, b, 1.0)
                row.add("D", a, b, -1.0)
                if j == l:
                    _add_one_rdm_terms(row, i, k, w, r, pidx)
                if j == k:
                    _add_one_rdm_terms(row, i, l, -w, r, pidx)
                if i == l:
                    _add_one_rdm_terms(row, j, k, -w, r, pidx)
                if i == k:
                    _add_one_rdm_terms(row, j, l, w, r, pidx)
                equalities.append((row, 1.0 if a == b else 0.0))

    if conditions.g:
        for p in range(r):
            for q in range(r):
                x = p * r + q
                for s_ in range(r):
                    for t_ in range(r):
                        y = s_ * r + t_
                        row = ConstraintRow()
                        row.add("G", x, y, 1.0)
                        if p != t_ and s_ != q:
                            a = pidx[(p, t_) if p < t_ else (t_, p)]
                            b = pidx[(s_, q) if s_ < q else (q, s_)]
                            row.add("D", a, b, _pair_sign(p, t_) * _pair_sign(s_, q))
                        if q == t_:
                            _add_one_rdm_terms(row, p, s_, -w, r, pidx)
                        equalities.append((row, 0.0))

    for rec in shadows:
        if rec.n_spin != r:
            raise SDPBuildError("shadow dimension does not match the Hamiltonian")
        rows = shadow_constraint_rows(rec.u)
        for t in range(npair):
            row = ConstraintRow()
            row.add_matrix("D", rows[t])
            eps = float(rec.epsilon[t])
            val = float(rec.values[t])
            if eps == 0.0:
                equalities.append((row, val))
            else:
                lo, hi = val - eps, val + eps
                if hi < lo:
                    raise SDPBuildError("interval with upper bound below lower bound")
                if hi < 0.0:
                    raise SDPBuildError(
                        "measured pair occupation is negative beyond its tolerance")
                intervals.append((row, lo, hi))

    if intervals:
        blocks.append(SDPBlock("slack", 2 * len(intervals), "diag"))

    return SDPProblem(blocks, {"D": red.k2.copy()}, equalities, intervals)


# ---------------------------------------------------------------------------
# Boundary-point solver

def _compile(problem: SDPProblem):
    """Flatten blocks, symmetrize and row-normalize constraints, and drop
    duplicate rows (elementwise linking constraints state each symmetric
    entry twice)."""
    offsets: dict[str, int] = {}
    off = 0
    for b in problem.blocks:
        offsets[b.name] = off
        off += b.dim * b.dim if b.kind == "psd" else b.dim
    nvar = off
    kinds = {b.name: b.kind for b in problem.blocks}
    dims = {b.name: b.dim for b in problem.blocks}

    rows: list[tuple[ConstraintRow, float]] = list(problem.equalities)
    for t, (row, lo, hi) in enumerate(problem.intervals):
        lo_row = ConstraintRow()
        hi_row = ConstraintRow()
        for name, (ii, jj, vv) in row.terms.items():
            for i, j, v in zip(ii, jj, vv):
                lo_row.add(name, i, j, v)
                hi_row.add(name, i, j, v)
        lo_row.add("slack", 2 * t, 2 * t, -1.0)
        hi_row.add("slack", 2 * t + 1, 2 * t + 1, 1.0)
        rows.append((lo_row, lo))
        rows.append((hi_row, hi))

    data, indices, indptr, rhs = [], [], [0], []
    for row, b_val in rows:
        entries: dict[int, float] = {}
        for name, (ii, jj, vv) in row.terms.items():
            base = offsets[name]
            if kinds[name] == "diag":
                for i, j, v in zip(ii, jj, vv):
                    if i != j:
                        raise SDPBuildError("off-diagonal term on a diag block")
                    k = base + i
                    entries[k] = entries.get(k, 0.0) + v
            else:
                d = dims[name]
                for i, j, v in zip(ii, jj, vv):
                    if i == j:
                        k = base + i * d + i
                        entries[k] = entries.get(k, 0.0) + v
                    else:
                        k1 = base + i * d + j
                        k2 = base + j * d + i
                        entries[k1] = entries.get(k1, 0.0) + 0.5 * v
                        entries[k2] = entries.get(k2, 0.0) + 0.5 * v
        cols = sorted(entries)
        vals = [entries[c] for c in cols]
        indices.extend(cols)
        data.extend(vals)
        indptr.append(len(indices))
        rhs.append(b_val)

    a_full = scipy.sparse.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(rows), nvar))
    b_full = np.array(rhs)

    norms = np.sqrt(np.asarray(a_full.multiply(a_full).sum(axis=1)).ravel())
    keep: list[int] = []
    seen: dict[bytes, int] = {}
    for k in range(a_full.shape[0]):
        if norms[k] == 0.0:
            if abs(b_full[k]) > 1e-12:
                raise SDPBuildError("zero constraint row with nonzero right side")
            continue
        sl = a_full[k]
        key = sl.indices.tobytes() + np.round(sl.data / norms[k], 12).tobytes()
        prev = seen.get(key)
        if prev is None:
            seen[key] = k
            keep.append(k)
        else:
            scaled_prev = b_full[prev] / norms[prev]
            if abs(scaled_prev - b_full[k] / norms[k]) > 1e-9 * (1.0 + abs(scaled_prev)):
                raise _ContradictionError

    keep_arr = np.array(keep, dtype=np.int64)
    a = a_full[keep_arr]
    b_raw = b_full[keep_arr]
    row_norms = norms[keep_arr]
    a = scipy.sparse.diags(1.0 / row_norms) @ a
    b = b_raw / row_norms

    c_vec = np.zeros(nvar)
    for name, mat in problem.objective.items():
        base = offsets[name]
        if kinds[name] == "diag":
            c_vec[base:base + dims[name]] = np.asarray(mat, dtype=float)
        else:
            d = dims[name]
            c_vec[base:base + d * d] = (0.5 * (np.asarray(mat) + np.asarray(mat).T)).ravel()

    return a.tocsr(), b, row_norms, c_vec, offsets, kinds, dims, nvar


def solve_sdp(problem: SDPProblem, opts: SolverOptions | None = None) -> SDPSolution:
    """Minimize the objective subject to the cone and equality constraints.

    Residual definitions (both must fall below their tolerances, scaled by
    1 + the norm of the data they measure against):

    * primal: ||A(X) - b||_2 / (1 + ||b||_2)
    * dual:   ||A*(y) + Z - C||_F / (1 + ||C||_F)
    """
    opts = opts or SolverOptions()
    try:
        a, b, row_norms, c_vec, offsets, kinds, dims, nvar = _compile(problem)
    except _ContradictionError:
        empty = {blk.name: (np.zeros((blk.dim, blk.dim)) if blk.kind == "psd"
                            else np.zeros(blk.dim)) for blk in problem.blocks}
        return SDPSolution(empty, float("nan"), float("inf"), float("inf"), 0,
                           SolverStatus.INFEASIBLE)
    m = a.shape[0]
    at = a.T.tocsr()

    b_scale = 1.0 + float(np.linalg.norm(b * row_norms))
    c_scale = 1.0 + float(np.linalg.norm(c_vec))

    # the dual linear system matrix is constant: factor once via a spectral
    # pseudoinverse (duplicate shadow/trace directions make it singular)
    use_dense = m <= 6000
    if use_dense:
        gram = (a @ at).toarray()
        w, v = np.linalg.eigh(gram)
        cutoff = max(w[-1], 1.0) * 1e-12
        inv_w = np.where(w > cutoff, 1.0 / np.maximum(w, cutoff), 0.0)
        gram_pinv = (v * inv_w) @ v.T

        def solve_dual(rhs: np.ndarray, _y0: np.ndarray) -> np.ndarray:
            return gram_pinv @ rhs
    else:
        gram_op = scipy.sparse.linalg.LinearOperator(
            (m, m), matvec=lambda z: a @ (at @ z))

        def solve_dual(rhs: np.ndarray, y0: np.ndarray) -> np.ndarray:
            y_sol, _ = scipy.sparse.linalg.cg(gram_op, rhs, x0=y0, rtol=1e-12,
                                              atol=0.0, maxiter=1000)
            return y_sol

    x = np.zeros(nvar)
    y = np.zeros(m)
    z = np.zeros(nvar)
    # starting penalty is uncritical (adapted every adapt_every iterations);
    # 0.3 shaves the transient on the problems this package builds
    sigma = opts.penalty_init if opts.penalty_init is not None else 0.3

    history = [] if (opts.keep_history or opts.debug_json) else None
    status = SolverStatus.MAX_ITER
    rp = rd = float("inf")
    window_best = float("inf")
    prev_window_best = float("inf")
    stall_windows = 0
    iterations = 0

    for it in range(1, opts.max_iter + 1):
        iterations = it
        rhs = a @ (c_vec - z) + (b - a @ x) / sigma
        y = solve_dual(rhs, y)
        t_vec = c_vec - at @ y - x / sigma

        x_new = np.empty_like(x)
        z = np.empty_like(x)
        for name, base in offsets.items():
            d = dims[name]
            if kinds[name] == "diag":
                seg = t_vec[base:base + d]
                z[base:base + d] = np.maximum(seg, 0.0)
                x_new[base:base + d] = -sigma * np.minimum(seg, 0.0)
            else:
                seg = t_vec[base:base + d * d].reshape(d, d)
                seg = 0.5 * (seg + seg.T)
                ew, ev = np.linalg.eigh(seg)
                pos = ev * np.maximum(ew, 0.0) @ ev.T
                neg = seg - pos
                z[base:base + d * d] = (0.5 * (pos + pos.T)).ravel()
                x_new[base:base + d * d] = (-sigma * 0.5 * (neg + neg.T)).ravel()

        rd = float(np.linalg.norm((x_new - x) / sigma)) / c_scale
        x = x_new
        rp = float(np.linalg.norm((a @ x - b) * row_norms)) / b_scale
        if history is not None:
            history.append((rp, rd))

        if rp <= opts.tol_primal and rd <= opts.tol_dual:
            status = SolverStatus.CONVERGED
            break

        window_best = min(window_best, max(rp, rd))
        if it % 500 == 0:
            if window_best > 1e-2 and window_best > 0.99 * prev_window_best:
                # residuals parked above 1e-2 for 1000 iterations: declared
                # infeasible (heuristic; the tolerance asked for is hopeless)
                stall_windows += 1
                if stall_windows >= 2:
                    status = SolverStatus.INFEASIBLE
                    break
            else:
                stall_windows = 0
            if window_best <= 1e-3 and window_best > 0.98 * prev_window_best:
                # sub-tolerance plateau (typical of measurement sets that are
                # inconsistent at the noise scale): keep the iterate, report
                # that tolerances were not met
                status = SolverStatus.MAX_ITER
                break
            prev_window_best = window_best
            window_best = float("inf")

        if it % opts.adapt_every == 0 and rd > 0 and rp > 0:
            # smaller sigma pushes the primal residual down, larger the dual
            ratio = rp / rd
            if ratio > 5.0:
                sigma = max(sigma / 2.0, 1e-8)
            elif ratio < 0.2:
                sigma = min(sigma * 2.0, 1e8)

    blocks_out: dict[str, np.ndarray] = {}
    for name, base in offsets.items():
        d = dims[name]
        if kinds[name] == "diag":
            blocks_out[name] = x[base:base + d].copy()
        else:
            blocks_out[name] = x[base:base + d * d].reshape(d, d).copy()

    sol = SDPSolution(
        blocks=blocks_out,
        objective_value=float(c_vec @ x),
        primal_residual=rp,
        dual_residual=rd,
        iterations=iterations,
        status=status,
        residual_history=np.array(history) if history is not None else None,
    )
    if opts.debug_json:
        _dump_debug(problem, sol, opts.debug_json)
    return sol


def _dump_debug(problem: SDPProblem, sol: SDPSolution, path: str) -> None:
    doc = {
        "blocks": [{"name": b.name, "dim": b.dim, "kind": b.kind} for b in problem.blocks],
        "n_equalities": len(problem.equalities),
        "n_intervals": len(problem.intervals),
        "status": sol.status.value,
        "iterations": sol.iterations,
        "objective_value": sol.objective_value,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "residual_history": [] if sol.residual_history is None
        else [[float(p), float(d)] for p, d in sol.residual_history],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


# ---------------------------------------------------------------------------
# Drivers

@dataclass
class RdmResult:
    energy: float
    d2: TwoRDM
    solution: SDPSolution


def sv2rdm(red: ReducedHamiltonian, conditions: ConditionSet,
           shadows: list[ShadowRecord], opts: SolverOptions | None = None) -> RdmResult:
    """Energy minimization constrained by positivity plus measured shadows;
    with an empty shadow list this is exactly the variational calculation."""
    problem = build_sdp(red, conditions, shadows)
    sol = solve_sdp(problem, opts)
    d2 = TwoRDM(red.n_spin, 0.5 * (sol.blocks["D"] + sol.blocks["D"].T))
    return RdmResult(sol.objective_value + red.e_nuc, d2, sol)


def v2rdm(red: ReducedHamiltonian, conditions: ConditionSet,
          opts: SolverOptions | None = None) -> RdmResult:
    """Variational lower-bound calculation: no measurement constraints."""
    return sv2rdm(red, conditions, [], opts)


def frobenius_error(a: TwoRDM, b: TwoRDM) -> float:
    """||a/tr(a) - b/tr(b)||_F on the packed representation."""
    ta, tb = a.trace, b.trace
    if ta == 0.0 or tb == 0.0:
        raise ValueError("cannot normalize a traceless 2-RDM")
    return float(np.linalg.norm(a.data / ta - b.data / tb))
