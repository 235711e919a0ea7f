"""Sparse expansion coefficients by hybrid least angle regression.

LAR ranks candidate basis polynomials; each path prefix is then refit by
ordinary least squares and scored with the leave-one-out error computed in
closed form from the leverages of that single fit.  The prefix with the
smallest corrected LOO error wins.  No regularization constant is ever
tuned: model size along the path plays its role.

Degeneracy handling is explicit: a prefix whose normal equations exceed a
condition estimate of 1e12, or whose leverage saturates (some h_i within
1e-10 of 1, i.e. the fit memorizes point i), is skipped with a diagnostic
rather than silently producing garbage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .basis import (
    MultiIndexSet,
    _graded_lex_order,
    enumerate_hyperbolic,
    eval_basis_matrix,
)
from .probability import Marginal, RandomVector
from .sampling import ExperimentalDesign

_CORR_TOL = 1e-12       # residual-correlation floor: below it the path ends
_COND_LIMIT = 1e12      # condition estimate above which a prefix is skipped
_LEVERAGE_TOL = 1e-10   # h_i >= 1 - tol means the fit memorizes point i

ORIGINAL = "original"
LOG = "log"


@dataclass
class SparsePce:
    """A fitted sparse polynomial chaos expansion.

    Coefficients are in the orthonormal-basis convention and aligned with
    ``active_set`` (graded-lex order, zero index first, so
    ``coefficients[0]`` is the mean in the fit scale).
    """

    random_vector: RandomVector
    active_set: MultiIndexSet
    coefficients: np.ndarray
    degree: int
    q: float
    err_loo: float
    err_loo_corrected: float
    sparsity_index: float
    candidate_size: int
    response_scale: str = ORIGINAL
    err_gen: float | None = None

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        if len(self.coefficients) != len(self.active_set):
            raise ValueError("coefficient vector does not match active set size")
        if not (0.0 < self.sparsity_index <= 1.0):
            raise ValueError("sparsity index must lie in (0, 1]")
        if self.response_scale not in (ORIGINAL, LOG):
            raise ValueError(f"unknown response scale {self.response_scale!r}")

    def predict(self, points):
        """Surrogate values in the fit scale at physical-space points."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        u = self.random_vector.to_standard(np.atleast_2d(pts))
        psi = eval_basis_matrix(self.active_set, u, self.random_vector.families)
        out = psi @ self.coefficients
        return float(out[0]) if single else out

    def predict_original(self, points):
        """Surrogate values in the original response scale."""
        out = self.predict(points)
        if self.response_scale == LOG:
            out = np.exp(out)
        return out

    def to_dict(self) -> dict:
        return {
            "format": "pcesobol.sparse-pce/1",
            "random_vector": [
                {"name": n, "kind": marg.kind, "a": marg.a, "b": marg.b}
                for n, marg in zip(
                    self.random_vector.names, self.random_vector.marginals
                )
            ],
            "truncation": {"p": int(self.degree), "q": float(self.q)},
            "response_scale": self.response_scale,
            "candidate_size": int(self.candidate_size),
            "sparsity_index": float(self.sparsity_index),
            "errors": {
                "loo": float(self.err_loo),
                "loo_corrected": float(self.err_loo_corrected),
                "generalization": None if self.err_gen is None else float(self.err_gen),
            },
            "active_set": self.active_set.to_sparse_pairs(),
            "coefficients": [float(c) for c in self.coefficients],
        }

    def save(self, path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc["provenance"] = extra
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "SparsePce":
        names = [e["name"] for e in doc["random_vector"]]
        margs = [Marginal(e["kind"], e["a"], e["b"]) for e in doc["random_vector"]]
        rv = RandomVector(tuple(names), tuple(margs))
        pairs = [[(int(j), int(d)) for j, d in row] for row in doc["active_set"]]
        aset = MultiIndexSet.from_sparse_pairs(
            pairs, rv.m, doc["truncation"]["p"], doc["truncation"]["q"]
        )
        # rebuild coefficient order alongside the (re-sorted) active set
        key = {tuple(sorted(row)): k for k, row in enumerate(pairs)}
        coeffs = np.empty(len(pairs))
        for k, row in enumerate(aset.to_sparse_pairs()):
            coeffs[k] = doc["coefficients"][key[tuple(sorted(row))]]
        errors = doc["errors"]
        return cls(
            random_vector=rv,
            active_set=aset,
            coefficients=coeffs,
            degree=doc["truncation"]["p"],
            q=doc["truncation"]["q"],
            err_loo=errors["loo"],
            err_loo_corrected=errors["loo_corrected"],
            sparsity_index=doc["sparsity_index"],
            candidate_size=doc["candidate_size"],
            response_scale=doc["response_scale"],
            err_gen=errors["generalization"],
        )

    @classmethod
    def load(cls, path) -> "SparsePce":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class FitDiagnostics:
    """Per-degree sweep table of an adaptive fit."""

    rows: list = field(default_factory=list)
    selected_p: int | None = None

    def add(self, p, candidate_size, active_size, err_loo_corrected, status="ok"):
        self.rows.append(
            {
                "p": int(p),
                "candidate_size": int(candidate_size),
                "active_size": None if active_size is None else int(active_size),
                "err_loo_corrected": None
                if err_loo_corrected is None
                else float(err_loo_corrected),
                "status": status,
            }
        )


def lar_path(design_matrix, y, max_terms=None, const_col=0):
    """Least angle regression inclusion order over basis columns.

    Predictor columns are centered and scaled to unit norm internally; the
    constant column (``const_col``) never competes and is handled by
    centering the responses.  Returns the ordered list of selected column
    indices (into ``design_matrix``); its prefixes are the nested candidate
    active sets.  The path ends early when every residual correlation
    drops below 1e-12 or the active Gram matrix loses rank.
    """
    psi = np.asarray(design_matrix, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, n_cols = psi.shape
    if y.shape[0] != n:
        raise ValueError("responses do not match design matrix rows")

    cand = [j for j in range(n_cols) if j != const_col]
    x = psi[:, cand] - psi[:, cand].mean(axis=0)
    norms = np.linalg.norm(x, axis=0)
    usable = norms > 1e-13 * max(1.0, float(np.max(norms, initial=0.0)))
    cand = [j for j, u in zip(cand, usable) if u]
    x = x[:, usable] / norms[usable]
    p_avail = len(cand)

    cap = min(n - 1, p_avail)
    if max_terms is None:
        max_terms = cap
    if not (0 <= max_terms <= cap):
        raise ValueError(f"max_terms must lie in [0, min(N-1, P)] = [0, {cap}]")
    if max_terms == 0 or p_avail == 0:
        return []

    yc = y - y.mean()
    mu = np.zeros(n)
    order_local: list[int] = []
    inactive = np.ones(p_avail, dtype=bool)

    while len(order_local) < max_terms:
        c = x.T @ (yc - mu)
        c_in = np.where(inactive, np.abs(c), -np.inf)
        big_c = float(np.max(c_in))
        if big_c < _CORR_TOL:
            break
        j_new = int(np.argmax(c_in))
        order_local.append(j_new)
        inactive[j_new] = False

        active = order_local
        signs = np.sign(c[active])
        signs[signs == 0] = 1.0
        xa = x[:, active] * signs
        gram = xa.T @ xa
        try:
            chol = cho_factor(gram, lower=True)
        except np.linalg.LinAlgError:
            order_local.pop()
            break
        w = cho_solve(chol, np.ones(len(active)))
        s = float(np.sum(w))
        if s <= 0:
            order_local.pop()
            break
        a_norm = 1.0 / np.sqrt(s)
        u_dir = xa @ (w * a_norm)

        if len(order_local) == max_terms or not np.any(inactive):
            break
        a = x.T @ u_dir
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = (big_c - c) / (a_norm - a)
            g2 = (big_c + c) / (a_norm + a)
        gammas = np.concatenate([g1[inactive], g2[inactive]])
        gammas = gammas[np.isfinite(gammas) & (gammas > _CORR_TOL)]
        if gammas.size == 0:
            break
        mu += float(np.min(gammas)) * u_dir

    return [cand[j] for j in order_local]


def loo_error(psi, y, coeffs) -> float:
    """Relative leave-one-out error from a single fit, via leverages.

    ``(1/N) sum_i ((y_i - yhat_i) / (1 - h_i))^2`` with ``h_i`` the
    diagonal of the hat matrix of ``psi``, normalized by the empirical
    response variance.  Requires full column rank and non-saturated
    leverage.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    q, r = np.linalg.qr(psi)
    rd = np.abs(np.diag(r))
    if rd.min() <= 1e-13 * max(rd.max(), 1.0):
        raise ValueError("design matrix is rank deficient")
    h = np.sum(q**2, axis=1)
    if np.any(h >= 1.0 - _LEVERAGE_TOL):
        raise ValueError(
            "saturated leverage: the model memorizes at least one point"
        )
    resid = y - psi @ np.asarray(coeffs, dtype=float)
    err_abs = float(np.mean((resid / (1.0 - h)) ** 2))
    return _relative(err_abs, y)


def corrected_loo(err_loo, n, card_a, psi) -> float:
    """Finite-sample corrected LOO error.

    Multiplies the LOO error by ``(1 - card_a/N)^-1 (1 + tr((Psi^T Psi)^-1))``;
    the trace is computed from the normalized information matrix
    ``Psi^T Psi / N`` as ``tr((Psi^T Psi / N)^-1) / N``, the same quantity
    written in a scale-free way.  Both factors are >= 1.
    """
    if card_a >= n:
        raise ValueError("correction requires card(A) < N")
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    info = psi.T @ psi / n
    trace = float(np.trace(np.linalg.inv(info))) / n
    return float(err_loo) * (1.0 + trace) / (1.0 - card_a / n)


def generalization_error(pce: SparsePce, validation: ExperimentalDesign) -> float:
    """Relative mean-square surrogate-vs-model gap on a validation set.

    Always evaluated in the original response scale: a log-scale expansion
    is exponentiated before comparison.
    """
    if validation.responses is None:
        raise ValueError("validation design has no responses")
    y = validation.responses
    var = float(np.var(y, ddof=1)) if y.size > 1 else 0.0
    if var <= 0.0:
        raise ValueError("validation responses have zero variance")
    yhat = pce.predict_original(validation.points)
    return float(np.mean((y - yhat) ** 2) / var)


def _zero_floor(y: np.ndarray) -> float:
    # squared roundoff scale of an exact fit
    return (1e-12 * max(1.0, float(np.max(np.abs(y), initial=0.0)))) ** 2


def _relative(err_abs: float, y: np.ndarray) -> float:
    if err_abs <= _zero_floor(y):
        return 0.0
    var = float(np.var(y, ddof=1)) if y.size > 1 else 0.0
    if var <= 0.0:
        raise ValueError("responses have zero variance but nonzero error")
    return err_abs / var


@dataclass
class _PrefixScan:
    """Outcome of the per-prefix OLS/LOO sweep along a LAR path."""

    best_k: int | None          # number of selected terms beside the constant
    best_err_loo: float
    best_err_corrected: float
    coeffs: np.ndarray | None   # aligned with [const] + order[:best_k]
    n_skipped: int
    table: list


def _scan_prefixes(psi, y, order) -> _PrefixScan:
    """OLS + closed-form LOO for every prefix of the LAR path.

    One incremental thin-QR pass: each step orthogonalizes one more column,
    updating leverages, residuals and tr((Psi_A^T Psi_A)^-1) (the squared
    Frobenius norm of R^-1) in O(N k).  Since prefixes are nested, the
    first saturated or rank-deficient prefix ends the scan: every superset
    inherits the defect.
    """
    n = psi.shape[0]
    kmax = len(order) + 1
    q_mat = np.empty((n, kmax))
    r_mat = np.zeros((kmax, kmax))
    r_inv = np.zeros((kmax, kmax))
    qty = np.empty(kmax)

    var = float(np.var(y, ddof=1)) if n > 1 else 0.0

    best_k = None
    best_err = np.inf
    best_loo = np.inf
    n_skipped = 0
    table = []

    v = psi[:, 0].astype(float)
    rho = float(np.linalg.norm(v))
    q_mat[:, 0] = v / rho
    r_mat[0, 0] = rho
    r_inv[0, 0] = 1.0 / rho
    qty[0] = q_mat[:, 0] @ y
    h = q_mat[:, 0] ** 2
    resid = y - q_mat[:, 0] * qty[0]
    fro2 = r_inv[0, 0] ** 2
    rd_min = rd_max = rho

    def score(k_terms):
        nonlocal best_k, best_err, best_loo, n_skipped
        card = k_terms + 1
        if np.any(h >= 1.0 - _LEVERAGE_TOL) or card >= n:
            n_skipped += 1
            table.append((k_terms, None, None, "saturated"))
            return False
        err_abs = float(np.mean((resid / (1.0 - h)) ** 2))
        if err_abs <= _zero_floor(y):
            err = 0.0
        elif var <= 0.0:
            n_skipped += 1
            table.append((k_terms, None, None, "zero-variance"))
            return False
        else:
            err = err_abs / var
        corrected = err * (1.0 + fro2) / (1.0 - card / n)
        table.append((k_terms, err, corrected, "ok"))
        if corrected < best_err:
            best_k, best_err, best_loo = k_terms, corrected, err
        return True

    score(0)
    for step, col in enumerate(order, start=1):
        v = psi[:, col].astype(float)
        head = q_mat[:, :step].T @ v
        w = v - q_mat[:, :step] @ head
        extra = q_mat[:, :step].T @ w
        w -= q_mat[:, :step] @ extra
        head += extra
        rho = float(np.linalg.norm(w))
        if rho <= 1e-13 * max(float(np.linalg.norm(v)), 1.0):
            n_skipped += len(order) - step + 1
            table.append((step, None, None, "rank-deficient"))
            break
        rd_min, rd_max = min(rd_min, rho), max(rd_max, rho)
        if rd_max / rd_min > _COND_LIMIT:
            n_skipped += len(order) - step + 1
            table.append((step, None, None, "ill-conditioned"))
            break
        q_mat[:, step] = w / rho
        r_mat[:step, step] = head
        r_mat[step, step] = rho
        new_col = -r_inv[:step, :step] @ head / rho
        r_inv[:step, step] = new_col
        r_inv[step, step] = 1.0 / rho
        fro2 += float(new_col @ new_col) + 1.0 / rho**2
        qty[step] = q_mat[:, step] @ y
        h = h + q_mat[:, step] ** 2
        resid = resid - q_mat[:, step] * qty[step]
        if not score(step):
            # leverage only grows along nested prefixes
            n_skipped += len(order) - step
            break

    coeffs = None
    if best_k is not None:
        k = best_k + 1
        coeffs = solve_triangular(r_mat[:k, :k], qty[:k], lower=False)
    return _PrefixScan(best_k, best_loo, best_err, coeffs, n_skipped, table)


def hybrid_fit(
    candidate: MultiIndexSet,
    design: ExperimentalDesign,
    responses,
    rv: RandomVector,
    scale: str = ORIGINAL,
    max_terms=None,
) -> SparsePce:
    """Fit a sparse expansion on a fixed candidate basis.

    LAR selects the predictors; every path prefix is refit by OLS and the
    prefix with the smallest corrected LOO error is returned.
    """
    y = np.asarray(responses, dtype=float).ravel()
    if y.shape[0] != design.n:
        raise ValueError("responses do not match design size")
    if design.n <= 2:
        raise ValueError("need more than two design points")
    if scale == LOG:
        if np.any(y <= 0):
            raise ValueError("log-scale fit requires strictly positive responses")
        y = np.log(y)
    elif scale != ORIGINAL:
        raise ValueError(f"unknown response scale {scale!r}")

    u = rv.to_standard(design.points)
    psi = eval_basis_matrix(candidate, u, rv.families)
    order = lar_path(psi, y, max_terms=max_terms)
    scan = _scan_prefixes(psi, y, order)
    if scan.best_k is None:
        raise RuntimeError("every candidate model along the path was degenerate")

    cols = [0] + order[: scan.best_k]
    rows = candidate.degrees[cols]
    perm = _graded_lex_order(rows)
    active = MultiIndexSet(rows[perm], candidate.p, candidate.q)
    coeffs = np.asarray(scan.coeffs)[perm]

    return SparsePce(
        random_vector=rv,
        active_set=active,
        coefficients=coeffs,
        degree=candidate.p,
        q=candidate.q,
        err_loo=scan.best_err_loo,
        err_loo_corrected=scan.best_err_corrected,
        sparsity_index=len(active) / len(candidate),
        candidate_size=len(candidate),
        response_scale=scale,
    )


def adaptive_fit(
    design: ExperimentalDesign,
    responses,
    rv: RandomVector,
    p_range,
    q: float,
    scale: str = ORIGINAL,
    early_stop: bool = True,
    max_terms=None,
):
    """Degree-adaptive fit: sweep p, keep the smallest corrected LOO error.

    ``p_range`` is an iterable of candidate maximum degrees, swept in
    ascending order.  With ``early_stop`` (default) the sweep ends after
    three consecutive degrees without improvement.  Ties go to the smaller
    degree.  Returns ``(best_pce, diagnostics)``.
    """
    p_list = sorted(set(int(p) for p in p_range))
    if not p_list or p_list[0] < 1:
        raise ValueError("p_range must contain degrees >= 1")
    # input-contract problems would repeat identically at every degree
    y = np.asarray(responses, dtype=float).ravel()
    if y.shape[0] != design.n:
        raise ValueError("responses do not match design size")
    if design.n <= 2:
        raise ValueError("need more than two design points")
    if scale == LOG and np.any(y <= 0):
        raise ValueError("log-scale fit requires strictly positive responses")

    diag = FitDiagnostics()
    best: SparsePce | None = None
    stall = 0
    last_error: Exception | None = None
    for p in p_list:
        candidate = enumerate_hyperbolic(rv.m, p, q)
        try:
            pce = hybrid_fit(candidate, design, y, rv, scale, max_terms)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            diag.add(p, len(candidate), None, None, f"failed: {exc}")
            last_error = exc
            stall += 1
            if early_stop and stall >= 3 and best is not None:
                break
            continue
        diag.add(p, len(candidate), len(pce.active_set), pce.err_loo_corrected)
        if best is None or pce.err_loo_corrected < best.err_loo_corrected:
            best = pce
            stall = 0
        else:
            stall += 1
            if early_stop and stall >= 3:
                break
    if best is None:
        raise RuntimeError(f"every degree in the sweep failed: {last_error}")
    diag.selected_p = best.degree
    return best, diag
