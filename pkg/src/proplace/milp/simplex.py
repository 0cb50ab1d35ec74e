"""Bounded-variable primal simplex with explicit basis inverse.

Two-phase method: phase 1 minimises the sum of artificial variables from a
clamped-at-bounds starting point, phase 2 optimises the real objective.
Entering variable by Dantzig pricing, switching to Bland's rule after a run
of degenerate steps (cycling guard).  Dense numpy throughout; adequate for
the desk-scale LPs produced by the network encodings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError

TOL = 1e-9              # reduced-cost optimality / pivot eligibility
PIVOT_TOL = 1e-9        # smallest admissible ratio-test denominator
FEAS_DECISION = 1e-7    # phase-1 objective above this means infeasible
REFACTOR_EVERY = 100
STALL_LIMIT = 50        # degenerate steps before Bland's rule kicks in

BASIC, LOWER, UPPER, FREE = 0, 1, 2, 3


@dataclass
class LpResult:
    status: str                 # 'optimal' | 'infeasible' | 'unbounded'
    x: np.ndarray | None = None
    objective: float | None = None


def solve_lp(c, A, senses, b, lb, ub, max_iters=None):
    """Minimise c.x subject to A x (<=|>=|=) b and lb <= x <= ub.

    senses is a sequence of '<=', '>=', '=' per row.  Bounds may be
    +-inf.  Returns an LpResult; raises NumericError when the basis cannot
    be kept numerically sound.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        A = A.reshape(len(senses), c.shape[0])
    b = np.asarray(b, dtype=np.float64)
    lb = np.asarray(lb, dtype=np.float64)
    ub = np.asarray(ub, dtype=np.float64)
    if A.shape != (len(senses), c.shape[0]):
        raise ValueError(f"A has shape {A.shape}, expected ({len(senses)}, {c.shape[0]})")
    worker = _Simplex(c, A, senses, b, lb, ub, max_iters)
    return worker.solve()


class _Simplex:
    def __init__(self, c, A, senses, b, lb, ub, max_iters=None):
        m, n = A.shape
        if np.any(lb > ub):
            # an empty box is plain infeasibility, not an error
            self.trivially_infeasible = True
            return
        self.trivially_infeasible = False
        slack_lb = np.empty(m)
        slack_ub = np.empty(m)
        for i, s in enumerate(senses):
            if s == "<=":
                slack_lb[i], slack_ub[i] = 0.0, np.inf
            elif s == ">=":
                slack_lb[i], slack_ub[i] = -np.inf, 0.0
            elif s == "=":
                slack_lb[i], slack_ub[i] = 0.0, 0.0
            else:
                raise ValueError(f"unknown sense {s!r}")

        self.m = m
        self.n_orig = n
        self.n_real = n + m
        self.b = b.copy()
        # start every non-basic variable at its finite bound nearest zero;
        # only genuinely free variables (both bounds infinite) start interior
        all_lb = np.concatenate([lb, slack_lb])
        all_ub = np.concatenate([ub, slack_ub])
        both_inf = ~np.isfinite(all_lb) & ~np.isfinite(all_ub)
        pick_lb = np.isfinite(all_lb) & (
            ~np.isfinite(all_ub) | (np.abs(all_lb) <= np.abs(all_ub))
        )
        start = np.where(both_inf, 0.0, np.where(pick_lb, all_lb, all_ub))
        resid = b - np.hstack([A, np.eye(m)]) @ start
        art_sign = np.where(resid < 0, -1.0, 1.0)

        self.A = np.hstack([A, np.eye(m), np.diag(art_sign)])
        self.lb = np.concatenate([lb, slack_lb, np.zeros(m)])
        self.ub = np.concatenate([ub, slack_ub, np.full(m, np.inf)])
        self.x = np.concatenate([start, np.abs(resid)])
        self.st = np.empty(self.n_real + m, dtype=np.int8)
        nr = self.n_real
        self.st[:nr] = np.where(
            self.x[:nr] == self.lb[:nr],
            LOWER,
            np.where(self.x[:nr] == self.ub[:nr], UPPER, FREE),
        )
        self.st[nr:] = BASIC
        self.basis = np.arange(self.n_real, self.n_real + m)
        self.Binv = np.diag(art_sign)

        self.c_real = np.concatenate([c, np.zeros(2 * m)])
        self.c_art = np.concatenate([np.zeros(self.n_real), np.ones(m)])
        self.total_iters = 0
        self.max_iters = max_iters if max_iters is not None else max(5000, 200 * (m + n))

    def solve(self):
        if self.trivially_infeasible:
            return LpResult(status="infeasible")
        status = self._run(self.c_art, phase=1)
        if status != "optimal":
            raise NumericError("phase-1 simplex failed to terminate cleanly")
        if float(self.c_art @ self.x) > FEAS_DECISION:
            return LpResult(status="infeasible")
        self._drive_out_artificials()
        self.ub[self.n_real :] = 0.0
        self.x[self.n_real :] = 0.0
        status = self._run(self.c_real, phase=2)
        if status == "unbounded":
            return LpResult(status="unbounded")
        self._refactor()
        resid = self.A @ self.x - self.b
        if np.max(np.abs(resid)) > 1e-6:
            self._refactor()
            resid = self.A @ self.x - self.b
            if np.max(np.abs(resid)) > 1e-6:
                raise NumericError(
                    f"solution residual {np.max(np.abs(resid)):.3e} after refactorisation"
                )
        raw = self.x[: self.n_orig]
        drift = np.maximum(self.lb[: self.n_orig] - raw, raw - self.ub[: self.n_orig])
        if np.max(drift, initial=0.0) > 1e-6:
            raise NumericError(f"variable bound violated by {np.max(drift):.3e}")
        x = np.clip(raw, self.lb[: self.n_orig], self.ub[: self.n_orig])
        return LpResult(status="optimal", x=x, objective=float(self.c_real[: self.n_orig] @ x))

    # -- core iteration ----------------------------------------------------

    def _run(self, cost, phase):
        bland = False
        stall = 0
        it = 0
        tiny_pivots = 0
        movable = self.lb < self.ub
        while True:
            it += 1
            self.total_iters += 1
            if self.total_iters > self.max_iters:
                raise NumericError(
                    f"simplex exceeded {self.max_iters} iterations (cycling?)"
                )
            if it % REFACTOR_EVERY == 0:
                self._refactor()

            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            can_up = movable & (self.st != BASIC) & (self.st != UPPER) & (d < -TOL)
            can_dn = movable & ((self.st == UPPER) | (self.st == FREE)) & (d > TOL)
            viol = np.where(can_up, -d, 0.0)
            viol = np.where(can_dn, d, viol)
            if not np.any(viol > 0.0):
                return "optimal"
            if bland:
                j = int(np.argmax(viol > 0.0))
            else:
                j = int(np.argmax(viol))
            dirn = 1.0 if can_up[j] else -1.0

            w = self.Binv @ self.A[:, j]
            coeff = dirn * w
            xB = self.x[self.basis]
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            t = np.full(self.m, np.inf)
            pos = (coeff > PIVOT_TOL) & (lbB > -np.inf)
            neg = (coeff < -PIVOT_TOL) & (ubB < np.inf)
            t[pos] = (xB[pos] - lbB[pos]) / coeff[pos]
            t[neg] = (xB[neg] - ubB[neg]) / coeff[neg]
            t = np.maximum(t, 0.0)
            t_rows = float(t.min()) if self.m else np.inf
            # entering variable may only travel to its own opposite bound
            headroom = self.ub[j] - self.x[j] if dirn > 0 else self.x[j] - self.lb[j]

            if t_rows == np.inf and headroom == np.inf:
                if phase == 1:
                    raise NumericError("phase-1 objective unbounded; broken setup")
                return "unbounded"

            if headroom < t_rows - 1e-12:
                step = float(headroom)
                self.x[j] += dirn * step
                self.x[self.basis] = xB - step * coeff
                self.st[j] = UPPER if dirn > 0 else LOWER
            else:
                cand = np.where(t <= t_rows + 1e-12)[0]
                r = int(cand[np.argmin(self.basis[cand])])
                if abs(w[r]) < 1e-11:
                    # stale basis inverse: rebuild and retry the iteration
                    tiny_pivots += 1
                    if tiny_pivots > 3:
                        raise NumericError("vanishing pivot element")
                    self._refactor()
                    continue
                tiny_pivots = 0
                step = float(t[r])
                leaving = int(self.basis[r])
                self.x[j] += dirn * step
                self.x[self.basis] = xB - step * coeff
                if coeff[r] > 0:
                    self.x[leaving] = self.lb[leaving]
                    self.st[leaving] = LOWER
                else:
                    self.x[leaving] = self.ub[leaving]
                    self.st[leaving] = UPPER
                self.st[j] = BASIC
                self.basis[r] = j
                piv = w[r]
                self.Binv[r] /= piv
                w2 = w.copy()
                w2[r] = 0.0
                self.Binv -= np.outer(w2, self.Binv[r])

            if step <= 1e-12:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True
            else:
                stall = 0

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericError("singular basis matrix") from exc
        xf = self.x.copy()
        xf[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ xf)

    def _drive_out_artificials(self):
        for i in range(self.m):
            if self.basis[i] < self.n_real:
                continue
            row = self.Binv[i] @ self.A[:, : self.n_real]
            candidates = np.where(
                (np.abs(row) > 1e-9)
                & (self.st[: self.n_real] != BASIC)
                & (self.lb[: self.n_real] < self.ub[: self.n_real])
            )[0]
            if candidates.size == 0:
                # redundant row: freeze the artificial at zero
                art = self.basis[i]
                self.lb[art] = self.ub[art] = 0.0
                self.x[art] = 0.0
                continue
            j = int(candidates[0])
            w = self.Binv @ self.A[:, j]
            art = int(self.basis[i])
            self.st[art] = LOWER
            self.x[art] = 0.0
            self.st[j] = BASIC
            self.basis[i] = j
            piv = w[i]
            self.Binv[i] /= piv
            w2 = w.copy()
            w2[i] = 0.0
            self.Binv -= np.outer(w2, self.Binv[i])
