"""Finite-state reversible Markov chains, observables and sampled paths.

Everything downstream works on three ingredients built here:

- ``ReversibleChain``: a row-stochastic kernel together with its stationary
  law, admitted only when detailed balance holds, and certified so that
  ``pi_i Q_ij == pi_j Q_ji`` to 1e-12 after construction.
- ``Observable``: a real function on states, centered so its stationary mean
  is zero.
- ``Trajectory``: a seeded stationary sample path with the observable values
  and partial sums attached.

Admission is forgiving (1e-9) because user matrices carry construction
noise; the certified object is strict (1e-12) because the rest of the
package turns second-moment identities into machine-precision assertions.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from ._numeric import exact_cumsum
from .errors import (
    Disconnected,
    InvalidLength,
    NegativeWeight,
    NotIrreducible,
    NotReversible,
    NotStochastic,
    ZeroTargetMass,
)

#: tolerance for admitting user-supplied matrices
ADMISSION_TOL = 1e-9
#: tolerance certified by a constructed ReversibleChain
CERTIFIED_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ReversibleChain:
    """Finite reversible kernel with its stationary distribution.

    Instances are immutable and safe to share across threads. The
    constructor re-checks every certified invariant; use the ``build_*``
    factories rather than constructing directly from raw user input.
    """

    kernel: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        q = _frozen(self.kernel)
        pi = _frozen(self.stationary)
        object.__setattr__(self, "kernel", q)
        object.__setattr__(self, "stationary", pi)
        n = q.shape[0]
        if q.shape != (n, n) or pi.shape != (n,):
            raise NotStochastic(f"kernel/stationary shapes mismatch: {q.shape}, {pi.shape}")
        if np.any(q < 0.0):
            raise NotStochastic("kernel has negative entries")
        row_err = np.max(np.abs(q.sum(axis=1) - 1.0))
        if row_err > CERTIFIED_TOL:
            raise NotStochastic(f"certified row sums off by {row_err:.3e}")
        if np.any(pi <= 0.0) or abs(pi.sum() - 1.0) > CERTIFIED_TOL:
            raise NotIrreducible("stationary vector not strictly positive and normalized")
        flow = pi[:, None] * q
        db_err = np.max(np.abs(flow - flow.T))
        if db_err > CERTIFIED_TOL:
            raise NotReversible(f"certified detailed balance off by {db_err:.3e}")
        inv_err = np.max(np.abs(pi @ q - pi))
        if inv_err > CERTIFIED_TOL:
            raise NotIrreducible(f"stationary law not invariant: residual {inv_err:.3e}")

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    def pi_dot(self, a: np.ndarray, b: np.ndarray) -> float:
        """Inner product <a, b> in L2 of the stationary law."""
        return float(np.dot(self.stationary * np.asarray(a), np.asarray(b)))

    def detailed_balance_residual(self) -> float:
        flow = self.stationary[:, None] * self.kernel
        return float(np.max(np.abs(flow - flow.T)))


@dataclass(frozen=True)
class Observable:
    """Real-valued function on states, expected to be centered."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("observable must be a finite 1-d vector")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Trajectory:
    """Seeded stationary sample path.

    Arrays are indexed by time: ``states[t]`` is the state at time t for
    t = 0..length, ``observables[t] = f(states[t])``, and
    ``partial_sums[t]`` is the sum of observables over times 1..t (so
    ``partial_sums[0] == 0``; time zero never enters the partial sums).
    """

    states: np.ndarray
    observables: np.ndarray
    partial_sums: np.ndarray
    seed: int

    def __post_init__(self):
        s = np.array(self.states, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "observables", _frozen(self.observables))
        object.__setattr__(self, "partial_sums", _frozen(self.partial_sums))

    @property
    def length(self) -> int:
        return self.states.shape[0] - 1


def _strongly_connected(support: np.ndarray) -> bool:
    """Strong connectivity of a boolean adjacency matrix, by double BFS."""
    n = support.shape[0]

    def reach(adj: np.ndarray) -> int:
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = adj[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = list(np.flatnonzero(nxt))
        return int(seen.sum())

    return reach(support) == n and reach(support.T) == n


def _solve_stationary(q: np.ndarray) -> np.ndarray:
    """Left eigenvector of eigenvalue one, via a deflated linear solve.

    Replaces the last balance equation with the normalization constraint,
    which is the standard well-conditioned route for irreducible kernels.
    """
    n = q.shape[0]
    a = np.eye(n) - q.T
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NotIrreducible(f"stationary solve failed: {exc}") from exc
    if not np.all(np.isfinite(pi)) or np.min(pi) <= 0.0:
        raise NotIrreducible("stationary vector not strictly positive")
    return pi / pi.sum()


def _certify(q: np.ndarray, pi: np.ndarray) -> ReversibleChain:
    """Project an admitted (kernel, stationary) pair onto exact reversibility.

    Symmetrizing the flow matrix pi_i Q_ij moves the kernel by at most the
    admitted detailed-balance defect and makes the certified 1e-12
    invariants hold by construction.
    """
    flow = pi[:, None] * q
    flow = 0.5 * (flow + flow.T)
    q_rev = flow / pi[:, None]
    q_rev /= q_rev.sum(axis=1, keepdims=True)
    return ReversibleChain(kernel=q_rev, stationary=pi)


def build_chain(kernel) -> ReversibleChain:
    """Admit an explicit row-stochastic kernel as a reversible chain.

    Raises NotStochastic / NotIrreducible / NotReversible when the matrix
    is not a kernel, has a non-unique stationary law, or breaks detailed
    balance beyond 1e-9.
    """
    q = np.array(kernel, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise NotStochastic(f"kernel must be square, got shape {q.shape}")
    if not np.all(np.isfinite(q)) or np.any(q < -ADMISSION_TOL):
        raise NotStochastic("kernel entries must be finite and nonnegative")
    row_err = np.max(np.abs(q.sum(axis=1) - 1.0))
    if row_err > ADMISSION_TOL:
        raise NotStochastic(f"row sums off by {row_err:.3e} (tolerance {ADMISSION_TOL})")
    q = np.clip(q, 0.0, None)
    q /= q.sum(axis=1, keepdims=True)
    if not _strongly_connected(q > 0.0):
        raise NotIrreducible("support graph of the kernel is not strongly connected")
    pi = _solve_stationary(q)
    flow = pi[:, None] * q
    db_err = np.max(np.abs(flow - flow.T))
    if db_err > ADMISSION_TOL:
        raise NotReversible(f"detailed balance off by {db_err:.3e} (tolerance {ADMISSION_TOL})")
    return _certify(q, pi)


def build_random_walk(weights) -> ReversibleChain:
    """Reversible walk on a weighted undirected graph.

    Q_ij is the weight of edge (i, j) normalized by the total weight at i,
    and the stationary law is proportional to vertex weight; detailed
    balance holds by construction.
    """
    w = np.array(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weights must be square, got shape {w.shape}")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise NegativeWeight("weights must be finite and nonnegative")
    if np.max(np.abs(w - w.T)) > ADMISSION_TOL:
        raise ValueError("weights must be symmetric")
    w = 0.5 * (w + w.T)
    degree = w.sum(axis=1)
    if np.any(degree <= 0.0):
        raise Disconnected("a vertex has zero total weight")
    if not _strongly_connected(w > 0.0):
        raise Disconnected("support graph of the weights is not connected")
    q = w / degree[:, None]
    pi = degree / degree.sum()
    return _certify(q, pi)


def build_metropolis(target, proposal) -> ReversibleChain:
    """Metropolis kernel for a positive target law and symmetric proposal.

    Off-diagonal moves are accepted with probability min(1, target_j /
    target_i); rejected mass sits on the diagonal.
    """
    p = np.array(target, dtype=float)
    prop = np.array(proposal, dtype=float)
    if np.any(p <= 0.0) or not np.all(np.isfinite(p)):
        raise ZeroTargetMass("target must be strictly positive on every state")
    p = p / p.sum()
    n = p.shape[0]
    if prop.shape != (n, n):
        raise ValueError(f"proposal shape {prop.shape} does not match target size {n}")
    if np.max(np.abs(prop - prop.T)) > ADMISSION_TOL:
        raise ValueError("proposal must be symmetric")
    if np.max(np.abs(prop.sum(axis=1) - 1.0)) > ADMISSION_TOL or np.any(prop < 0.0):
        raise NotStochastic("proposal must be row-stochastic")
    accept = np.minimum(1.0, p[None, :] / p[:, None])
    q = prop * accept
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, 1.0 - q.sum(axis=1))
    if not _strongly_connected(q > 0.0):
        raise NotIrreducible("Metropolis kernel is not irreducible")
    return _certify(q, p)


def project_mean_zero(raw, chain: ReversibleChain) -> Observable:
    """Center a raw vector so its stationary mean vanishes."""
    v = np.asarray(raw, dtype=float)
    if v.shape != (chain.n_states,):
        raise ValueError(f"observable length {v.shape} does not match {chain.n_states} states")
    return Observable(values=v - float(np.dot(chain.stationary, v)))


def stationary_mean(chain: ReversibleChain, f: Observable) -> float:
    return float(np.dot(chain.stationary, f.values))


def require_centered(chain: ReversibleChain, f: Observable, tol: float = CERTIFIED_TOL) -> None:
    m = stationary_mean(chain, f)
    if abs(m) > tol:
        raise ValueError(f"observable is not centered: stationary mean {m:.3e}")


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic per-trajectory 64-bit seed from (master seed, index)."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_trajectory(chain: ReversibleChain, f: Observable, length: int, seed: int) -> Trajectory:
    """Draw a stationary path of the given length, deterministically in seed.

    The generator consumes exactly ``length + 1`` uniforms in order: one
    inverse-CDF draw from the stationary law for the start, then one per
    transition. Batch simulators elsewhere reproduce single paths by
    honoring the same protocol.
    """
    if not isinstance(length, (int, np.integer)) or length < 1:
        raise InvalidLength(f"trajectory length must be a positive integer, got {length!r}")
    require_centered(chain, f)
    rng = np.random.default_rng(int(seed))
    u = rng.random(length + 1)
    cum_pi = np.cumsum(chain.stationary)
    cum_pi[-1] = 1.0
    cum_rows = np.cumsum(chain.kernel, axis=1)
    cum_rows[:, -1] = 1.0
    pi_list = cum_pi.tolist()
    row_lists = cum_rows.tolist()
    n_max = chain.n_states - 1

    states = np.empty(length + 1, dtype=np.int64)
    s = min(bisect.bisect_right(pi_list, u[0]), n_max)
    states[0] = s
    for t in range(1, length + 1):
        s = min(bisect.bisect_right(row_lists[s], u[t]), n_max)
        states[t] = s

    x = f.values[states]
    partial = np.concatenate(([0.0], exact_cumsum(x[1:])))
    return Trajectory(states=states, observables=x, partial_sums=partial, seed=int(seed))
