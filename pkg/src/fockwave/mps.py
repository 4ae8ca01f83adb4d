"""Matrix product state of a chiral emitter and the waveguide time bins.

Sites are ordered ``[scattered bins][TLS][unscattered bins]``. Each
collision applies an exact two-site unitary to the emitter and the next
incoming bin and swaps the emitter one site to the right, so every gate is
nearest-neighbour and a bin is never touched again after it has scattered.
The orthogonality centre always sits on the emitter.

Physical basis conventions: bin site index = photon number
``0..bin_cutoff``; emitter index 0 = ground, 1 = excited. Tensors are
indexed ``(left bond, physical, right bond)``.
"""
from __future__ import annotations

import logging
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .analytic import SystemParams

logger = logging.getLogger(__name__)

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SIGMA_PLUS = SIGMA_MINUS.T
TLS_NUMBER = np.diag([0.0, 1.0])


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float))


@dataclass
class CollisionConfig:
    """Numerical controls of the collision-model evolution.

    Attributes:
        dt: Time-bin width.
        n_bins: Number of waveguide bins.
        chi_max: Maximum bond dimension kept after each SVD.
        svd_tol: Singular values at or below this are discarded.
        bin_cutoff: Maximum photon number per bin.
        truncation_budget: Accumulated discarded weight above which a run
            is flagged.
    """

    dt: float
    n_bins: int
    chi_max: int = 32
    svd_tol: float = 1e-10
    bin_cutoff: int = 2
    truncation_budget: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if self.chi_max < 2:
            raise ValueError("chi_max must be >= 2")
        if self.svd_tol < 0:
            raise ValueError("svd_tol must be >= 0")
        if self.bin_cutoff < 1:
            raise ValueError("bin_cutoff must be >= 1")

    @classmethod
    def from_grid(cls, grid, **kwargs) -> "CollisionConfig":
        return cls(dt=grid.dt, n_bins=grid.n_bins, **kwargs)


@dataclass
class TimeBinState:
    """Emitter plus time bins in mixed-canonical form.

    Sites left of ``center`` are left-isometries, sites right of it are
    right-isometries. ``tls_site`` equals the number of bins that have
    already scattered.
    """

    tensors: list
    tls_site: int
    bin_dim: int
    truncation_error: float = 0.0
    max_bond: int = 1
    bond_overflows: int = 0

    @property
    def center(self) -> int:
        return self.tls_site

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def n_bins(self) -> int:
        return self.n_sites - 1

    @property
    def n_scattered(self) -> int:
        return self.tls_site

    def bin_site(self, k: int) -> int:
        """Site index holding waveguide bin ``k``."""
        if not 0 <= k < self.n_bins:
            raise IndexError(f"bin {k} out of range")
        return k if k < self.tls_site else k + 1

    @property
    def bond_dims(self) -> list[int]:
        return [a.shape[2] for a in self.tensors[:-1]]

    def norm(self) -> float:
        c = self.tensors[self.center]
        return float(np.sqrt(np.vdot(c, c).real))

    def copy(self) -> "TimeBinState":
        return TimeBinState(
            tensors=[a.copy() for a in self.tensors], tls_site=self.tls_site,
            bin_dim=self.bin_dim, truncation_error=self.truncation_error,
            max_bond=self.max_bond, bond_overflows=self.bond_overflows)

    def isometry_errors(self) -> np.ndarray:
        """Deviation of each non-centre tensor from its isometry condition."""
        errs = np.zeros(self.n_sites)
        for i, a in enumerate(self.tensors):
            if i < self.center:
                m = a.reshape(-1, a.shape[2])
                errs[i] = np.abs(m.conj().T @ m - np.eye(m.shape[1])).max()
            elif i > self.center:
                m = a.reshape(a.shape[0], -1)
                errs[i] = np.abs(m @ m.conj().T - np.eye(m.shape[0])).max()
        return errs


def _truncated_svd(m: np.ndarray, chi_max: int, tol: float):
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    n_keep = max(1, int(np.count_nonzero(s > tol)))
    overflow = n_keep > chi_max
    n_keep = min(n_keep, chi_max)
    discarded = float(np.sum(s[n_keep:] ** 2))
    return u[:, :n_keep], s[:n_keep], vh[:n_keep], discarded, overflow


def build_input_mps(f_k, n: int, cfg: CollisionConfig) -> TimeBinState:
    """Time-bin MPS of the Fock state ``(B^+)^n / sqrt(n!) |vac>`` with
    ``B^+ = sum_k f_k b_k^+``, followed by the emitter in its ground state
    at site 0.

    The bond index counts photons already placed to the left, so the raw
    bond dimension is ``n + 1``. A left-to-right pass removes channels that
    carry exactly zero amplitude (e.g. "photon placed" before the pulse
    starts), then a right-to-left SVD sweep brings the state to
    right-canonical form and drops vanishing Schmidt values.
    ``n = 0`` gives the vacuum.
    """
    f_k = np.asarray(f_k, dtype=complex)
    if n not in (0, 1, 2):
        raise ValueError(f"photon number must be 0, 1 or 2, got {n}")
    if cfg.bin_cutoff < n:
        raise ValueError(
            f"bin_cutoff={cfg.bin_cutoff} cannot hold a {n}-photon state")
    if len(f_k) != cfg.n_bins:
        raise ValueError(f"got {len(f_k)} coefficients for {cfg.n_bins} bins")
    if n and abs(np.vdot(f_k, f_k).real - 1.0) > 1e-10:
        raise ValueError("pulse coefficients must satisfy sum |f_k|^2 = 1")

    d = cfg.bin_cutoff + 1
    tensors = [np.array([1.0, 0.0], dtype=complex).reshape(1, 2, 1)]
    for k, f in enumerate(f_k):
        a = np.zeros((n + 1, d, n + 1), dtype=complex)
        for left in range(n + 1):
            for m in range(min(n - left, d - 1) + 1):
                a[left, m, left + m] = f**m / math.sqrt(math.factorial(m))
        if k == 0:
            a = a[:1] * math.sqrt(math.factorial(n))
        if k == len(f_k) - 1:
            a = a[:, :, n:]
        tensors.append(a)

    for i in range(len(tensors) - 1):
        a = tensors[i]
        l, p, r = a.shape
        u, s, vh = np.linalg.svd(a.reshape(l * p, r), full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > 1e-15 * s[0])))
        tensors[i] = u[:, :keep].reshape(l, p, keep)
        tensors[i + 1] = np.tensordot(s[:keep, None] * vh[:keep],
                                      tensors[i + 1], axes=(1, 0))

    state = TimeBinState(tensors=tensors, tls_site=0, bin_dim=d)
    for i in range(len(tensors) - 1, 0, -1):
        a = tensors[i]
        l, p, r = a.shape
        u, s, vh, disc, over = _truncated_svd(
            a.reshape(l, p * r), cfg.chi_max, cfg.svd_tol)
        tensors[i] = vh.reshape(-1, p, r)
        tensors[i - 1] = np.tensordot(tensors[i - 1], u * s, axes=(2, 0))
        state.truncation_error += disc
        state.bond_overflows += int(over)
    state.max_bond = max(state.bond_dims, default=1)
    return state


def collision_unitary(p: SystemParams, dt: float, bin_cutoff: int,
                      ) -> np.ndarray:
    """Exact propagator for one emitter/bin collision.

    ``U = exp(-i delta dt s+s- + sqrt(gamma dt) (s+ b - s- b+))`` on the
    ``2 (bin_cutoff + 1)`` dimensional space, emitter index first. ``b`` is
    the normalized bin annihilator, i.e. the noise increment divided by
    ``sqrt(dt)``.
    """
    if p.gamma * dt > 0.05:
        warnings.warn(f"gamma*dt = {p.gamma * dt:g} is not small; collision "
                      "discretization error will be large", stacklevel=2)
    d = bin_cutoff + 1
    b = annihilation(d)
    eye = np.eye(d)
    gen = (-1j * p.delta * dt * np.kron(TLS_NUMBER, eye)
           + math.sqrt(p.gamma * dt)
           * (np.kron(SIGMA_PLUS, b) - np.kron(SIGMA_MINUS, b.T)))
    return expm(gen)


def step(state: TimeBinState, k: int, U: np.ndarray,
         chi_max: int = 32, svd_tol: float = 1e-10) -> float:
    """Collide the emitter with bin ``k`` and move it past that bin.

    Updates ``state`` in place. The emitter must currently sit directly
    left of bin ``k`` (i.e. ``k == state.n_scattered``).

    Returns:
        Mean photon number of bin ``k`` right after the collision.
    """
    if k != state.tls_site or k >= state.n_bins:
        raise ValueError(
            f"bin {k} is not the next incoming bin (emitter at {state.tls_site})")
    d = state.bin_dim
    a, b = state.tensors[k], state.tensors[k + 1]
    theta = np.tensordot(a, b, axes=(2, 0))
    theta = np.einsum("stuv,luvr->lstr", U.reshape(2, d, 2, d), theta)
    occ = float(np.einsum("lstr,t->", np.abs(theta) ** 2, np.arange(d)))
    l, _, _, r = theta.shape
    m = theta.transpose(0, 2, 1, 3).reshape(l * d, 2 * r)
    u, s, vh, disc, over = _truncated_svd(m, chi_max, svd_tol)
    state.tensors[k] = u.reshape(l, d, -1)
    state.tensors[k + 1] = (s[:, None] * vh).reshape(-1, 2, r)
    state.tls_site = k + 1
    state.truncation_error += disc
    state.bond_overflows += int(over)
    state.max_bond = max(state.max_bond, len(s))
    return occ


def tls_population(state: TimeBinState) -> float:
    c = state.tensors[state.center]
    return float(np.sum(np.abs(c[:, 1, :]) ** 2))


@dataclass
class EvolutionResult:
    """Final state and per-step record of an :func:`evolve` run.

    Arrays indexed by step have ``n_bins + 1`` entries, entry 0 being the
    initial state; entry ``k`` is the state after ``k`` collisions, i.e. at
    time ``k dt``.
    """

    state: TimeBinState
    dt: float
    tls_population: np.ndarray
    bin_occupation: np.ndarray
    input_occupation: np.ndarray
    excitation: np.ndarray
    norm: np.ndarray
    truncation_error: float
    max_bond: int
    within_budget: bool
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.tls_population))

    @property
    def output_flux(self) -> np.ndarray:
        """Normalized output photon flux ``<dB_k^+ dB_k> / dt^2`` per bin."""
        return self.bin_occupation / self.dt


def evolve(state: TimeBinState, p: SystemParams, cfg: CollisionConfig,
           ) -> EvolutionResult:
    """Scatter every bin of ``state`` off the emitter.

    ``state`` is consumed (updated in place) and returned as
    ``result.state``. Occupations of bins that have not yet scattered are
    frozen at their input values, since no gate has acted on them.
    """
    if state.n_scattered:
        raise ValueError("evolve expects a freshly built input state")
    U = collision_unitary(p, cfg.dt, state.bin_dim - 1)
    n_bins = state.n_bins
    input_occ = bin_occupations(state)
    pop = np.empty(n_bins + 1)
    norm = np.empty(n_bins + 1)
    occ = np.empty(n_bins)
    pop[0], norm[0] = tls_population(state), state.norm()
    for k in range(n_bins):
        occ[k] = step(state, k, U, cfg.chi_max, cfg.svd_tol)
        pop[k + 1] = tls_population(state)
        norm[k + 1] = state.norm()
    remaining = np.concatenate([np.cumsum(input_occ[::-1])[::-1], [0.0]])
    scattered = np.concatenate([[0.0], np.cumsum(occ)])
    excitation = pop + scattered + remaining
    ok = state.truncation_error <= cfg.truncation_budget
    if not ok:
        logger.warning("truncation error %.3g exceeds budget %.3g",
                       state.truncation_error, cfg.truncation_budget)
    return EvolutionResult(
        state=state, dt=cfg.dt, tls_population=pop, bin_occupation=occ,
        input_occupation=input_occ, excitation=excitation, norm=norm,
        truncation_error=state.truncation_error, max_bond=state.max_bond,
        within_budget=ok,
        metadata={"bond_overflows": state.bond_overflows,
                  "norm_drift": float(abs(norm[-1] ** 2 - norm[0] ** 2))})


# Environment convention: E[bra, ket].

def _transfer_left(env, bra, ket):
    t = np.tensordot(env, bra.conj(), axes=(0, 0))
    return np.tensordot(t, ket, axes=([0, 1], [0, 1]))


def _transfer_right(env, bra, ket):
    t = np.tensordot(ket, env, axes=(2, 1))
    return np.tensordot(bra.conj(), t, axes=([1, 2], [1, 2]))


def _apply(op, a):
    return np.einsum("st,ltr->lsr", op, a)


def expectation_local(state: TimeBinState, site: int, op) -> complex:
    """``<O>`` for an operator acting on a single site."""
    op = np.asarray(op)
    if not 0 <= site < state.n_sites:
        raise IndexError(f"site {site} out of range")
    a = state.tensors[site]
    if op.shape != (a.shape[1], a.shape[1]):
        raise ValueError(
            f"operator shape {op.shape} does not match physical dimension "
            f"{a.shape[1]} of site {site}")
    c = state.center
    if site <= c:
        env = np.eye(a.shape[0])
        env = _transfer_left(env, a, _apply(op, a))
        for i in range(site + 1, c + 1):
            env = _transfer_left(env, state.tensors[i], state.tensors[i])
        return complex(np.trace(env))
    env = np.eye(a.shape[2])
    env = _transfer_right(env, a, _apply(op, a))
    for i in range(site - 1, c - 1, -1):
        env = _transfer_right(env, state.tensors[i], state.tensors[i])
    return complex(np.trace(env))


def bin_occupations(state: TimeBinState) -> np.ndarray:
    """Mean photon number of every bin, in bin order, in one sweep."""
    n_op = number_op(state.bin_dim)
    c = state.center
    t = state.tensors
    vals = np.empty(state.n_bins)
    env = np.eye(t[c].shape[2])
    env = _transfer_right(env, t[c], t[c])
    for i in range(c - 1, -1, -1):
        vals[i] = _transfer_right(env, t[i], _apply(n_op, t[i])).trace().real
        env = _transfer_right(env, t[i], t[i])
    env = np.eye(t[c].shape[0])
    env = _transfer_left(env, t[c], t[c])
    for i in range(c + 1, state.n_sites):
        vals[i - 1] = _transfer_left(env, t[i], _apply(n_op, t[i])).trace().real
        env = _transfer_left(env, t[i], t[i])
    return vals


def _check_scattered(state: TimeBinState, *bins: int):
    for k in bins:
        if not 0 <= k < state.n_scattered:
            raise ValueError(
                f"bin {k} has not scattered yet; correlations are only "
                f"defined for bins < {state.n_scattered}")


def two_point_correlation(state: TimeBinState, j: int, k: int, dt: float,
                          ) -> complex:
    """``<dB_j^+ dB_k> / dt^2`` between two already-scattered bins."""
    if j > k:
        return two_point_correlation(state, k, j, dt).conjugate()
    _check_scattered(state, j, k)
    t = state.tensors
    b = annihilation(state.bin_dim)
    env = np.eye(t[j].shape[0])
    if j == k:
        env = _transfer_left(env, _apply(b, t[j]), _apply(b, t[j]))
    else:
        env = _transfer_left(env, _apply(b, t[j]), t[j])
        for i in range(j + 1, k):
            env = _transfer_left(env, t[i], t[i])
        env = _transfer_left(env, t[k], _apply(b, t[k]))
    for i in range(k + 1, state.center + 1):
        env = _transfer_left(env, t[i], t[i])
    return complex(np.trace(env)) / dt


def correlation_block(state: TimeBinState, dt: float) -> np.ndarray:
    """All ``<dB_j^+ dB_k> / dt^2`` over scattered bins as a dense matrix.

    Same contraction as :func:`two_point_correlation`, organized as one
    left-to-right sweep that carries a stack of open environments, one
    per row ``j``. Only the upper triangle is contracted; the lower one is
    filled by Hermitian symmetry.
    """
    n = state.n_scattered
    t = state.tensors
    b = annihilation(state.bin_dim)
    c = state.center
    # right environments at the right bond of each scattered bin
    right = [None] * n
    env = np.eye(t[c].shape[2])
    env = _transfer_right(env, t[c], t[c])
    for i in range(n - 1, -1, -1):
        right[i] = env
        env = _transfer_right(env, t[i], t[i])

    g = np.zeros((n, n), dtype=complex)
    stack = np.zeros((0, 1, 1), dtype=complex)
    for k in range(n):
        a = t[k]
        ba = _apply(b, a)
        closed = np.tensordot(ba, right[k], axes=(2, 1))  # (l, s, bra)
        if len(stack):
            w = np.tensordot(stack, a.conj(), axes=(1, 0))  # (j, ket, s, bra)
            g[:k, k] = np.tensordot(w, closed, axes=([1, 2, 3], [0, 1, 2]))
            stack = np.tensordot(w, a, axes=([1, 2], [0, 1]))
        g[k, k] = np.tensordot(ba.conj(), closed, axes=([0, 1, 2], [0, 1, 2]))
        row = _transfer_left(np.eye(a.shape[0]), ba, a)[None]
        stack = np.concatenate([stack, row]) if len(stack) else row
    iu = np.triu_indices(n, 1)
    g[(iu[1], iu[0])] = g[iu].conj()
    return g / dt


_MAGIC = b"FWMPS\x00"
_VERSION = 1


def save_checkpoint(state: TimeBinState, path) -> None:
    """Write ``state`` to a versioned little-endian binary file.

    Layout: magic, u32 version, u32 n_sites, u32 tls_site, u32 bin_dim,
    f64 truncation_error, then per site three u32 dims followed by the
    row-major complex128 tensor (interleaved real/imag f64).
    """
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIId", _VERSION, state.n_sites,
                             state.tls_site, state.bin_dim,
                             state.truncation_error))
        for a in state.tensors:
            fh.write(struct.pack("<III", *a.shape))
            fh.write(np.ascontiguousarray(a, dtype="<c16").tobytes())


def load_checkpoint(path) -> TimeBinState:
    with open(Path(path), "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not an MPS checkpoint")
        version, n_sites, tls_site, bin_dim, trunc = struct.unpack(
            "<IIIId", fh.read(struct.calcsize("<IIIId")))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        tensors = []
        for _ in range(n_sites):
            shape = struct.unpack("<III", fh.read(12))
            count = shape[0] * shape[1] * shape[2]
            data = np.frombuffer(fh.read(16 * count), dtype="<c16")
            tensors.append(data.reshape(shape).astype(complex))
    state = TimeBinState(tensors=tensors, tls_site=tls_site, bin_dim=bin_dim,
                         truncation_error=trunc)
    state.max_bond = max(state.bond_dims, default=1)
    return state
