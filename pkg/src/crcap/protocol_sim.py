"""Monte-Carlo simulation of the CR coding scheme.

Terminal A sees x, picks a codeword ``u_ij`` jointly typical with x and
sends the row index i over the channel.  Terminal B sees y and the received
row index and looks for the unique UY-typical codeword in that row.  K and L
are flat codeword indices ``i * N2 + j``; ``-1`` is the constant symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .channel_capacity import SisoChannelSpec, siso_capacity
from .errors import ConfigError, ValidationError
from .prob_core import JointPMF, ux_information

CONST = -1
ChannelMode = Literal["ideal", "awgn_random_code"]
TieBreak = Literal["closest", "first"]

__all__ = [
    "SchemeParams",
    "Codebook",
    "SimReport",
    "round_to_type",
    "wilson_interval",
    "build_codebooks",
    "encode_batch",
    "terminal_a_encode",
    "transmit_batch",
    "transmit_index",
    "decode_batch",
    "terminal_b_decode",
    "entropy_rate_estimate",
    "run_simulation",
]


@dataclass(frozen=True)
class SchemeParams:
    """Parameters of one simulated scheme.

    ``tie_break`` selects among several jointly typical codewords:
    ``"closest"`` takes the smallest L-infinity distance to the target joint
    (ties by ascending flat index), ``"first"`` takes the smallest flat index.
    """

    n: int
    delta: float
    aux: np.ndarray
    source: JointPMF
    channel: SisoChannelSpec = SisoChannelSpec(10.0, 1.0)
    channel_mode: ChannelMode = "awgn_random_code"
    trials: int = 10_000
    seed: int = 0
    memory_cap: int = 100_000_000
    tie_break: TieBreak = "closest"
    q_err: float = 0.5

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValidationError("block length must be >= 1")
        if not self.delta > 0:
            raise ValidationError("delta must be > 0")
        if int(self.trials) < 1:
            raise ValidationError("trials must be >= 1")
        if self.channel_mode not in ("ideal", "awgn_random_code"):
            raise ValidationError(f"unknown channel mode {self.channel_mode!r}")
        if self.tie_break not in ("closest", "first"):
            raise ValidationError(f"unknown tie break {self.tie_break!r}")
        aux = np.asarray(self.aux, dtype=float)
        if aux.ndim != 2 or aux.shape[1] != self.source.nx:
            raise ValidationError("aux must be a |U| x |X| table")
        if aux.min() < 0 or abs(aux.sum() - 1) > 1e-9:
            raise ValidationError("aux is not a probability table")
        if not np.allclose(aux.sum(0), self.source.px, atol=1e-9):
            raise ValidationError("aux X-marginal differs from the source")
        object.__setattr__(self, "aux", aux)
        if self.N1 * self.N2 * int(self.n) > self.memory_cap:
            raise ConfigError(
                f"codebook needs {self.N1 * self.N2 * self.n} symbols > cap "
                f"{self.memory_cap}; use a smaller n or delta")

    @property
    def info(self) -> tuple[float, float]:
        """(I(U;X), I(U;Y)) of the auxiliary."""
        iux, ic = ux_information(self.aux, self.source.channel)
        return float(iux), float(iux - ic)

    @property
    def N1(self) -> int:
        iux, iuy = self.info
        return max(1, math.ceil(math.exp(self.n * (iux - iuy + 3 * self.delta))))

    @property
    def N2(self) -> int:
        _, iuy = self.info
        return max(1, math.ceil(math.exp(self.n * (iuy - 2 * self.delta))))

    @property
    def p_u(self) -> np.ndarray:
        return self.aux.sum(1)


@dataclass
class Codebook:
    """``keys[k]`` packs codeword ``k = i * N2 + j`` in base ``|U|`` digits."""

    sequences: np.ndarray  # (N1, N2, n) uint8
    keys: np.ndarray
    type_counts: np.ndarray

    @property
    def N1(self) -> int:
        return self.sequences.shape[0]

    @property
    def N2(self) -> int:
        return self.sequences.shape[1]


@dataclass
class SimReport:
    est_mismatch: float
    mismatch_ci: tuple[float, float]
    est_entropy_rate: float
    channel_error_rate: float
    trials: int
    n: int
    delta: float
    N1: int
    N2: int
    fallback_rate: float
    ambiguity_rate: float
    decode_mismatch_rate: float
    extra: dict = field(default_factory=dict)


# ------------------------------------------------------------------ utils

def round_to_type(p, n: int) -> np.ndarray:
    """Largest-remainder rounding of ``n * p`` to integer counts summing to n."""
    p = np.asarray(p, dtype=float)
    raw = n * p
    counts = np.floor(raw).astype(np.int64)
    short = n - counts.sum()
    order = np.lexsort((np.arange(p.size), -(raw - counts)))
    counts[order[:short]] += 1
    return counts


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n <= 0:
        raise ValidationError("interval needs n >= 1")
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def entropy_rate_estimate(symbols, n: int) -> float:
    """Plug-in entropy with the Miller-Madow correction, divided by n."""
    _, c = np.unique(np.asarray(symbols), return_counts=True)
    N = c.sum()
    p = c / N
    h = -np.sum(p * np.log(p)) + (c.size - 1) / (2 * N)
    return float(h / n)


def _pack(seqs: np.ndarray, base: int) -> np.ndarray:
    w = base ** np.arange(seqs.shape[-1], dtype=np.int64)
    return seqs.astype(np.int64) @ w


def _counts(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> np.ndarray:
    """Joint symbol counts between every row of ``a`` (M,n) and ``b`` (T,n)."""
    ia = [(a == s).astype(np.float32) for s in range(na)]
    ib = [(b == s).astype(np.float32).T for s in range(nb)]
    return np.stack([np.stack([x @ y for y in ib], -1) for x in ia], -2)  # M,T,na,nb


# --------------------------------------------------------------- codebook

def build_codebooks(params: SchemeParams) -> Codebook:
    """Uniform draws from the n-type class nearest P_U, one per codeword."""
    n = int(params.n)
    counts = round_to_type(params.p_u, n)
    if np.any((counts == 0) & (params.p_u > 0)):
        need = int(math.ceil(1.0 / params.p_u[params.p_u > 0].min()))
        raise ValidationError(
            f"P_U has no faithful {n}-type; use a block length >= {need}")
    nu = counts.size
    if n * math.log2(max(nu, 2)) > 62:
        raise ValidationError("block length too large for packed codeword keys")
    base = np.repeat(np.arange(nu, dtype=np.uint8), counts)
    N = params.N1 * params.N2
    rng = np.random.default_rng([int(params.seed), 0])
    seqs = np.empty((N, n), dtype=np.uint8)
    chunk = 1 << 17
    for s in range(0, N, chunk):
        m = min(N, s + chunk) - s
        seqs[s:s + m] = base[np.argsort(rng.random((m, n)), axis=1)]
    keys = _pack(seqs, max(nu, 2))
    return Codebook(seqs.reshape(params.N1, params.N2, n), keys, counts)


# ---------------------------------------------------------------- encoder

def encode_batch(x: np.ndarray, codebook: Codebook, params: SchemeParams,
                 chunk: int = 500) -> np.ndarray:
    """Flat index K of the selected codeword per row of ``x`` (-1 if none)."""
    x = np.atleast_2d(np.asarray(x))
    n = int(params.n)
    if x.shape[1] != n:
        raise ValidationError("x sequences must have length n")
    tol = params.delta + 1e-12
    px = params.source.px
    xtyp = np.all(np.abs(np.stack([(x == s).mean(1) for s in range(px.size)], 1) - px)
                  <= tol, axis=1)
    uq, first = np.unique(codebook.keys, return_index=True)
    nu = codebook.type_counts.size
    useqs = codebook.sequences.reshape(-1, n)[first]
    target = params.aux
    K = np.full(x.shape[0], CONST, dtype=np.int64)
    big = np.iinfo(np.int64).max
    for s in range(0, x.shape[0], chunk):
        xs = x[s:s + chunk]
        dist = np.abs(_counts(useqs, nu, xs, px.size) / n - target).max(axis=(-2, -1))
        ok = dist <= tol
        if params.tie_break == "closest":
            dmin = np.where(ok, dist, np.inf).min(0)
            ok &= dist <= dmin[None, :] + 1e-12
        f = np.where(ok, first[:, None], big).min(0)
        K[s:s + chunk] = np.where(f == big, CONST, f)
    K[~xtyp] = CONST
    return K


def terminal_a_encode(x_seq, codebook: Codebook, params: SchemeParams):
    """Returns ``((i, j) or None, i)``; the row index is 0 for the constant."""
    k = int(encode_batch(np.asarray(x_seq)[None], codebook, params)[0])
    if k == CONST:
        return None, 0
    return (k // codebook.N2, k % codebook.N2), k // codebook.N2


# ---------------------------------------------------------------- channel

def _gaussian_codebook(params: SchemeParams) -> np.ndarray:
    rng = np.random.default_rng([int(params.seed), 2])
    sd = math.sqrt(params.channel.power)
    return (sd * rng.standard_normal((params.N1, int(params.n)))).astype(np.float32)


def transmit_batch(i: np.ndarray, params: SchemeParams, chunk: int = 256,
                   cb_chunk: int = 1 << 16) -> np.ndarray:
    """Received row indices for sent indices ``i`` (0-based)."""
    i = np.asarray(i, dtype=np.int64)
    N1, n = params.N1, int(params.n)
    if i.size and (i.min() < 0 or i.max() >= N1):
        raise ValidationError("row index out of range")
    if params.channel_mode == "ideal":
        rate = math.log(N1) / n
        if rate <= siso_capacity(params.channel, "real") or N1 == 1:
            return i.copy()
        rng = np.random.default_rng([int(params.seed), 4])
        flip = rng.random(i.size) < params.q_err
        wrong = (i + rng.integers(1, N1, i.size)) % N1
        return np.where(flip, wrong, i)
    C = _gaussian_codebook(params)
    rng = np.random.default_rng([int(params.seed), 3])
    noise = math.sqrt(params.channel.noise_var) * rng.standard_normal((i.size, n))
    z = (C[i] + noise.astype(np.float32))
    cn = np.einsum("ij,ij->i", C, C)
    out = np.empty(i.size, dtype=np.int64)
    for s in range(0, i.size, chunk):
        zs = z[s:s + chunk]
        best = np.full(zs.shape[0], np.inf, dtype=np.float32)
        arg = np.zeros(zs.shape[0], dtype=np.int64)
        for c in range(0, N1, cb_chunk):
            d = cn[None, c:c + cb_chunk] - 2 * zs @ C[c:c + cb_chunk].T
            a = d.argmin(1)
            v = d[np.arange(a.size), a]
            upd = v < best
            best[upd] = v[upd]
            arg[upd] = a[upd] + c
        out[s:s + chunk] = arg
    return out


def transmit_index(i: int, params: SchemeParams) -> int:
    return int(transmit_batch(np.array([i]), params)[0])


# ---------------------------------------------------------------- decoder

def decode_batch(y: np.ndarray, i_tilde: np.ndarray, codebook: Codebook,
                 params: SchemeParams):
    """Returns ``(L, n_candidates)``; L is -1 unless exactly one j passes."""
    y = np.atleast_2d(np.asarray(y))
    n = int(params.n)
    target = np.einsum("ux,xy->uy", params.aux, params.source.channel)
    rows = codebook.sequences[np.asarray(i_tilde)]  # T, N2, n
    nu, ny = target.shape
    cnt = np.stack([np.stack([((rows == a) & (y[:, None, :] == b)).sum(-1)
                              for b in range(ny)], -1) for a in range(nu)], -2)
    ok = np.all(np.abs(cnt / n - target) <= params.delta + 1e-12, axis=(-2, -1))
    nok = ok.sum(1)
    j = ok.argmax(1)
    L = np.where(nok == 1, np.asarray(i_tilde) * codebook.N2 + j, CONST)
    return L, nok


def terminal_b_decode(y_seq, i_tilde: int, codebook: Codebook, params: SchemeParams):
    L, _ = decode_batch(np.asarray(y_seq)[None], np.array([i_tilde]), codebook, params)
    k = int(L[0])
    return None if k == CONST else (k // codebook.N2, k % codebook.N2)


# ------------------------------------------------------------- simulation

def draw_source(params: SchemeParams) -> tuple[np.ndarray, np.ndarray]:
    """i.i.d. (x, y) blocks of shape (trials, n)."""
    rng = np.random.default_rng([int(params.seed), 1])
    t = params.source.table
    flat = rng.choice(t.size, size=(int(params.trials), int(params.n)), p=t.ravel())
    return (flat // t.shape[1]).astype(np.uint8), (flat % t.shape[1]).astype(np.uint8)


def run_simulation(params: SchemeParams, codebook: Codebook | None = None) -> SimReport:
    """Encode, transmit and decode ``trials`` source blocks and tally."""
    if codebook is None:
        codebook = build_codebooks(params)
    x, y = draw_source(params)
    K = encode_batch(x, codebook, params)
    i = np.where(K >= 0, K // codebook.N2, 0)
    i_t = transmit_batch(i, params)
    L, nok = decode_batch(y, i_t, codebook, params)
    T = int(params.trials)
    miss = K != L
    k = int(miss.sum())
    iux, iuy = params.info
    return SimReport(
        est_mismatch=k / T,
        mismatch_ci=wilson_interval(k, T),
        est_entropy_rate=entropy_rate_estimate(K, int(params.n)),
        channel_error_rate=float(np.mean(i_t != i)),
        trials=T,
        n=int(params.n),
        delta=float(params.delta),
        N1=codebook.N1,
        N2=codebook.N2,
        fallback_rate=float(np.mean(K == CONST)),
        ambiguity_rate=float(np.mean(nok >= 2)),
        decode_mismatch_rate=float(np.mean(miss & (i_t == i))),
        extra={"i_ux": iux, "i_uy": iuy},
    )
