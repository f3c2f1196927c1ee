"""Finite-size Monte Carlo simulation of the two-cell downlink.

Channels, feedback (analog MMSE or RVQ), RCI-type precoders for joint
(MCP), coordinated (CBf) and per-cell (SCP) transmission, and the exact
per-user SINRs they produce on the true channels.

Array conventions
-----------------
A channel set is a complex array ``h`` of shape ``(2, K, 2, N)``:
``h[j, k, i]`` is the row vector from BS ``i`` to user ``k`` of cell ``j``.
Stacking users cell by cell gives the ``2K x 2N`` network matrix used by
joint processing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from threadpoolctl import threadpool_limits

SCHEMES = ("mcp", "cbf", "scp")
RVQ_MODES = ("statistical", "explicit")
EXPLICIT_MAX_BITS = 24
NOISE_VAR = 1.0  # downlink noise variance
UPLINK_NOISE_VAR = 1.0


@dataclass(frozen=True)
class AnalogFeedback:
    nu: float
    gamma_u: float
    kappa: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu!r}")


@dataclass(frozen=True)
class RvqFeedback:
    bd_bar: float
    bc_bar: float
    mode: str = "statistical"

    def __post_init__(self):
        if self.bd_bar < 0 or self.bc_bar < 0:
            raise ValueError("bit budgets must be nonnegative")
        if self.mode not in RVQ_MODES:
            raise ValueError(f"unknown RVQ mode {self.mode!r}")


@dataclass(frozen=True)
class SimConfig:
    n_antennas: int
    n_users: int
    epsilon: float
    gamma_d: float
    scheme: str
    feedback: AnalogFeedback | RvqFeedback
    alpha: float
    n_realizations: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_antennas < 2 or self.n_users < 1:
            raise ValueError("need N >= 2 antennas and K >= 1 users per cell")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def beta(self) -> float:
        return self.n_users / self.n_antennas


@dataclass
class ChannelSet:
    h: np.ndarray  # (2, K, 2, N)
    epsilon: float

    def stacked(self) -> np.ndarray:
        two, k, _, n = self.h.shape
        return self.h.reshape(2 * k, 2 * n)


@dataclass
class EstimateSet:
    h_hat: np.ndarray  # same layout as ChannelSet.h
    tau2: np.ndarray | None = None  # (2, K, 2), RVQ only

    def stacked(self) -> np.ndarray:
        two, k, _, n = self.h_hat.shape
        return self.h_hat.reshape(2 * k, 2 * n)


@dataclass
class Precoder:
    """Unit-scale beamformers and their power scalings.

    ``w`` has one ``(n_tx, K)`` block per transmitting unit: a single
    ``2N x 2K`` block for joint processing, or two ``N x K`` blocks (one per
    BS, own users only) otherwise. ``c2`` holds the matching squared scales.
    """

    scheme: str
    w: list[np.ndarray]
    c2: list[float]


@dataclass
class SinrReport:
    per_user_sinr: np.ndarray  # (K, 2)
    sum_rate: float
    limit_sinr: float = float("nan")
    normalized_diff: float = float("nan")


def alpha_from_rho(scheme: str, feedback, epsilon: float, n_antennas: int, rho: float) -> float:
    """Raw regularization for the precoder from the normalised one.

    Joint processing normalises by the total estimate variance of a user's
    stacked channel; coordinated and per-cell processing use ``alpha/N``.
    Per-cell processing with analog feedback normalises by the direct
    estimate variance, matching joint processing with no cross feedback.
    """
    if scheme == "mcp":
        if isinstance(feedback, AnalogFeedback):
            w_d, w_c = analog_estimate_variances(epsilon, feedback)
            return n_antennas * (w_d + w_c) * rho
        return n_antennas * (1.0 + epsilon) * rho
    if scheme == "scp" and isinstance(feedback, AnalogFeedback):
        w_d, _ = analog_estimate_variances(epsilon, feedback)
        return n_antennas * w_d * rho
    return n_antennas * rho


def analog_estimate_variances(epsilon: float, fb: AnalogFeedback) -> tuple[float, float]:
    gb = 2.0 * fb.gamma_u * fb.kappa * (1.0 + epsilon)
    w_d = 1.0 - 1.0 / (1.0 + fb.nu * gb)
    w_c = epsilon - epsilon / (1.0 + (1.0 - fb.nu) * gb)
    return w_d, w_c


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one realization, fixed by ``(seed, index)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _cn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    s = math.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# ------------------------------------------------------------ channels ------


def draw_channels(cfg: SimConfig, rng: np.random.Generator) -> ChannelSet:
    k, n = cfg.n_users, cfg.n_antennas
    z = _cn(rng, (2, k, 2, n))
    scale = np.full((2, 1, 2, 1), math.sqrt(cfg.epsilon))
    scale[0, 0, 0, 0] = scale[1, 0, 1, 0] = 1.0
    return ChannelSet(z * scale, cfg.epsilon)


def _direct_mask() -> np.ndarray:
    """``(2, 1, 2, 1)`` boolean mask of direct links (cell index == BS index)."""
    m = np.zeros((2, 1, 2, 1), dtype=bool)
    m[0, 0, 0, 0] = m[1, 0, 1, 0] = True
    return m


# ------------------------------------------------------------- analog -------


def analog_noise(ch: ChannelSet, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance uplink noise, one sample per channel coefficient."""
    return _cn(rng, ch.h.shape)


def analog_feedback_estimate(
    ch: ChannelSet,
    nu: float,
    gamma_u: float,
    kappa: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
    uplink_noise_var: float = UPLINK_NOISE_VAR,
) -> EstimateSet:
    """Per-coefficient MMSE estimates from analog uplink feedback.

    Each coefficient ``b`` is sent as ``sqrt(lam)*b`` and received on all
    ``2N`` BS antennas through ``p = [1_N; sqrt(eps) 1_N]``. Projecting the
    received vector on ``p`` is sufficient, leaving the scalar observation
    ``r = sqrt(lam)*b + n`` with ``n ~ CN(0, sigma_u^2/|p|^2)`` and estimate
    ``sqrt(lam)*var_b*|p|^2*r / (sigma_u^2 + lam*var_b*|p|^2)``.

    ``noise`` (unit variance, shape of ``ch.h``) lets callers reuse the
    same draws across different splits.
    """
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must lie in [0, 1], got {nu!r}")
    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise is required")
        noise = analog_noise(ch, rng)
    h = ch.h
    n = h.shape[-1]
    eps = ch.epsilon
    p_norm2 = n * (1.0 + eps)
    p_u = gamma_u * uplink_noise_var / n  # per-channel-use uplink power
    direct = _direct_mask()

    lam_d = 2.0 * nu * kappa * p_u
    var_b = np.where(direct, 1.0, eps)
    if eps > 0:
        lam = np.where(direct, lam_d, 2.0 * (1.0 - nu) * kappa * p_u / eps)
    else:
        lam = np.where(direct, lam_d, 0.0)
    snr = lam * var_b * p_norm2  # lam*var_b*|p|^2
    r = np.sqrt(lam) * h + math.sqrt(uplink_noise_var / p_norm2) * noise
    gain = np.sqrt(lam) * var_b * p_norm2 / (uplink_noise_var + snr)
    return EstimateSet(gain * r)


# ---------------------------------------------------------------- RVQ -------


def integer_bits(bd_bar: float, bc_bar: float, n_antennas: int) -> tuple[int, int]:
    """Integer bit counts for the direct and cross channels.

    The total is rounded first; the direct share is rounded half up so that
    ties favour the direct channel, and the cross channel gets the rest.
    """
    b_t = int(math.floor((bd_bar + bc_bar) * n_antennas + 0.5))
    b_d = min(b_t, int(math.floor(bd_bar * n_antennas + 0.5)))
    return b_d, b_t - b_d


def rvq_distortion(u: np.ndarray, bits, n: int) -> np.ndarray:
    """Inverse CDF of the minimum of ``2**bits`` Beta(N-1, 1) variables.

    ``P(tau2 > t) = (1 - t**(N-1))**(2**B)`` so
    ``tau2 = (1 - U**(2**-B))**(1/(N-1))``, evaluated with ``expm1`` to stay
    accurate when ``2**-B`` is tiny.
    """
    bits = np.asarray(bits, dtype=float)
    inner = -np.expm1(np.log(u) * np.exp2(-bits))
    return inner ** (1.0 / (n - 1))


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def rvq_reconstruct(h: np.ndarray, tau2: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Estimate with magnitude ``|h|`` at angle ``asin(tau)`` from ``h``.

    ``v`` is a standard complex Gaussian draw; its component orthogonal to
    ``h`` sets the (isotropic) direction of the error.
    """
    norm = np.linalg.norm(h, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    u = h / safe
    z = v - np.sum(v * u.conj(), axis=-1, keepdims=True) * u
    z = _unit_rows(z)
    t2 = np.asarray(tau2)[..., None]
    u_hat = np.sqrt(1.0 - t2) * u + np.sqrt(t2) * z
    return norm * u_hat


def rvq_quantize_statistical(h: np.ndarray, bits, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Quantize the rows of ``h`` by sampling the RVQ distortion law."""
    h = np.asarray(h)
    n = h.shape[-1]
    u = 1.0 - rng.random(h.shape[:-1])  # in (0, 1]
    tau2 = rvq_distortion(u, bits, n)
    v = _cn(rng, h.shape)
    return rvq_reconstruct(h, tau2, v), tau2


def rvq_quantize_explicit(
    h: np.ndarray, bits: int, rng: np.random.Generator, chunk: int = 1 << 16
) -> tuple[np.ndarray, np.ndarray]:
    """Quantize the rows of ``h`` against fresh random codebooks.

    Each row gets its own codebook of ``2**bits`` isotropic unit vectors,
    generated in chunks. The chosen codeword is rotated by a common phase so
    that ``h @ u_hat^H`` is real and positive; the phase carries no
    direction information and the error model assumes it.
    """
    bits = int(bits)
    if bits > EXPLICIT_MAX_BITS:
        raise ValueError(
            f"explicit RVQ is capped at {EXPLICIT_MAX_BITS} bits (got {bits}); "
            "use the statistical quantizer for larger budgets"
        )
    h = np.asarray(h)
    n = h.shape[-1]
    flat = h.reshape(-1, n)
    size = 1 << bits
    best_val = np.full(flat.shape[0], -1.0)
    best_vec = np.zeros_like(flat)
    per_block = max(1, min(size, chunk))
    row_block = max(1, chunk // per_block)
    for r0 in range(0, flat.shape[0], row_block):
        hb = flat[r0 : r0 + row_block]
        nb = hb.shape[0]
        done = 0
        while done < size:
            m = min(per_block, size - done)
            cb = _unit_rows(_cn(rng, (nb, m, n)))
            proj = np.abs(np.einsum("rn,rmn->rm", hb, cb.conj()))
            j = np.argmax(proj, axis=1)
            val = proj[np.arange(nb), j]
            better = val > best_val[r0 : r0 + nb]
            best_val[r0 : r0 + nb][better] = val[better]
            best_vec[r0 : r0 + nb][better] = cb[np.arange(nb), j][better]
            done += m
    norm = np.linalg.norm(flat, axis=1)
    inner = np.sum(flat * best_vec.conj(), axis=1)  # h u^H
    phase = np.where(np.abs(inner) > 0, inner / np.maximum(np.abs(inner), 1e-300), 1.0)
    u_hat = best_vec * phase[:, None]
    cos2 = np.abs(inner) ** 2 / np.where(norm > 0, norm**2, 1.0)
    tau2 = np.clip(1.0 - cos2, 0.0, 1.0)
    h_hat = norm[:, None] * u_hat
    return h_hat.reshape(h.shape), tau2.reshape(h.shape[:-1])


@dataclass
class RvqDraws:
    """Randomness behind one realization of statistical RVQ feedback.

    Reusing it across bit splits gives common random numbers: the
    distortion of each link is a monotone function of ``u`` and the error
    direction comes from ``v``.
    """

    u: np.ndarray  # (2, K, 2)
    v: np.ndarray  # (2, K, 2, N)


def rvq_draws(ch: ChannelSet, rng: np.random.Generator) -> RvqDraws:
    return RvqDraws(1.0 - rng.random(ch.h.shape[:-1]), _cn(rng, ch.h.shape))


def rvq_feedback_estimate(
    ch: ChannelSet,
    b_d: int,
    b_c: int,
    rng: np.random.Generator | None = None,
    mode: str = "statistical",
    draws: RvqDraws | None = None,
) -> EstimateSet:
    """Quantize every direct link with ``b_d`` bits and cross link with ``b_c``."""
    h = ch.h
    n = h.shape[-1]
    bits = np.where(_direct_mask()[..., 0], b_d, b_c) * np.ones(h.shape[:-1])
    if mode == "statistical":
        if draws is None:
            draws = rvq_draws(ch, rng)
        tau2 = rvq_distortion(draws.u, bits, n)
        return EstimateSet(rvq_reconstruct(h, tau2, draws.v), tau2)
    if mode != "explicit":
        raise ValueError(f"unknown RVQ mode {mode!r}")
    h_hat = np.empty_like(h)
    tau2 = np.empty(h.shape[:-1])
    for j in range(2):
        for i in range(2):
            b = b_d if i == j else b_c
            h_hat[j, :, i], tau2[j, :, i] = rvq_quantize_explicit(h[j, :, i], b, rng)
    return EstimateSet(h_hat, tau2)


# ----------------------------------------------------------- precoders ------


def _rci_columns(h_hat: np.ndarray, alpha: float, cols: np.ndarray | None = None) -> np.ndarray:
    """``(H^H H + alpha I)^{-1} H^H`` restricted to the given user rows."""
    gram = h_hat.conj().T @ h_hat
    gram[np.diag_indices_from(gram)] += alpha
    factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    rhs = h_hat.conj().T if cols is None else h_hat[cols].conj().T
    return linalg.cho_solve(factor, rhs, check_finite=False)


def build_mcp_precoder(est: EstimateSet, alpha: float, p_total: float) -> Precoder:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    w = _rci_columns(est.stacked(), alpha)
    fro2 = float(np.sum(np.abs(w) ** 2))
    c2 = p_total / fro2 if fro2 > 0 else 0.0
    return Precoder("mcp", [w], [c2])


def build_cbf_precoder_bs(local: np.ndarray, own: np.ndarray, alpha: float, power: float) -> tuple[np.ndarray, float]:
    """Coordinated beamformers at one BS from its local CSI only.

    ``local`` holds the estimated channels from this BS to all ``2K``
    users (rows), ``own`` the row indices of the users it serves. User
    ``u`` gets ``(alpha I + sum_{l != u} h_l^H h_l)^{-1} h_u^H``, computed
    from the full Gram inverse by a rank-one downdate.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    v = _rci_columns(local, alpha, own)  # M^{-1} h_u^H
    q = np.real(np.einsum("kn,nk->k", local[own], v))  # h_u M^{-1} h_u^H
    w = v / (1.0 - q)[None, :]
    fro2 = float(np.sum(np.abs(w) ** 2))
    c2 = power / fro2 if fro2 > 0 else 0.0
    return w, c2


def build_cbf_precoder(est: EstimateSet, alpha: float, power: float) -> Precoder:
    k = est.h_hat.shape[1]
    ws, cs = [], []
    for j in range(2):
        local = est.h_hat[:, :, j, :].reshape(2 * k, -1)
        own = np.arange(j * k, (j + 1) * k)
        w, c2 = build_cbf_precoder_bs(local, own, alpha, power)
        ws.append(w)
        cs.append(c2)
    return Precoder("cbf", ws, cs)


def build_scp_precoder(est: EstimateSet, alpha: float, power: float) -> Precoder:
    """Per-cell RCI on own users' direct estimates."""
    ws, cs = [], []
    for j in range(2):
        direct = est.h_hat[j, :, j, :]
        w = _rci_columns(direct, alpha)
        fro2 = float(np.sum(np.abs(w) ** 2))
        ws.append(w)
        cs.append(power / fro2 if fro2 > 0 else 0.0)
    return Precoder("scp", ws, cs)


def build_precoder(cfg: SimConfig, est: EstimateSet) -> Precoder:
    p = cfg.gamma_d * NOISE_VAR
    if cfg.scheme == "mcp":
        return build_mcp_precoder(est, cfg.alpha, 2.0 * p)
    if cfg.scheme == "cbf":
        return build_cbf_precoder(est, cfg.alpha, p)
    return build_scp_precoder(est, cfg.alpha, p)


# --------------------------------------------------------------- SINR -------


def gain_matrix(ch: ChannelSet, pre: Precoder) -> np.ndarray:
    """Received amplitude of every stream at every user, ``(2K, 2K)``.

    Entry ``[u, s]`` is ``c_s * h_u w_s``, with users and streams both
    ordered cell by cell.
    """
    if pre.scheme == "mcp":
        return math.sqrt(pre.c2[0]) * (ch.stacked() @ pre.w[0])
    k, n = ch.h.shape[1], ch.h.shape[-1]
    blocks = []
    for j in range(2):
        h_from_j = ch.h[:, :, j, :].reshape(2 * k, n)
        blocks.append(math.sqrt(pre.c2[j]) * (h_from_j @ pre.w[j]))
    return np.concatenate(blocks, axis=1)


def compute_sinr(
    ch: ChannelSet, pre: Precoder, limit_sinr: float | None = None, noise_var: float = NOISE_VAR
) -> SinrReport:
    g2 = np.abs(gain_matrix(ch, pre)) ** 2
    sig = np.diag(g2).copy()
    interf = g2.sum(axis=1) - sig
    sinr = sig / (interf + noise_var)
    k = ch.h.shape[1]
    rate = float(np.sum(np.log2(1.0 + sinr)))
    rep = SinrReport(sinr.reshape(2, k).T.copy(), rate)
    if limit_sinr is not None:
        rep.limit_sinr = float(limit_sinr)
        rep.normalized_diff = normalized_diff(rate, ch.h.shape[-1], k / ch.h.shape[-1], limit_sinr)
    return rep


def normalized_diff(mean_sum_rate: float, n_antennas: int, beta: float, limit_sinr: float) -> float:
    """``(E[R]/(2N) - beta*log2(1+SINR_inf)) / (E[R]/(2N))``."""
    fs = mean_sum_rate / (2.0 * n_antennas)
    return (fs - beta * math.log2(1.0 + limit_sinr)) / fs


# ---------------------------------------------------------- simulation ------


def estimate_channels(cfg: SimConfig, ch: ChannelSet, rng: np.random.Generator) -> EstimateSet:
    fb = cfg.feedback
    if isinstance(fb, AnalogFeedback):
        return analog_feedback_estimate(ch, fb.nu, fb.gamma_u, fb.kappa, rng=rng)
    b_d, b_c = integer_bits(fb.bd_bar, fb.bc_bar, cfg.n_antennas)
    return rvq_feedback_estimate(ch, b_d, b_c, rng=rng, mode=fb.mode)


def run_realization(cfg: SimConfig, index: int) -> SinrReport:
    rng = realization_rng(cfg.seed, index)
    ch = draw_channels(cfg, rng)
    est = estimate_channels(cfg, ch, rng)
    return compute_sinr(ch, build_precoder(cfg, est))


@dataclass
class SimResult:
    config: SimConfig
    sum_rates: np.ndarray  # per realization
    mean_sinr: float
    limit_sinr: float = float("nan")
    normalized_diff: float = float("nan")
    per_user_sinr: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_sum_rate(self) -> float:
        return float(np.mean(self.sum_rates))

    @property
    def sem_sum_rate(self) -> float:
        if len(self.sum_rates) < 2:
            return float("nan")
        return float(np.std(self.sum_rates, ddof=1) / math.sqrt(len(self.sum_rates)))


def parallel_map(fn, items, threads: int = 1) -> list:
    """Order-preserving map; each worker runs single-threaded BLAS."""
    items = list(items)

    def call(x):
        with threadpool_limits(limits=1):
            return fn(x)

    if threads <= 1 or len(items) <= 1:
        return [call(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(call, items))


def simulate(cfg: SimConfig, limit_sinr: float | None = None, threads: int = 1) -> SimResult:
    reps = parallel_map(lambda i: run_realization(cfg, i), range(cfg.n_realizations), threads)
    rates = np.array([r.sum_rate for r in reps])
    sinrs = np.stack([r.per_user_sinr for r in reps])
    res = SimResult(cfg, rates, float(np.mean(sinrs)), per_user_sinr=sinrs)
    if limit_sinr is not None:
        res.limit_sinr = float(limit_sinr)
        res.normalized_diff = normalized_diff(res.mean_sum_rate, cfg.n_antennas, cfg.beta, limit_sinr)
    return res


# --------------------------------------------------------- grid search ------


@dataclass
class GridSearchResult:
    grid: np.ndarray  # candidate allocations (nu, or integer direct bits)
    reference: float  # large-system allocation
    rates: np.ndarray  # (realizations, len(grid))
    reference_rates: np.ndarray  # (realizations,)
    best_index: np.ndarray  # per-realization argmax into grid

    @property
    def best_rates(self) -> np.ndarray:
        return self.rates[np.arange(len(self.best_index)), self.best_index]

    @property
    def best_allocation(self) -> np.ndarray:
        return self.grid[self.best_index]

    @property
    def normalized_gap(self) -> float:
        """``E[R_fs - R_ref] / E[R_fs]`` with the per-realization best ``R_fs``."""
        best = self.best_rates
        return float(np.mean(best - self.reference_rates) / np.mean(best))


def _grid_realization(cfg: SimConfig, index: int, grid: np.ndarray, reference) -> tuple[np.ndarray, float]:
    rng = realization_rng(cfg.seed, index)
    ch = draw_channels(cfg, rng)
    fb = cfg.feedback
    if isinstance(fb, AnalogFeedback):
        noise = analog_noise(ch, rng)

        def rate(nu):
            est = analog_feedback_estimate(ch, float(nu), fb.gamma_u, fb.kappa, noise=noise)
            return compute_sinr(ch, build_precoder(cfg, est)).sum_rate

    else:
        draws = rvq_draws(ch, rng)
        b_t = sum(integer_bits(fb.bd_bar, fb.bc_bar, cfg.n_antennas))

        def rate(b_d):
            b_d = int(b_d)
            est = rvq_feedback_estimate(ch, b_d, b_t - b_d, draws=draws)
            return compute_sinr(ch, build_precoder(cfg, est)).sum_rate

    rates = np.array([rate(x) for x in grid])
    return rates, rate(reference)


def grid_search_feedback_fs(cfg: SimConfig, resolution=None, reference=None, threads: int = 1) -> GridSearchResult:
    """Per-realization best feedback split versus a reference split.

    Analog feedback scans ``nu`` over ``resolution`` (an int number of
    uniform points on ``(0, 1]`` or an explicit array); RVQ scans every
    integer direct-bit count ``0..B_t``. The precoder regularization
    ``cfg.alpha`` is held fixed and the same channel and feedback
    randomness is reused for every candidate in a realization. The
    reference split (default: the one in ``cfg.feedback``) is added to the
    grid so the finite-size best is never worse than it.
    """
    fb = cfg.feedback
    if isinstance(fb, AnalogFeedback):
        if reference is None:
            reference = fb.nu
        if resolution is None:
            resolution = 101
        if np.ndim(resolution) == 0:
            grid = np.linspace(0.0, 1.0, int(resolution))[1:] if int(resolution) > 1 else np.array([1.0])
        else:
            grid = np.asarray(resolution, dtype=float)
        grid = np.unique(np.append(grid, float(reference)))
    else:
        b_d, b_c = integer_bits(fb.bd_bar, fb.bc_bar, cfg.n_antennas)
        if reference is None:
            reference = b_d
        if resolution is None or np.ndim(resolution) == 0:
            grid = np.arange(0, b_d + b_c + 1)
        else:
            grid = np.asarray(resolution, dtype=int)
        grid = np.unique(np.append(grid, int(reference)))
    out = parallel_map(lambda i: _grid_realization(cfg, i, grid, reference), range(cfg.n_realizations), threads)
    rates = np.stack([o[0] for o in out])
    ref = np.array([o[1] for o in out])
    return GridSearchResult(grid, float(reference), rates, ref, np.argmax(rates, axis=1))
