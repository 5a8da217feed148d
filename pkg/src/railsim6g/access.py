"""Grant-free massive access for railway IoT devices.

Devices (rail-side sensors plus, when a train passes, onboard devices)
transmit non-orthogonal pilots; the receiver solves ``y = P h + n`` for the
sparse activity/channel vector ``h``. Framed transmissions with per-user data
lengths are recovered by a backward-sparsity pipeline that checks decoded
data against a CRC and projects symbols onto the constellation.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CHECK_BITS = 8
QPSK_SCALE = 1 / np.sqrt(2)


@dataclass(frozen=True)
class AccessConfig:
    n_rail: int = 40
    n_onboard: int = 60
    pilot_len: int = 32
    activity_prob: float = 0.06
    train_present_prob: float = 0.5
    snr_db: float = 20.0

    def __post_init__(self):
        if self.n_rail < 0 or self.n_onboard < 0 or self.n_users < 1:
            raise ValueError("need at least one potential user")
        if not 1 <= self.pilot_len < self.n_users:
            raise ValueError("pilot length must satisfy 1 <= l_p < N (compressed regime)")
        for name in ("activity_prob", "train_present_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def n_users(self) -> int:
        return self.n_rail + self.n_onboard

    @property
    def noise_var(self) -> float:
        # per-entry noise such that each user's pilot energy over noise equals the SNR
        return 10 ** (-self.snr_db / 10) / self.pilot_len


@dataclass
class SparseProblem:
    pilots: np.ndarray         # (l_p, N)
    received: np.ndarray       # (l_p,)
    support: np.ndarray        # sorted active indices
    gains: np.ndarray          # (N,), zero off support
    noise: np.ndarray          # (l_p,)
    noise_var: float
    train_present: bool = False

    @property
    def sparsity(self) -> int:
        return len(self.support)


@dataclass
class RecoveryResult:
    support: np.ndarray
    gains: np.ndarray
    nmse: float = float("nan")
    residual_history: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)
    noise_history: list[float] = field(default_factory=list)
    iterations: int = 0
    diverged: bool = False
    decoded_bits: dict[int, np.ndarray] = field(default_factory=dict)
    verified: list[int] = field(default_factory=list)
    recovery_ratio: float = float("nan")


def nmse(truth: np.ndarray, estimate: np.ndarray) -> float:
    """``||h - h_hat||^2 / ||h||^2``; falls back to ``||h_hat||^2`` when h = 0."""
    err = float(np.sum(np.abs(truth - estimate) ** 2))
    ref = float(np.sum(np.abs(truth) ** 2))
    return err / ref if ref > 0 else err


def _cn(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_activity(config: AccessConfig, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """Active user indices under bimodal train-passing activity.

    Rail-side users ``0..N_r-1`` are always present; onboard users only when a
    train passes. Each present user is active with ``activity_prob``.
    """
    present = bool(rng.random() < config.train_present_prob)
    active = rng.random(config.n_users) < config.activity_prob
    if not present:
        active[config.n_rail:] = False
    return np.flatnonzero(active), present


def gen_problem(config: AccessConfig, rng: np.random.Generator) -> SparseProblem:
    support, present = draw_activity(config, rng)
    lp, N = config.pilot_len, config.n_users
    pilots = _cn(rng, (lp, N), 1.0 / lp)
    gains = np.zeros(N, dtype=complex)
    gains[support] = _cn(rng, len(support), 1.0)
    noise = _cn(rng, lp, config.noise_var)
    return SparseProblem(pilots, pilots @ gains + noise, support, gains, noise,
                         config.noise_var, present)


def with_snr(problem: SparseProblem, snr_db: float) -> SparseProblem:
    """Same draw at another SNR: the noise realisation is rescaled, everything else kept."""
    lp = problem.pilots.shape[0]
    var = 10 ** (-snr_db / 10) / lp
    scale = np.sqrt(var / problem.noise_var) if problem.noise_var > 0 else 0.0
    noise = problem.noise * scale
    return SparseProblem(problem.pilots, problem.pilots @ problem.gains + noise,
                         problem.support, problem.gains, noise, var, problem.train_present)


# ---------------------------------------------------------------------------
# Greedy pursuits

def _ls(P: np.ndarray, y: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    cols = list(cols)
    if not cols:
        return np.zeros(0, dtype=complex)
    return np.linalg.lstsq(P[:, cols], y, rcond=None)[0]


def _result(problem: SparseProblem, support: Sequence[int], coef: np.ndarray, **kw) -> RecoveryResult:
    """Scatter ``coef`` (aligned with ``support``) into a full-length estimate."""
    gains = np.zeros(problem.pilots.shape[1], dtype=complex)
    idx = np.asarray(list(support), dtype=int)
    if len(idx):
        gains[idx] = coef
    return RecoveryResult(np.sort(idx), gains, nmse(problem.gains, gains), **kw)


def _check_k(problem: SparseProblem, k: int) -> None:
    if not 1 <= k <= problem.pilots.shape[0]:
        raise ValueError(f"sparsity {k} outside [1, l_p={problem.pilots.shape[0]}]")


def _top(values: np.ndarray, k: int, exclude: Sequence[int] = ()) -> list[int]:
    mag = np.abs(values).astype(float)
    if len(exclude):
        mag[list(exclude)] = -np.inf
    # stable descending order: ties go to the lower index
    order = np.argsort(-mag, kind="stable")
    return [int(i) for i in order[:k] if np.isfinite(mag[i])]


def solve_omp(problem: SparseProblem, sparsity: int) -> RecoveryResult:
    """Orthogonal matching pursuit with a known sparsity."""
    _check_k(problem, sparsity)
    P, y = problem.pilots, problem.received
    chosen: list[int] = []
    r = y.copy()
    hist = [float(np.linalg.norm(r))]
    coef = np.zeros(0, dtype=complex)
    for _ in range(sparsity):
        chosen += _top(P.conj().T @ r, 1, chosen)
        coef = _ls(P, y, chosen)
        r = y - P[:, chosen] @ coef
        hist.append(float(np.linalg.norm(r)))
    return _result(problem, chosen, coef, residual_history=hist, iterations=sparsity)


def solve_sp(problem: SparseProblem, sparsity: int, max_iter: int = 50) -> RecoveryResult:
    """Subspace pursuit."""
    _check_k(problem, sparsity)
    P, y = problem.pilots, problem.received
    K = sparsity
    T = sorted(_top(P.conj().T @ y, K))
    coef = _ls(P, y, T)
    r = y - P[:, T] @ coef
    hist = [float(np.linalg.norm(r))]
    it = 0
    for it in range(1, max_iter + 1):
        merged = sorted(set(T) | set(_top(P.conj().T @ r, K)))
        wide = _ls(P, y, merged)
        T_new = sorted(merged[i] for i in _top(wide, K))
        coef_new = _ls(P, y, T_new)
        r_new = y - P[:, T_new] @ coef_new
        if np.linalg.norm(r_new) >= hist[-1]:
            break
        T, coef, r = T_new, coef_new, r_new
        hist.append(float(np.linalg.norm(r)))
    return _result(problem, T, coef, residual_history=hist, iterations=it)


def solve_cosamp(problem: SparseProblem, sparsity: int, max_iter: int = 50,
                 tol: float = 1e-12) -> RecoveryResult:
    """Compressive sampling matching pursuit."""
    _check_k(problem, sparsity)
    P, y = problem.pilots, problem.received
    K = sparsity
    T: list[int] = []
    coef = np.zeros(0, dtype=complex)
    r = y.copy()
    hist = [float(np.linalg.norm(r))]
    it = 0
    for it in range(1, max_iter + 1):
        merged = sorted(set(T) | set(_top(P.conj().T @ r, 2 * K)))
        wide = _ls(P, y, merged)
        T_new = sorted(merged[i] for i in _top(wide, K))
        coef_new = _ls(P, y, T_new)
        r_new = y - P[:, T_new] @ coef_new
        if np.linalg.norm(r_new) >= hist[-1] and T:
            break
        T, coef, r = T_new, coef_new, r_new
        hist.append(float(np.linalg.norm(r)))
        if hist[-1] <= tol * max(np.linalg.norm(y), 1e-300):
            break
    return _result(problem, T, coef, residual_history=hist, iterations=it)


def _samp_core(P: np.ndarray, y: np.ndarray, step: int, threshold: float,
               forced: Sequence[int] = (), max_size: int | None = None):
    """Stagewise sparsity-adaptive pursuit; ``forced`` indices always stay selected."""
    M, N = P.shape
    max_size = min(M, N) if max_size is None else max_size
    forced = sorted(int(i) for i in forced)
    F = list(forced)
    coef = _ls(P, y, F)
    r = y - (P[:, F] @ coef if F else 0)
    hist = [float(np.linalg.norm(r))]
    size = step                     # free atoms beyond the forced set
    while hist[-1] > threshold and len(forced) + size <= max_size:
        free = [i for i in F if i not in forced]
        cand = _top(P.conj().T @ r, size, F)
        C = sorted(set(F) | set(cand))
        wide = _ls(P, y, C)
        mag = {c: abs(v) for c, v in zip(C, wide)}
        pool = [c for c in C if c not in forced]
        keep = sorted(pool, key=lambda c: (-mag[c], c))[:size]
        F_new = sorted(set(forced) | set(keep))
        coef_new = _ls(P, y, F_new)
        r_new = y - P[:, F_new] @ coef_new
        norm = float(np.linalg.norm(r_new))
        if norm >= hist[-1]:
            if len(free) >= size and size + step + len(forced) > max_size:
                break
            size += step            # stagnation: enlarge the stage
            continue
        F, coef, r = F_new, coef_new, r_new
        hist.append(norm)
    return F, coef, hist


def samp_threshold(noise_var: float, n_obs: int, y: np.ndarray) -> float:
    """Stop once the residual falls to the expected noise level (or numerically zero).

    ``y`` is the original observation: after interference cancellation the
    residual itself must not set the numerical floor.
    """
    return max(np.sqrt(noise_var * n_obs), 1e-9 * float(np.linalg.norm(y)))


def solve_samp(problem: SparseProblem, step: int = 1, threshold: float | None = None) -> RecoveryResult:
    """Sparsity adaptive matching pursuit: sparsity is not given."""
    if step < 1:
        raise ValueError("SAMP step must be >= 1")
    P, y = problem.pilots, problem.received
    if threshold is None:
        threshold = samp_threshold(problem.noise_var, P.shape[0], y)
    F, coef, hist = _samp_core(P, y, step, threshold)
    return _result(problem, F, coef, residual_history=hist, iterations=len(hist) - 1)


# ---------------------------------------------------------------------------
# Convex / message-passing solvers

def _soft(u: np.ndarray, t: float) -> np.ndarray:
    mag = np.abs(u)
    scale = np.where(mag > t, 1 - t / np.where(mag > 0, mag, 1), 0.0)
    return u * scale


def lasso_objective(P: np.ndarray, y: np.ndarray, h: np.ndarray, lam: float) -> float:
    return 0.5 * float(np.sum(np.abs(y - P @ h) ** 2)) + lam * float(np.sum(np.abs(h)))


def default_lambda(problem: SparseProblem) -> float:
    return 0.01 * float(np.max(np.abs(problem.pilots.conj().T @ problem.received)))


def solve_ista(problem: SparseProblem, lam: float | None = None, iters: int = 500,
               step: float | None = None) -> RecoveryResult:
    """Iterative soft thresholding for ``0.5 ||y - P h||^2 + lam ||h||_1``."""
    P, y = problem.pilots, problem.received
    lip = float(np.linalg.norm(P, 2)) ** 2
    if lam is None:
        lam = default_lambda(problem)
    if lam <= 0:
        if not np.any(y):
            return _result(problem, [], np.zeros(0), iterations=0)
        raise ValueError("lambda must be > 0")
    if step is None:
        step = 0.9 / lip
    if step <= 0 or step > 1 / lip:
        raise ValueError(f"step {step:.4g} outside (0, 1/||P||^2 = {1 / lip:.4g}]")
    h = np.zeros(P.shape[1], dtype=complex)
    obj = [lasso_objective(P, y, h, lam)]
    for _ in range(iters):
        h = _soft(h + step * (P.conj().T @ (y - P @ h)), lam * step)
        obj.append(lasso_objective(P, y, h, lam))
    support = np.flatnonzero(h)
    return RecoveryResult(support, h, nmse(problem.gains, h), objective_history=obj, iterations=iters)


def solve_amp(problem: SparseProblem, iters: int = 50, alpha: float = 1.5,
              damping: float = 0.1, patience: int = 5) -> RecoveryResult:
    """Complex approximate message passing with a soft-threshold denoiser.

    The threshold tracks the effective noise ``||z|| / sqrt(M)``; its history
    is exposed as ``noise_history``. Five consecutive residual increases (or
    any non-finite value) flag divergence and return the last stable estimate.
    """
    if not 0 <= damping < 1:
        raise ValueError("damping must lie in [0, 1)")
    P, y = problem.pilots, problem.received
    M, N = P.shape
    x = np.zeros(N, dtype=complex)
    z = y.copy()
    res = [float(np.linalg.norm(z))]
    tau_hist: list[float] = []
    best = x.copy()
    rising = 0
    diverged = False
    it = 0
    for it in range(1, iters + 1):
        tau = res[-1] / np.sqrt(M)
        tau_hist.append(float(tau))
        if tau == 0.0:
            break
        pseudo = x + P.conj().T @ z
        theta = alpha * tau
        x_new = _soft(pseudo, theta)
        mag = np.abs(pseudo)
        on = mag > theta
        onsager = float(np.sum(2 - theta / mag[on])) / (2 * M)
        x_next = (1 - damping) * x_new + damping * x
        z = y - P @ x_next + onsager * z
        if not (np.all(np.isfinite(x_next)) and np.all(np.isfinite(z))):
            diverged = True
            break
        x = x_next
        res.append(float(np.linalg.norm(z)))
        if res[-1] > res[-2]:
            rising += 1
            if rising >= patience:
                diverged = True
                break
        else:
            rising = 0
            best = x.copy()
    est = best if diverged else x
    support = np.flatnonzero(est)
    return RecoveryResult(support, est, nmse(problem.gains, est), residual_history=res,
                          noise_history=tau_hist, iterations=it, diverged=diverged)


SOLVERS = ("omp", "sp", "cosamp", "ista", "amp", "samp")


def solve(problem: SparseProblem, name: str) -> RecoveryResult:
    """Dispatch by solver name; known-sparsity pursuits are given the true K."""
    k = max(1, problem.sparsity)
    if name == "omp":
        return solve_omp(problem, k)
    if name == "sp":
        return solve_sp(problem, k)
    if name == "cosamp":
        return solve_cosamp(problem, k)
    if name == "ista":
        return solve_ista(problem)
    if name == "amp":
        return solve_amp(problem)
    if name == "samp":
        return solve_samp(problem)
    raise ValueError(f"unknown solver {name!r}; choose from {SOLVERS}")


# ---------------------------------------------------------------------------
# Framed transmissions with data-length diversity

_QPSK_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=int).reshape(-1, 2)
    return QPSK_SCALE * ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1]))


def qpsk_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Nearest-symbol decision; also the projection onto the constellation."""
    symbols = np.asarray(symbols)
    return np.stack([(symbols.real < 0), (symbols.imag < 0)], axis=1).astype(int).reshape(-1)


def crc8(bits: np.ndarray) -> np.ndarray:
    """Low byte of CRC-32 over the packed payload, as 8 bits."""
    value = zlib.crc32(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()) & 0xFF
    return np.unpackbits(np.array([value], dtype=np.uint8))


def crc_ok(bits: np.ndarray, check_bits: int = CHECK_BITS) -> bool:
    if check_bits == 0:
        return True
    if len(bits) <= check_bits:
        return False
    return bool(np.array_equal(crc8(bits[:-check_bits]), bits[-check_bits:]))


@dataclass
class FramedSignal:
    spreading: np.ndarray       # S, (l, N)
    symbols: np.ndarray         # X = H V, (N, J); column 0 carries the pilot symbol 1
    received: np.ndarray        # Y, (l, J)
    gains: np.ndarray           # h, (N,)
    lengths: np.ndarray         # L_k in columns (0 for inactive users)
    bits: dict[int, np.ndarray]
    noise_var: float
    check_bits: int = CHECK_BITS
    constellation: str = "qpsk"

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.lengths)

    @property
    def column_sparsity(self) -> np.ndarray:
        J = self.symbols.shape[1]
        return np.array([int(np.sum(self.lengths > j)) for j in range(J)])


def frame_from_lengths(spreading: np.ndarray, gains: np.ndarray, lengths: Sequence[int],
                       frame_len: int, noise_var: float, rng: np.random.Generator,
                       check_bits: int = CHECK_BITS) -> FramedSignal:
    """Build ``Y = S X + N`` for users with the given data lengths (pilot column included)."""
    lengths = np.asarray(lengths, dtype=int)
    l, N = spreading.shape
    if lengths.shape != (N,) or np.any(lengths < 0) or np.any(lengths > frame_len):
        raise ValueError("one length in [0, frame_len] per user")
    X = np.zeros((N, frame_len), dtype=complex)
    bits = {}
    for k in np.flatnonzero(lengths):
        n_bits = 2 * (lengths[k] - 1)
        if check_bits and n_bits <= check_bits:
            raise ValueError(f"user {k}: {lengths[k]} columns leave no room for payload and CRC")
        payload = rng.integers(0, 2, n_bits - check_bits)
        b = np.concatenate([payload, crc8(payload)]) if check_bits else payload
        bits[int(k)] = b.astype(int)
        X[k, 0] = gains[k]
        X[k, 1:lengths[k]] = gains[k] * qpsk_modulate(b)
    Y = spreading @ X + _cn(rng, (l, frame_len), noise_var)
    return FramedSignal(spreading, X, Y, gains, lengths, bits, noise_var, check_bits)


def gen_frame(config: AccessConfig, rng: np.random.Generator, frame_len: int = 16,
              length_choices: Sequence[int] = (6, 11, 16), check_bits: int = CHECK_BITS) -> FramedSignal:
    """Random framed transmission: bimodal activity, lengths drawn from ``length_choices``."""
    support, _ = draw_activity(config, rng)
    l, N = config.pilot_len, config.n_users
    spreading = _cn(rng, (l, N), 1.0 / l)
    gains = np.zeros(N, dtype=complex)
    gains[support] = _cn(rng, len(support), 1.0)
    lengths = np.zeros(N, dtype=int)
    lengths[support] = rng.choice(np.asarray(length_choices), len(support))
    return frame_from_lengths(spreading, gains, lengths, frame_len, config.noise_var, rng, check_bits)


def _decode_user(est_row: np.ndarray, channel: complex, length: int) -> np.ndarray | None:
    """Bits from estimated ``h v`` entries over columns ``1..length-1``; None if undecodable."""
    if channel == 0 or length < 2 or np.any(est_row[1:length] == 0):
        return None
    return qpsk_demodulate(est_row[1:length] / channel)


def _ratio(frame: FramedSignal, decoded: dict[int, np.ndarray]) -> tuple[float, list[int]]:
    good = [k for k, b in frame.bits.items()
            if k in decoded and decoded[k] is not None and len(decoded[k]) == len(b)
            and np.array_equal(decoded[k], b)]
    K = len(frame.bits)
    return (len(good) / K if K else 1.0), sorted(good)


def recovery_ratio(frame: FramedSignal, decoded: dict[int, np.ndarray]) -> float:
    """``mu_data``: share of active users whose data is recovered bit-exactly."""
    return _ratio(frame, decoded)[0]


def _column_supports(frame: FramedSignal, Y: np.ndarray, step: int, nested: bool,
                     exclude: Sequence[int] = ()) -> list[list[int]]:
    S = frame.spreading
    J = Y.shape[1]
    keep = np.setdiff1d(np.arange(S.shape[1]), np.asarray(exclude, dtype=int))
    sub = S[:, keep]
    supports: list[list[int]] = [[] for _ in range(J)]
    forced: list[int] = []
    for j in range(J - 1, -1, -1):
        thr = samp_threshold(frame.noise_var, S.shape[0], frame.received[:, j])
        F, _, _ = _samp_core(sub, Y[:, j], step, thr, forced if nested else ())
        supports[j] = sorted(int(keep[i]) for i in F)
        if nested:
            forced = F
    return supports


def backward_sparsity_estimate(frame: FramedSignal, step: int = 1) -> np.ndarray:
    """Per-column sparsity, estimated from the last (sparsest) column forward.

    Each column's support seeds the next one towards the front, so the
    estimates are non-increasing in the column index.
    """
    supports = _column_supports(frame, frame.received, step, nested=True)
    return np.array([len(s) for s in supports])


def _lengths_from(supports: list[list[int]]) -> dict[int, int]:
    out: dict[int, int] = {}
    for j, sup in enumerate(supports):
        for k in sup:
            out[k] = j + 1
    return out


def solve_samp_frame(frame: FramedSignal, step: int = 1) -> RecoveryResult:
    """Column-by-column SAMP decode, no cross-column information."""
    J = frame.received.shape[1]
    supports = _column_supports(frame, frame.received, step, nested=False)
    S = frame.spreading
    est = np.zeros(frame.symbols.shape, dtype=complex)
    for j in range(J):
        if supports[j]:
            est[supports[j], j] = _ls(S, frame.received[:, j], supports[j])
    lengths = _lengths_from(supports)
    decoded = {}
    for k, L in lengths.items():
        bits = _decode_user(est[k], est[k, 0], L)
        if bits is not None:
            decoded[k] = bits
    mu, good = _ratio(frame, decoded)
    gains = est[:, 0]
    return RecoveryResult(np.array(sorted(supports[0]), dtype=int), gains,
                          nmse(frame.gains, gains), decoded_bits=decoded, verified=good,
                          recovery_ratio=mu)


def solve_bsamp_cp(frame: FramedSignal, step: int = 1, max_rounds: int = 4,
                   checks: bool = True) -> RecoveryResult:
    """Backward-sparsity SAMP with checking and projecting.

    Each round: nested backward support detection on the residual signal,
    least squares per column over the detected users, channel refinement from
    projected symbols, CRC check; users passing the check have their channel
    re-estimated from all their symbols and are cancelled from the signal.
    With ``checks=False`` this is plain column-wise SAMP.
    """
    if not checks:
        return solve_samp_frame(frame, step)
    S, Y = frame.spreading, frame.received.copy()
    N, J = frame.symbols.shape
    gains = np.zeros(N, dtype=complex)
    decoded: dict[int, np.ndarray] = {}
    verified: list[int] = []
    first_support: list[int] | None = None
    for _ in range(max_rounds):
        supports = _column_supports(frame, Y, step, nested=True, exclude=verified)
        if first_support is None:
            first_support = supports[0]
        lengths = _lengths_from(supports)
        if not lengths:
            break
        est = np.zeros((N, J), dtype=complex)
        for j in range(J):
            if supports[j]:
                est[supports[j], j] = _ls(S, Y[:, j], supports[j])
        new = []
        for k, L in lengths.items():
            h_k = est[k, 0]
            bits = _decode_user(est[k], h_k, L)
            if bits is None:
                continue
            # decision-directed channel refinement over all the user's columns
            ref = np.concatenate([[1.0], qpsk_modulate(bits)])
            h_k = np.vdot(ref, est[k, :L]) / L
            bits = _decode_user(est[k], h_k, L)
            if bits is None:
                continue
            decoded[k] = bits
            gains[k] = h_k
            if crc_ok(bits, frame.check_bits):
                new.append((k, L, bits))
        if not new:
            break
        for k, L, bits in new:
            ref = np.concatenate([[1.0], qpsk_modulate(bits)])
            # LS channel re-estimate: Y[:, :L] ~ s_k h_k ref^T
            s_k = S[:, k]
            h_k = np.vdot(s_k, Y[:, :L] @ ref.conj()) / (np.vdot(s_k, s_k).real * L)
            gains[k] = h_k
            Y[:, :L] -= np.outer(s_k * h_k, ref)
            verified.append(k)
    mu, good = _ratio(frame, decoded)
    support = np.array(sorted(set(first_support or []) | set(verified)), dtype=int)
    off = np.setdiff1d(np.arange(N), support)
    gains[off] = 0
    return RecoveryResult(support, gains, nmse(frame.gains, gains), decoded_bits=decoded,
                          verified=sorted(verified), recovery_ratio=mu)
