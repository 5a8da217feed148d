"""Physical-layer models: THz link budget, channel aging and the on-board RIS channel.

The RIS-assisted high-speed-train channel is decomposed into five parts:
single bounce at the RIS (SBR), multi bounce at the RIS (MBR), line of
sight (LoS), single bounce (SB) and multi bounce (MB) scattering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import j0

from .core.rng import stream

SPEED_OF_LIGHT = 299_792_458.0
COMPONENTS = ("SBR", "MBR", "LoS", "SB", "MB")


class GeometryError(ValueError):
    """Two nodes of the RIS geometry coincide."""


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def fspl_db(freq: float, distance: float) -> float:
    """Free-space path loss ``20 log10(4 pi d f / c)`` in dB."""
    if not (freq > 0 and distance > 0):
        raise ValueError(f"fspl_db needs freq > 0 and distance > 0 (got {freq}, {distance})")
    return 20.0 * math.log10(4.0 * math.pi * distance * freq / SPEED_OF_LIGHT)


# ---------------------------------------------------------------------------
# THz link budget

@dataclass(frozen=True)
class ThzLinkParams:
    carrier_freq: float = 340e9
    bandwidth: float = 2e9
    efficiency: float = 0.5
    tx_power: float = 0.1
    tx_gain_dbi: float = 30.0
    rx_gain_dbi: float = 30.0
    noise_psd: float = 10 ** ((-174.0 + 10.0 - 30.0) / 10.0)  # -174 dBm/Hz plus 10 dB noise figure
    absorption_coeff: float = 1e-3
    distance: float = 50.0
    extra_loss_db: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.efficiency < 1.0:
            raise ValueError(f"efficiency must lie in (0, 1), got {self.efficiency}")
        for name in ("carrier_freq", "bandwidth", "tx_power", "noise_psd", "distance"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.absorption_coeff < 0:
            raise ValueError(f"absorption_coeff must be >= 0, got {self.absorption_coeff}")


def path_gain(link: ThzLinkParams, distance: float | None = None) -> float:
    """Linear end-to-end power gain: antenna gains, FSPL, absorption and fixed losses."""
    d = link.distance if distance is None else distance
    loss_db = fspl_db(link.carrier_freq, d) + link.extra_loss_db
    gain_db = link.tx_gain_dbi + link.rx_gain_dbi - loss_db
    return 10.0 ** (gain_db / 10.0) * math.exp(-link.absorption_coeff * d)


def received_power(link: ThzLinkParams) -> float:
    return link.tx_power * path_gain(link)


def shannon_rate(efficiency: float, bandwidth: float, rx_power: float,
                 noise_psd: float, interference: float = 0.0) -> float:
    """``eta * W * log2(1 + P_r / (N0 W + I))`` in bit/s."""
    if interference < 0:
        raise ValueError("interference must be >= 0")
    sinr = rx_power / (noise_psd * bandwidth + interference)
    rate = efficiency * bandwidth * math.log2(1.0 + sinr)
    if not math.isfinite(rate):
        raise ArithmeticError(f"non-finite rate (P_r={rx_power}, I={interference})")
    return rate


def thz_rate(link: ThzLinkParams, interference: float = 0.0) -> float:
    """Achievable THz link rate under co-band interference power ``interference`` (W)."""
    return shannon_rate(link.efficiency, link.bandwidth, received_power(link),
                        link.noise_psd, interference)


# ---------------------------------------------------------------------------
# Channel aging

@dataclass(frozen=True)
class FadingProcess:
    normalized_doppler: float
    dimension: int = 1
    correlation_model: str = "gauss_markov"

    def __post_init__(self):
        if self.normalized_doppler < 0:
            raise ValueError("normalized Doppler f_D*T_s must be >= 0")
        if self.correlation_model != "gauss_markov":
            raise ValueError(f"unsupported correlation model {self.correlation_model!r}")

    @property
    def rho(self) -> float:
        """One-step correlation ``J0(2 pi f_D T_s)``."""
        return float(j0(2.0 * math.pi * self.normalized_doppler))


def _cn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    s = math.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def aging_sequence(h0, fading: FadingProcess, steps: int,
                   rng: np.random.Generator) -> np.ndarray:
    """First-order Gauss-Markov trajectory ``h_0 .. h_steps`` (shape ``(steps+1, *h0.shape)``)."""
    h0 = np.asarray(h0, dtype=complex)
    rho = fading.rho
    innov = math.sqrt(max(0.0, 1.0 - rho * rho))
    out = np.empty((steps + 1,) + h0.shape, dtype=complex)
    out[0] = h0
    if steps == 0:
        return out
    e = _cn(rng, (steps,) + h0.shape)
    for n in range(1, steps + 1):
        out[n] = rho * out[n - 1] + innov * e[n - 1]
    return out


def aged_channel(h0, fading: FadingProcess, n: int, rng: np.random.Generator) -> np.ndarray:
    """Channel after ``n`` aging steps from ``h0``."""
    if n < 0:
        raise ValueError("step index must be >= 0")
    return aging_sequence(h0, fading, n, rng)[n]


# ---------------------------------------------------------------------------
# On-board RIS channel

@dataclass(frozen=True)
class Cluster:
    position: tuple[float, float, float]
    power_db: float           # total cluster power relative to the LoS path
    n_rays: int = 20
    angle_spread: float = math.radians(10.0)


def _default_clusters() -> tuple[Cluster, ...]:
    return (Cluster((-150.0, 40.0, 5.0), -3.0), Cluster((-230.0, -30.0, 8.0), -6.0))


@dataclass
class RisConfig:
    """Geometry and state of an on-board RIS link (positions in metres).

    The RIS sits on a carriage window; the receiver is inside the carriage,
    so LoS and scattered paths suffer ``penetration_loss_db`` while the RIS
    paths do not. ``ray_seed`` fixes the random ray phases of one channel
    realization.
    """
    element_count: int = 32
    element_phases: np.ndarray | None = None
    bs_position: tuple[float, float, float] = (0.0, 50.0, 20.0)
    ris_center: tuple[float, float, float] = (-200.0, 2.0, 2.0)
    rx_position: tuple[float, float, float] = (-200.0, 0.5, 1.5)
    element_spacing: float = 0.5        # wavelengths
    train_speed: float = 350.0 / 3.6
    travel_azimuth: float = 0.0
    carrier_freq: float = 28e9
    clusters: tuple[Cluster, ...] = field(default_factory=_default_clusters)
    penetration_loss_db: float = 20.0
    mbr_extra_loss_db: float = 10.0
    mb_extra_loss_db: float = 6.0
    ray_seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.element_count < 0:
            raise ValueError("element_count must be >= 0")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be > 0")
        if any(c.power_db is None or c.n_rays < 1 for c in self.clusters):
            raise ValueError("clusters need a power and at least one ray")
        if self.element_phases is not None:
            ph = np.asarray(self.element_phases, dtype=float)
            if ph.shape != (self.element_count,):
                raise ValueError(f"element_phases must have shape ({self.element_count},)")
            self.element_phases = np.mod(ph, 2.0 * math.pi)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def velocity(self) -> np.ndarray:
        return self.train_speed * np.array([math.cos(self.travel_azimuth),
                                            math.sin(self.travel_azimuth), 0.0])


@dataclass
class Cir:
    total: complex
    components: dict[str, complex]
    timestamp: float

    def residual(self) -> float:
        """Relative mismatch between ``total`` and the component sum."""
        s = sum(self.components[k] for k in COMPONENTS)
        return abs(self.total - s) / max(abs(self.total), 1e-300)


def element_positions(config: RisConfig, t: float = 0.0) -> np.ndarray:
    """Planar grid spanned by the travel direction and the vertical, centred on the RIS."""
    n = config.element_count
    if n == 0:
        return np.zeros((0, 3))
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    step = config.element_spacing * config.wavelength
    u = np.array([math.cos(config.travel_azimuth), math.sin(config.travel_azimuth), 0.0])
    z = np.array([0.0, 0.0, 1.0])
    idx = np.arange(n)
    cu = (idx % cols - (cols - 1) / 2.0) * step
    cz = (idx // cols - (rows - 1) / 2.0) * step
    center = np.asarray(config.ris_center, dtype=float) + config.velocity * t
    return center + cu[:, None] * u + cz[:, None] * z


def _dist(a, b) -> np.ndarray:
    d = np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), axis=-1)
    if np.any(d < 1e-6):
        raise GeometryError("coincident nodes in RIS geometry")
    return d


@dataclass
class _Rays:
    sb_amp: np.ndarray
    sb_phase: np.ndarray
    sb_doppler: np.ndarray
    mb_amp: np.ndarray
    mb_phase: np.ndarray
    mb_doppler: np.ndarray
    mbr_phase: np.ndarray


def _draw_rays(config: RisConfig, los_amp: float) -> _Rays:
    rng = stream(config.ray_seed, "ris-rays")
    lam = config.wavelength
    fmax = config.train_speed / lam
    rx = np.asarray(config.rx_position, dtype=float)
    sb_amp, sb_phase, sb_dop, mb_amp, mb_phase, mb_dop = ([] for _ in range(6))
    mb_scale = 10.0 ** (-config.mb_extra_loss_db / 10.0)
    for c in config.clusters:
        p = los_amp ** 2 * 10.0 ** (c.power_db / 10.0)
        rel = np.asarray(c.position, dtype=float) - rx
        az = math.atan2(rel[1], rel[0])
        aoa = az + rng.uniform(-c.angle_spread, c.angle_spread, c.n_rays)
        sb_amp.append(np.full(c.n_rays, math.sqrt(p / c.n_rays)))
        sb_phase.append(rng.uniform(0, 2 * math.pi, c.n_rays))
        sb_dop.append(fmax * np.cos(aoa - config.travel_azimuth))
        # multi-bounce rays arrive from anywhere
        aoa_mb = rng.uniform(0, 2 * math.pi, c.n_rays)
        mb_amp.append(np.full(c.n_rays, math.sqrt(p * mb_scale / c.n_rays)))
        mb_phase.append(rng.uniform(0, 2 * math.pi, c.n_rays))
        mb_dop.append(fmax * np.cos(aoa_mb - config.travel_azimuth))
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)
    mbr_phase = rng.uniform(0, 2 * math.pi, config.element_count)
    return _Rays(cat(sb_amp), cat(sb_phase), cat(sb_dop),
                 cat(mb_amp), cat(mb_phase), cat(mb_dop), mbr_phase)


def _los(config: RisConfig, t: float) -> complex:
    lam = config.wavelength
    rx = np.asarray(config.rx_position, dtype=float) + config.velocity * t
    d = float(_dist(config.bs_position, rx))
    amp = lam / (4 * math.pi * d) * 10.0 ** (-config.penetration_loss_db / 20.0)
    return amp * np.exp(-2j * math.pi * d / lam)


def cascade_coefficients(config: RisConfig, t: float = 0.0) -> np.ndarray:
    """BS -> element n -> receiver coefficients before the element phase shift."""
    if config.element_count == 0:
        return np.zeros(0, dtype=complex)
    lam = config.wavelength
    pos = element_positions(config, t)
    rx = np.asarray(config.rx_position, dtype=float) + config.velocity * t
    d1 = _dist(pos, config.bs_position)
    d2 = _dist(pos, rx)
    g_el = 4 * math.pi * config.element_spacing ** 2
    amp = g_el * (lam / (4 * math.pi * d1)) * (lam / (4 * math.pi * d2))
    return amp * np.exp(-2j * math.pi * (d1 + d2) / lam)


def _unnormalized(config: RisConfig, t: float, phases: np.ndarray | None):
    if t < 0:
        raise ValueError("time must be >= 0")
    _dist(config.bs_position, config.ris_center)
    _dist(config.ris_center, config.rx_position)
    los = _los(config, t)
    rays = _draw_rays(config, abs(los))
    sb = complex(np.sum(rays.sb_amp * np.exp(1j * (rays.sb_phase + 2 * math.pi * rays.sb_doppler * t))))
    mb = complex(np.sum(rays.mb_amp * np.exp(1j * (rays.mb_phase + 2 * math.pi * rays.mb_doppler * t))))
    casc = cascade_coefficients(config, t)
    if phases is None:
        phases = np.zeros(config.element_count)
    per_el = casc * np.exp(1j * np.asarray(phases, dtype=float))
    sbr = complex(np.sum(per_el))
    beta = 10.0 ** (-config.mbr_extra_loss_db / 20.0)
    mbr = complex(np.sum(per_el * beta * np.exp(1j * rays.mbr_phase)))
    return {"SBR": sbr, "MBR": mbr, "LoS": complex(los), "SB": sb, "MB": mb}, rays, casc


def _power_scale(config: RisConfig, comps: dict, rays: _Rays, casc: np.ndarray) -> float:
    """Amplitude normalisation: the configuration's peak coherent mean power maps to 1.

    Large-scale loss is factored out as in cluster-based channel models; the
    peak is the LoS+SB power with every RIS element co-phased on top of it.
    """
    if not config.normalize:
        return 1.0
    p_los_sb = abs(comps["LoS"]) ** 2 + float(np.sum(rays.sb_amp ** 2))
    coherent = float(np.sum(np.abs(casc)))
    p_mb = float(np.sum(rays.mb_amp ** 2))
    p_mbr = 10.0 ** (-config.mbr_extra_loss_db / 10.0) * float(np.sum(np.abs(casc) ** 2))
    omega = (math.sqrt(p_los_sb) + coherent) ** 2 + p_mb + p_mbr
    return 1.0 / math.sqrt(omega)


def ris_cir(config: RisConfig, t: float = 0.0) -> Cir:
    """Five-component CIR of the on-board RIS link at time ``t``."""
    comps, rays, casc = _unnormalized(config, t, config.element_phases)
    s = _power_scale(config, comps, rays, casc)
    comps = {k: comps[k] * s for k in COMPONENTS}
    total = comps["SBR"] + comps["MBR"] + comps["LoS"] + comps["SB"] + comps["MB"]
    return Cir(total=total, components=comps, timestamp=t)


def phase_objective(config: RisConfig, phases, t: float = 0.0) -> float:
    """``|h_SBR + h_LoS + h_SB|^2`` for the given element phases."""
    cir = ris_cir(replace(config, element_phases=np.asarray(phases, dtype=float)), t)
    c = cir.components
    return abs(c["SBR"] + c["LoS"] + c["SB"]) ** 2


def optimize_phases(config: RisConfig, t: float = 0.0) -> np.ndarray:
    """Co-phase every cascaded element path with the LoS+SB sum.

    Each term of ``|sum_n |c_n| e^{j(phi_n + arg c_n)} + a|`` is at most
    ``|c_n|``, so rotating every element onto ``arg a`` attains the maximum.
    """
    if config.element_count < 1:
        raise ValueError("optimize_phases needs at least one RIS element")
    comps, _, casc = _unnormalized(config, t, None)
    ref = comps["LoS"] + comps["SB"]
    target = np.angle(ref) if abs(ref) > 0 else 0.0
    return np.mod(target - np.angle(casc), 2 * math.pi)


def with_optimal_phases(config: RisConfig, t: float = 0.0) -> RisConfig:
    return replace(config, element_phases=optimize_phases(config, t))


# ---------------------------------------------------------------------------
# Spectral efficiency under channel aging

def _aging_gains(config: RisConfig) -> tuple[float, float, float]:
    """Variances of (direct, BS->element, element->user) links relative to the direct link."""
    lam = config.wavelength
    d_direct = float(_dist(config.bs_position, config.rx_position))
    d1 = float(_dist(config.bs_position, config.ris_center))
    d2 = float(_dist(config.ris_center, config.rx_position))
    beta_d = (lam / (4 * math.pi * d_direct)) ** 2 * 10.0 ** (-config.penetration_loss_db / 10.0)
    g_el = 4 * math.pi * config.element_spacing ** 2
    beta_1 = g_el * (lam / (4 * math.pi * d1)) ** 2
    beta_2 = g_el * (lam / (4 * math.pi * d2)) ** 2
    return 1.0, beta_1 / beta_d, beta_2


def _align_ris(hd: np.ndarray, cols: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Unit-modulus RIS coefficients maximizing ``||h_d + C theta||`` by coordinate ascent.

    ``hd`` is (trials, Mt); ``cols`` is (trials, Mt, N).
    """
    n_el = cols.shape[2]
    theta = np.exp(1j * np.angle(np.einsum("tmn,tm->tn", cols.conj(), hd)))
    h = hd + np.einsum("tmn,tn->tm", cols, theta)
    for _ in range(sweeps):
        for n in range(n_el):
            c = cols[:, :, n]
            r = h - c * theta[:, n:n + 1]
            new = np.exp(1j * np.angle(np.einsum("tm,tm->t", c.conj(), r)))
            h = r + c * new[:, None]
            theta[:, n] = new
    return theta


def _expected_log2(mean_amp: np.ndarray, var: np.ndarray, snr: float, nodes: int = 24) -> np.ndarray:
    """``E log2(1 + snr |m + z|^2)`` for ``z ~ CN(0, var)`` by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    zr = x[:, None]
    zi = x[None, :]
    ww = (w[:, None] * w[None, :])
    s = np.sqrt(np.asarray(var)[..., None, None] / 2.0)
    m = np.asarray(mean_amp)[..., None, None]
    mag2 = (m + s * zr) ** 2 + (s * zi) ** 2
    return np.sum(ww * np.log2(1.0 + snr * mag2), axis=(-2, -1))


def average_se_curve(config: RisConfig, fading: FadingProcess, horizon: int,
                     tx_antennas: int, *, trials: int = 200, snr_db: float = 10.0,
                     seed: int = 0, method: str = "conditional") -> np.ndarray:
    """Mean per-user spectral efficiency (bit/s/Hz) over slots ``0..horizon``.

    The maximum-ratio beamformer and RIS phases are fixed from the slot-0
    channel. The direct and BS->RIS links age with ``fading``; the on-board
    RIS->user link is static. ``snr_db`` is the mean per-antenna SNR of the
    direct link.

    ``method="montecarlo"`` draws the aging innovations explicitly;
    ``method="conditional"`` averages over them exactly (given the slot-0
    channel the projected innovation is a scalar complex Gaussian) and so
    gives the same mean without innovation noise.
    """
    if horizon < 0 or tx_antennas < 1 or trials < 1:
        raise ValueError("horizon >= 0, tx_antennas >= 1, trials >= 1 required")
    rng = stream(seed, "se-curve", config.element_count)
    mt, n_el = tx_antennas, config.element_count
    var_d, var_b, var_g = _aging_gains(config)
    snr = 10.0 ** (snr_db / 10.0)
    hd = _cn(rng, (trials, mt), var_d)
    b = _cn(rng, (trials, mt, n_el), var_b)
    g = _cn(rng, (trials, n_el), var_g)
    if n_el:
        theta = _align_ris(hd, b * g[:, None, :])
        tg = theta * g
    else:
        tg = np.zeros((trials, 0), dtype=complex)
    h0 = hd + np.einsum("tmn,tn->tm", b, tg)
    w = h0 / np.linalg.norm(h0, axis=1, keepdims=True)
    slots = np.arange(horizon + 1)
    if method == "conditional":
        rho = fading.rho
        a = np.linalg.norm(h0, axis=1)                              # h0^H w
        fresh_var = var_d + var_b * np.sum(np.abs(g) ** 2, axis=1)  # variance of innovation^H w
        rn = rho ** slots
        mean_amp = rn[None, :] * a[:, None]
        var = (1.0 - rn ** 2)[None, :] * fresh_var[:, None]
        se = _expected_log2(mean_amp, np.maximum(var, 0.0), snr)
        return se.mean(axis=0)
    if method == "montecarlo":
        se = np.empty((trials, horizon + 1))
        for k in range(trials):
            fd = FadingProcess(fading.normalized_doppler, mt)
            hd_seq = aging_sequence(hd[k], fd, horizon, rng)
            b_seq = aging_sequence(b[k] / math.sqrt(var_b), fd, horizon, rng) * math.sqrt(var_b)
            h = hd_seq + np.einsum("smn,n->sm", b_seq, tg[k])
            se[k] = np.log2(1.0 + snr * np.abs(h @ w[k].conj()) ** 2)
        return se.mean(axis=0)
    raise ValueError(f"unknown method {method!r}")
