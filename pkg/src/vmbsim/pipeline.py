"""Analysis chain: demodulation, block FFTs, Rayleigh statistics and projections.

The run-level procedure mirrors the acquisition analysis: the ellipticity
series is cut into blocks of (by default) 8192 samples = 256 revolutions, each
block is Fourier transformed with a rectangular window (the sampling is
synchronous, so the signal tone sits exactly on a bin), the noise floor around
the signal bin is summarized by the Rayleigh-amplitude relation
<rho> = sigma*sqrt(pi/2), and the per-block complex amplitudes at twice the
magnet rotation frequency are combined by an inverse-variance vector average.
The same vector average combines runs.

FFT normalization: one-sided amplitude spectrum; a real tone of ellipticity
amplitude A centered on a bin reports |c| = A.  A tone A*sin(w t + phi0)
sampled from t = 0 reports complex phase phi0 - pi/2, so for a rotating-field
signal psi*sin(2 theta(t)) with theta(0) = theta0 the positive-birefringence
phase is 2*theta0 - pi/2 ("analytic convention").
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .apparatus import ApparatusConfig, TimeSeriesRecord

DEFAULT_BLOCK_SIZE = 8192
DEFAULT_NOISE_HALFWIDTH = 64
RAYLEIGH_MEAN_FACTOR = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class BlockSpectrum:
    """One-sided amplitude spectrum of a single analysis block."""

    block_index: int
    fft_bins: np.ndarray        # complex amplitudes, length block_size//2 + 1
    bin_of_2omega: int
    sample_rate_hz: float
    revs_per_block: int
    rayleigh_sigma: float | None = None

    @property
    def amplitude_2omega(self) -> complex:
        return complex(self.fft_bins[self.bin_of_2omega])

    @property
    def frequencies_hz(self) -> np.ndarray:
        n = 2 * (len(self.fft_bins) - 1)
        return np.arange(len(self.fft_bins)) * self.sample_rate_hz / n


@dataclass(frozen=True)
class CalibrationPhase:
    """Physical-axis phase fixed by a Cotton-Mouton calibration.

    ``phase_rad`` points along positive birefringence (same sign as helium);
    the axis itself is only defined mod pi, exposed as ``axis_phase``.
    """

    phase_rad: float
    source_gas: str = ""
    fit_slope: float = float("nan")          # Delta n_u of the gas, T^-2 atm^-1
    fit_slope_sigma: float = float("nan")
    fit_intercept: float = float("nan")
    fit_intercept_sigma: float = float("nan")
    per_run_phases: tuple[float, ...] = ()   # logged for drift diagnostics

    @property
    def axis_phase(self) -> float:
        return self.phase_rad % math.pi


def analytic_calibration(config: ApparatusConfig) -> CalibrationPhase:
    """Phase a positive birefringence shows for synthetic records (2*theta0 - pi/2)."""
    return CalibrationPhase(
        phase_rad=(2.0 * config.polarizer_angle_rad - math.pi / 2.0) % (2.0 * math.pi),
        source_gas="analytic",
    )


@dataclass(frozen=True)
class RunEstimate:
    """Result of one run: complex 2*Omega_Mag amplitude with Rayleigh sigma."""

    complex_amplitude_2omega: complex   # ellipticity units
    sigma: float                        # per-quadrature, ellipticity units
    physical: float                     # signed projection, ellipticity units
    nonphysical: float
    deltan_over_b2: complex             # T^-2 (complex; Re along physical axis after projection)
    deltan_over_b2_physical: float
    deltan_over_b2_nonphysical: float
    deltan_over_b2_sigma: float
    duration_s: float
    n_blocks: int
    config: ApparatusConfig
    metadata: dict

    @property
    def hours(self) -> float:
        return self.duration_s / 3600.0

    @property
    def snr(self) -> float:
        return abs(self.complex_amplitude_2omega) / self.sigma if self.sigma > 0 else math.inf


# ---------------------------------------------------------------------------
# Demodulation
# ---------------------------------------------------------------------------

def demodulate(record: TimeSeriesRecord) -> np.ndarray:
    """Ellipticity series psi(t) = I_OmegaPEM / sqrt(8 I0 I_2OmegaPEM(DC)).

    Full-fidelity records are first passed through the digital lock-in at the
    PEM frequency and its second harmonic (boxcar over an integer number of
    carrier cycles per output sample, peak-amplitude gain convention).
    """
    if record.fidelity == "fast":
        dc_2omega = float(np.mean(record.i_2omega_pem))
        i0 = float(np.mean(record.i0))
        norm = 8.0 * i0 * dc_2omega
        if norm <= 0.0:
            raise ValueError("vanishing I0 * I_2OmegaPEM(DC) normalization")
        return record.i_omega_pem / math.sqrt(norm)
    if record.fidelity != "full":
        raise ValueError(f"unknown fidelity {record.fidelity!r}")

    meta = record.metadata
    try:
        oversample = int(float(meta["pem_oversample"]))
        samples_per_bin = int(float(meta["samples_per_output_bin"]))
    except KeyError as exc:
        raise ValueError(f"full-fidelity record lacks metadata key {exc}") from exc
    n = len(record)
    if n % samples_per_bin:
        raise ValueError("record length is not a whole number of output bins")
    intensity = record.i_omega_pem  # raw detector channel for full fidelity
    phase_idx = np.arange(n) % oversample
    ref1 = np.cos(2.0 * math.pi * phase_idx / oversample)
    ref2 = np.cos(4.0 * math.pi * phase_idx / oversample)
    shape = (n // samples_per_bin, samples_per_bin)
    ix1 = 2.0 * np.mean((intensity * ref1).reshape(shape), axis=1)
    ix2 = 2.0 * np.mean((intensity * ref2).reshape(shape), axis=1)
    i0 = float(np.mean(record.i0))
    dc_2omega = float(np.mean(ix2))
    norm = 8.0 * i0 * dc_2omega
    if norm <= 0.0:
        raise ValueError("vanishing I0 * I_2OmegaPEM(DC) normalization")
    return ix1 / math.sqrt(norm)


def demodulated_sample_rate(record: TimeSeriesRecord) -> float:
    if record.fidelity == "fast":
        return record.sample_rate_hz
    samples_per_bin = int(float(record.metadata["samples_per_output_bin"]))
    return record.sample_rate_hz / samples_per_bin


# ---------------------------------------------------------------------------
# Block FFTs and noise statistics
# ---------------------------------------------------------------------------

def block_fft(
    psi: np.ndarray,
    config: ApparatusConfig,
    block_size: int = DEFAULT_BLOCK_SIZE,
    leakage_warning: bool = True,
) -> list[BlockSpectrum]:
    """Rectangular-window amplitude FFTs of consecutive blocks.

    Blocks must hold an integer number of revolutions so the 2*Omega_Mag tone
    is bin-centered; a prominent off-bin tone (energy in the neighbours of the
    peak) triggers a leakage warning.
    """
    spr = config.samples_per_revolution
    if block_size < spr or block_size % spr:
        raise ValueError(
            f"block_size {block_size} must be a positive multiple of "
            f"samples_per_revolution {spr}"
        )
    if len(psi) < block_size:
        raise ValueError(f"series of {len(psi)} samples is shorter than one block ({block_size})")
    revs_per_block = block_size // spr
    n_blocks = len(psi) // block_size
    bin_2omega = 2 * revs_per_block
    out = []
    blocks = psi[: n_blocks * block_size].reshape(n_blocks, block_size)
    spectra = np.fft.rfft(blocks, axis=1)
    # one-sided amplitude normalization: interior bins 2/N, DC and Nyquist 1/N
    spectra *= 2.0 / block_size
    spectra[:, 0] *= 0.5
    spectra[:, -1] *= 0.5
    for i in range(n_blocks):
        out.append(
            BlockSpectrum(
                block_index=i,
                fft_bins=spectra[i],
                bin_of_2omega=bin_2omega,
                sample_rate_hz=config.sample_rate_hz,
                revs_per_block=revs_per_block,
            )
        )
    if leakage_warning and out:
        _warn_on_leakage(out[0])
    return out


def _warn_on_leakage(block: BlockSpectrum) -> None:
    bins = np.abs(block.fft_bins)
    k = block.bin_of_2omega
    peak_region = bins[max(k - 2, 1): k + 3]
    peak = peak_region.max()
    if peak <= 0:
        return
    noise_floor = float(np.median(bins[1:]))
    neighbours = max(bins[k - 1], bins[k + 1])
    if peak > 10.0 * max(noise_floor, 1e-300) and neighbours > 0.3 * bins[k]:
        warnings.warn(
            "significant spectral energy next to the 2*Omega_Mag bin; the tone "
            "appears off bin center (asynchronous sampling or frequency drift)",
            stacklevel=3,
        )


def parseval_residual(block: BlockSpectrum, samples: np.ndarray) -> float:
    """Relative mismatch between time-domain power and the one-sided spectrum power."""
    amps = np.abs(block.fft_bins)
    power_freq = amps[0] ** 2 + 0.5 * np.sum(amps[1:-1] ** 2) + amps[-1] ** 2
    power_time = float(np.mean(samples**2))
    scale = max(power_time, power_freq)
    if scale == 0.0:
        return 0.0
    return abs(power_time - power_freq) / scale


def noise_bin_indices(
    block: BlockSpectrum, exclusion_halfwidth: int = DEFAULT_NOISE_HALFWIDTH
) -> np.ndarray:
    """Bins around 2*Omega_Mag used for the noise estimate.

    The signal bin and every harmonic of the rotation frequency inside the
    window are excluded.
    """
    k = block.bin_of_2omega
    lo = max(1, k - exclusion_halfwidth)
    hi = min(len(block.fft_bins) - 1, k + exclusion_halfwidth)
    idx = np.arange(lo, hi + 1)
    harmonic = idx % block.revs_per_block == 0
    return idx[~harmonic]


def rayleigh_sigma(
    block: BlockSpectrum, exclusion_halfwidth: int = DEFAULT_NOISE_HALFWIDTH
) -> float:
    """Per-quadrature noise sigma from the mean Rayleigh amplitude (<rho> = sigma sqrt(pi/2))."""
    idx = noise_bin_indices(block, exclusion_halfwidth)
    if len(idx) < 50:
        raise ValueError(
            f"only {len(idx)} noise bins available around the signal bin; need >= 50"
        )
    mean_amp = float(np.mean(np.abs(block.fft_bins[idx])))
    return mean_amp / RAYLEIGH_MEAN_FACTOR


def with_rayleigh_sigma(
    blocks: list[BlockSpectrum], exclusion_halfwidth: int = DEFAULT_NOISE_HALFWIDTH
) -> list[BlockSpectrum]:
    """Attach noise sigmas to blocks, floored at the FFT's numerical precision.

    A noiseless synchronous record is exactly periodic per revolution, so its
    off-harmonic bins are identically zero; the floor (machine epsilon times
    the block's peak amplitude) keeps such records analyzable with an honest
    "numerical precision" uncertainty instead of an infinite weight.
    """
    out = []
    for b in blocks:
        floor = float(np.finfo(float).eps * np.abs(b.fft_bins).max())
        out.append(replace(b, rayleigh_sigma=max(rayleigh_sigma(b, exclusion_halfwidth), floor)))
    return out


# ---------------------------------------------------------------------------
# Averaging, projection, conversion
# ---------------------------------------------------------------------------

def weighted_average(values_and_sigmas) -> tuple[complex, float]:
    """Inverse-variance vector average of complex estimates.

    Returns (mean, sigma_combined) with sigma_combined = (sum sigma_i^-2)^(-1/2);
    both quadratures share each item's weight.
    """
    items = list(values_and_sigmas)
    if not items:
        raise ValueError("cannot average an empty list")
    weights = []
    for value, sigma in items:
        if not (sigma > 0 and math.isfinite(sigma)):
            raise ValueError(f"all sigmas must be positive and finite, got {sigma}")
        weights.append(1.0 / sigma**2)
    total = math.fsum(weights)
    mean = complex(
        math.fsum(w * complex(v).real for (v, _), w in zip(items, weights)) / total,
        math.fsum(w * complex(v).imag for (v, _), w in zip(items, weights)) / total,
    )
    return mean, 1.0 / math.sqrt(total)


def project_physical(estimate: complex, calibration: CalibrationPhase) -> tuple[float, float]:
    """Rotate onto the calibration axis: (physical, nonphysical) components.

    Positive physical = same sign as the calibration gas convention (helium).
    """
    rotated = complex(estimate) * np.exp(-1j * calibration.phase_rad)
    return float(rotated.real), float(rotated.imag)


def deltan_conversion(psi_amplitude, config: ApparatusConfig):
    """Ellipticity amplitude -> Delta n/B^2 (T^-2): psi * lambda/(N pi Int B^2 dl)."""
    if config.field_integral_t2m == 0.0:
        raise ValueError("zero field integral")
    factor = config.wavelength_m / (config.pass_count * math.pi * config.field_integral_t2m)
    return psi_amplitude * factor


def ellipticity_from_deltan(deltan_u, config: ApparatusConfig):
    """Inverse of :func:`deltan_conversion`."""
    return deltan_u * config.pass_count * math.pi * config.field_integral_t2m / config.wavelength_m


# ---------------------------------------------------------------------------
# Run-level analysis
# ---------------------------------------------------------------------------

def analyze_record(
    record: TimeSeriesRecord,
    block_size: int = DEFAULT_BLOCK_SIZE,
    noise_halfwidth: int = DEFAULT_NOISE_HALFWIDTH,
    calibration: CalibrationPhase | None = None,
) -> RunEstimate:
    """Demodulate, block-average and project one run."""
    config = record.config
    if calibration is None:
        calibration = analytic_calibration(config)
    # full-fidelity records land on the same synchronous output grid after demodulation
    psi = demodulate(record)
    blocks = with_rayleigh_sigma(
        block_fft(psi, config, block_size=block_size), noise_halfwidth
    )
    amp, sigma = weighted_average(
        (b.amplitude_2omega, b.rayleigh_sigma) for b in blocks
    )
    physical, nonphysical = project_physical(amp, calibration)
    dn_complex = deltan_conversion(amp, config)
    dn_sigma = float(deltan_conversion(sigma, config))
    dn_phys, dn_nonphys = project_physical(dn_complex, calibration)
    n_blocks = len(blocks)
    duration = n_blocks * block_size / demodulated_sample_rate(record)
    return RunEstimate(
        complex_amplitude_2omega=amp,
        sigma=sigma,
        physical=physical,
        nonphysical=nonphysical,
        deltan_over_b2=dn_complex,
        deltan_over_b2_physical=dn_phys,
        deltan_over_b2_nonphysical=dn_nonphys,
        deltan_over_b2_sigma=dn_sigma,
        duration_s=duration,
        n_blocks=n_blocks,
        config=config,
        metadata={
            "source": record.source_description,
            "seed": record.seed,
            "fidelity": record.fidelity,
            "phase_rad": float(np.angle(amp)) if abs(amp) > 0 else 0.0,
            "calibration_phase_rad": calibration.phase_rad,
        },
    )


def combine_runs(estimates: list[RunEstimate]) -> tuple[complex, float, float]:
    """Weighted vector average over runs in Delta n/B^2 space.

    Returns (complex deltan_over_b2, sigma, total_hours).  Runs may differ in
    finesse or field integral; the conversion to Delta n/B^2 happened per run.
    """
    if not estimates:
        raise ValueError("no run estimates to combine")
    mean, sigma = weighted_average(
        (e.deltan_over_b2, e.deltan_over_b2_sigma) for e in estimates
    )
    hours = sum(e.hours for e in estimates)
    return mean, sigma, hours


def averaged_spectrum(blocks: list[BlockSpectrum]) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-variance averaged complex spectrum over blocks: (freq_hz, complex amps)."""
    if not blocks:
        raise ValueError("no blocks to average")
    sigmas = np.array([b.rayleigh_sigma for b in blocks], dtype=float)
    if np.any(~np.isfinite(sigmas)) or np.any(sigmas <= 0):
        raise ValueError("all blocks need a positive rayleigh_sigma (run with_rayleigh_sigma)")
    w = 1.0 / sigmas**2
    stack = np.stack([b.fft_bins for b in blocks])
    avg = np.tensordot(w, stack, axes=1) / w.sum()
    return blocks[0].frequencies_hz, avg


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def weighted_linear_fit(x: np.ndarray, y: np.ndarray, sigma: np.ndarray):
    """Weighted least squares of y = a + b x; returns (a, b, sigma_a, sigma_b)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points for a linear fit")
    if np.ptp(x) == 0.0:
        raise ValueError("degenerate fit: all x values identical")
    w = 1.0 / sigma**2
    s = w.sum()
    sx = (w * x).sum()
    sy = (w * y).sum()
    sxx = (w * x * x).sum()
    sxy = (w * x * y).sum()
    delta = s * sxx - sx**2
    a = (sxx * sy - sx * sxy) / delta
    b = (s * sxy - sx * sy) / delta
    return a, b, math.sqrt(sxx / delta), math.sqrt(s / delta)


def calibrate(
    records_or_estimates,
    gas_name: str,
    pressures_atm: list[float] | None = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
    noise_halfwidth: int = DEFAULT_NOISE_HALFWIDTH,
) -> CalibrationPhase:
    """Derive the physical phase and the gas coefficient from pressure-scan runs.

    Accepts TimeSeriesRecords (pressures read from their source descriptions or
    given explicitly) or pre-computed (RunEstimate, pressure_atm) pairs.  The
    phase comes from the highest-SNR point, sign-corrected with the known sign
    of the gas coefficient; per-run phases are kept for drift diagnostics.
    """
    from .models import gas_species

    gas = gas_species(gas_name)
    pairs = []
    for i, item in enumerate(records_or_estimates):
        if isinstance(item, tuple):
            est, p = item
        else:
            est = analyze_record(item, block_size=block_size, noise_halfwidth=noise_halfwidth)
            p = pressures_atm[i] if pressures_atm else _pressure_from_description(
                item.source_description
            )
        pairs.append((est, float(p)))
    if len(pairs) < 2:
        raise ValueError("calibration needs at least two pressure points")
    pressures = np.array([p for _, p in pairs])
    if np.ptp(pressures) == 0.0:
        raise ValueError("degenerate calibration: all pressures identical")

    best, _ = max(pairs, key=lambda ep: ep[0].snr)
    measured_phase = math.atan2(
        best.complex_amplitude_2omega.imag, best.complex_amplitude_2omega.real
    )
    phase = measured_phase if gas.deltan_u > 0 else measured_phase + math.pi
    phase %= 2.0 * math.pi
    cal = CalibrationPhase(phase_rad=phase, source_gas=gas_name)

    dn_phys = []
    dn_sigma = []
    run_phases = []
    for est, _ in pairs:
        p_phys, _ = project_physical(est.deltan_over_b2, cal)
        dn_phys.append(p_phys)
        dn_sigma.append(est.deltan_over_b2_sigma)
        run_phases.append(est.metadata.get("phase_rad", float("nan")))
    a, b, sa, sb = weighted_linear_fit(pressures, np.array(dn_phys), np.array(dn_sigma))
    return CalibrationPhase(
        phase_rad=phase,
        source_gas=gas_name,
        fit_slope=b,
        fit_slope_sigma=sb,
        fit_intercept=a,
        fit_intercept_sigma=sa,
        per_run_phases=tuple(run_phases),
    )


def _pressure_from_description(description: str) -> float:
    # source descriptions look like "gas:He:3.158e-05atm"
    parts = description.split(":")
    if len(parts) == 3 and parts[0] == "gas" and parts[2].endswith("atm"):
        return float(parts[2][:-3])
    raise ValueError(
        f"cannot infer pressure from source {description!r}; pass pressures_atm explicitly"
    )
