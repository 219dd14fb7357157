"""Forward model: ideal ellipticity and synthetic detector time series.

Two fidelity levels:

* ``fast`` emits the lock-in output channels directly at the synchronous rate
  of ``samples_per_revolution`` per magnet turn.  This is the workhorse for
  long Monte-Carlo runs.
* ``full`` emits the raw analyser intensity (the exact squared-modulus form,
  extinction and PEM carrier included) at many samples per PEM cycle, so the
  digital lock-in in the analysis chain can be validated end to end.

Lock-in gain convention: demodulated channels carry the full ("peak")
harmonic amplitude, I_X = 2 <I(t) cos(w t)>.  With a sinusoidal PEM drive
eta(t) = eta0 cos(w_pem t) this makes I_OmegaPEM = 2 I0 eta0 psi(t) and
I_2OmegaPEM(DC) = I0 eta0^2 / 2, so psi(t) = I_OmegaPEM / sqrt(8 I0 I_2OmegaPEM(DC))
recovers the ellipticity exactly.

To keep the digital lock-in exact, the full path quantizes the PEM frequency
to an integer number of cycles per output sample and uses an integer number of
raw samples per cycle; on that grid the DC, carrier and second-harmonic
references are exactly orthogonal, so polarizer extinction and the eta^2 term
leak nothing into the signal channel.
"""

from __future__ import annotations

import math

import numpy as np

from .apparatus import (
    ApparatusConfig,
    NoiseModel,
    QUIET,
    TimeSeriesRecord,
    source_ellipticity,
)

MIN_PEM_OVERSAMPLE = 8


def single_pass_ellipticity(config: ApparatusConfig, deltan_u: float, theta_rad: float) -> float:
    """Ellipticity acquired in one traversal: pi*deltan_u*Int(B^2 dl)/lambda * sin(2 theta)."""
    return (
        math.pi
        * deltan_u
        * config.field_integral_t2m
        / config.wavelength_m
        * math.sin(2.0 * theta_rad)
    )


def cavity_ellipticity(config: ApparatusConfig, deltan_u: float, theta_rad: float) -> float:
    """Cavity-amplified ellipticity, N = 2F/pi passes."""
    return config.pass_count * single_pass_ellipticity(config, deltan_u, theta_rad)


def _check_duration(config: ApparatusConfig, duration_s: float) -> int:
    revs = duration_s * config.magnet_rotation_hz
    n_revs = round(revs)
    if n_revs < 1 or abs(revs - n_revs) > 1e-9 * max(1.0, revs):
        raise ValueError(
            f"duration {duration_s} s is {revs:.6f} magnet revolutions; "
            "an integer number of revolutions is required"
        )
    return n_revs


def _signal_ellipticity(config: ApparatusConfig, source, t: np.ndarray) -> np.ndarray:
    """psi(t) = psi * sin(2 theta(t)), summed over magnets when they co-rotate or not."""
    psi = source_ellipticity(source, config)
    theta0 = config.polarizer_angle_rad
    f1 = config.magnet_rotation_hz
    f2 = config.second_magnet_rotation_hz
    if f2 is None or f2 == f1:
        theta = 2.0 * math.pi * f1 * t + theta0
        return psi * np.sin(2.0 * theta)
    # Diagnostic mode: each magnet carries half the field integral at its own frequency.
    half = 0.5 * psi
    out = half * np.sin(2.0 * (2.0 * math.pi * f1 * t + theta0))
    out += half * np.sin(2.0 * (2.0 * math.pi * f2 * t + theta0))
    return out


def _output_grid(config: ApparatusConfig, n_revs: int) -> np.ndarray:
    n = n_revs * config.samples_per_revolution
    return np.arange(n) / config.sample_rate_hz


def _ellipticity_noise(noise: NoiseModel, rng: np.random.Generator, n: int, sample_rate: float):
    """Per-output-sample white ellipticity noise with the requested one-sided ASD."""
    if noise.ellipticity_noise_density == 0.0:
        return np.zeros(n)
    sigma_t = noise.ellipticity_noise_density * math.sqrt(sample_rate / 2.0)
    return sigma_t * rng.standard_normal(n)


def synthesize_run(
    config: ApparatusConfig,
    source,
    noise: NoiseModel = QUIET,
    duration_s: float = 0.0,
    fidelity: str = "fast",
    pem_oversample: int = 16,
) -> TimeSeriesRecord:
    """Produce a deterministic synthetic run record.

    The ellipticity noise realization depends only on (seed, number of output
    samples), so a fast and a full synthesis of the same physics share the
    same noise sequence; in the full path it is held constant across each
    output bin.
    """
    if fidelity not in ("fast", "full"):
        raise ValueError(f"fidelity must be 'fast' or 'full', got {fidelity!r}")
    n_revs = _check_duration(config, duration_s)
    rng = np.random.default_rng(noise.rng_seed)
    t_out = _output_grid(config, n_revs)
    n_out = len(t_out)
    eps_noise = _ellipticity_noise(noise, rng, n_out, config.sample_rate_hz)
    i0 = config.incident_power_w
    eta0 = config.pem_depth

    theta = (2.0 * math.pi * config.magnet_rotation_hz * t_out + config.polarizer_angle_rad) % (
        2.0 * math.pi
    )

    if fidelity == "fast":
        psi_t = _signal_ellipticity(config, source, t_out) + noise.alpha_of(t_out) + eps_noise
        ch_omega = 2.0 * i0 * eta0 * psi_t
        ch_2omega = np.full(n_out, 0.5 * i0 * eta0**2)
        ch_i0 = np.full(n_out, i0)
        if noise.detector_white_noise > 0.0:
            ch_omega = ch_omega + i0 * noise.detector_white_noise * rng.standard_normal(n_out)
        return TimeSeriesRecord(
            sample_rate_hz=config.sample_rate_hz,
            time=t_out,
            i_omega_pem=ch_omega,
            i_2omega_pem=ch_2omega,
            i0=ch_i0,
            magnet_phase=theta,
            fidelity="fast",
            config=config,
            source_description=_describe(source),
            seed=noise.rng_seed,
            metadata={"duration_s": duration_s, "revolutions": n_revs},
        )

    # ---- full fidelity ----
    if pem_oversample < MIN_PEM_OVERSAMPLE:
        raise ValueError(
            f"pem_oversample must be >= {MIN_PEM_OVERSAMPLE} to resolve the "
            f"2*Omega_PEM harmonic, got {pem_oversample}"
        )
    bin_rate = config.sample_rate_hz
    cycles_per_bin = max(1, round(config.pem_frequency_hz / bin_rate))
    pem_eff = cycles_per_bin * bin_rate
    samples_per_bin = pem_oversample * cycles_per_bin
    fs = pem_eff * pem_oversample
    n_raw = n_out * samples_per_bin
    t_raw = np.arange(n_raw) / fs

    psi_signal = _signal_ellipticity(config, source, t_raw)
    alpha = noise.alpha_of(t_raw)
    noise_zoh = np.repeat(eps_noise, samples_per_bin)
    # PEM carrier phase is exactly (i mod oversample)/oversample cycles -- no drift.
    carrier = eta0 * np.cos(
        2.0 * math.pi * (np.arange(n_raw) % pem_oversample) / pem_oversample
    )
    total = carrier + psi_signal + alpha + noise_zoh
    intensity = i0 * (config.extinction + total**2)
    if noise.detector_white_noise > 0.0:
        intensity = intensity * (1.0 + noise.detector_white_noise * rng.standard_normal(n_raw))

    theta_raw = (
        2.0 * math.pi * config.magnet_rotation_hz * t_raw + config.polarizer_angle_rad
    ) % (2.0 * math.pi)
    return TimeSeriesRecord(
        sample_rate_hz=fs,
        time=t_raw,
        i_omega_pem=intensity,
        i_2omega_pem=np.zeros(n_raw),
        i0=np.full(n_raw, i0),
        magnet_phase=theta_raw,
        fidelity="full",
        config=config,
        source_description=_describe(source),
        seed=noise.rng_seed,
        metadata={
            "duration_s": duration_s,
            "revolutions": n_revs,
            "pem_frequency_effective_hz": pem_eff,
            "pem_oversample": pem_oversample,
            "samples_per_output_bin": samples_per_bin,
        },
    )


def _describe(source) -> str:
    describe = getattr(source, "describe", None)
    return describe() if describe else str(source)
