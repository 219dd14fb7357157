"""Instrument description, noise model, birefringence sources and run records.

The ApparatusConfig mirrors a rotating-magnet Fabry-Perot ellipsometer: a
linearly polarized beam stored in a high-finesse cavity crosses the bores of
rotating dipole magnets, a photoelastic modulator adds a carrier ellipticity,
and the analyser output is demodulated at the PEM frequency and its second
harmonic, then sampled synchronously with the magnet rotation.
"""

from __future__ import annotations

import hashlib
import io
import math
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .constants import CONSTANTS, cavity_amplification, convert_pressure
from .models import (
    AlpParams,
    McpParams,
    alp_deltan,
    cotton_mouton_deltan,
    gas_species,
    mcp_deltan,
    qed_unitary_birefringence,
)

RECORD_COLUMNS = ("time", "I_OmegaPEM", "I_2OmegaPEM", "I0", "magnet_phase")
_FMT = "%.8e"  # 9 significant digits, the deterministic-output contract


def format_number(x: float) -> str:
    """Canonical 9-significant-digit scientific notation used in every output file."""
    if x == 0.0:
        x = 0.0  # normalize -0.0
    return _FMT % x


@dataclass(frozen=True)
class ApparatusConfig:
    """Static instrument parameters. Defaults follow the published run configuration."""

    wavelength_m: float = 1064e-9
    finesse: float = 670000.0
    field_integral_t2m: float = 10.25       # integral of B^2 dl over both magnets
    peak_field_t: float = 2.5
    field_length_m: float = 1.92            # sum of the two magnet bores
    magnet_rotation_hz: float = 3.0
    second_magnet_rotation_hz: float | None = None   # set != first only for diagnostics
    pem_frequency_hz: float = 50047.0
    pem_depth: float = 1e-3                 # eta0, carrier ellipticity amplitude
    extinction: float = 1e-7                # sigma^2 of the crossed polarizers
    incident_power_w: float = 1e-3          # I0 reaching the analyser
    samples_per_revolution: int = 32
    polarizer_angle_rad: float = 0.0        # initial field-to-polarization angle theta0

    def __post_init__(self):
        for name in (
            "wavelength_m", "finesse", "field_integral_t2m", "peak_field_t",
            "field_length_m", "magnet_rotation_hz", "pem_frequency_hz",
            "pem_depth", "incident_power_w",
        ):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"config field {name} must be positive and finite, got {v!r}")
        if not (math.isfinite(self.extinction) and self.extinction >= 0):
            raise ValueError(f"extinction must be >= 0, got {self.extinction}")
        if self.pem_frequency_hz < 100.0 * self.magnet_rotation_hz:
            raise ValueError(
                "pem_frequency_hz must exceed 100x the magnet rotation for the "
                "demodulation products to separate"
            )
        spr = self.samples_per_revolution
        if spr < 4 or (spr & (spr - 1)) != 0:
            raise ValueError(f"samples_per_revolution must be a power of two >= 4, got {spr}")
        if self.field_integral_t2m > self.peak_field_t**2 * self.field_length_m * (1 + 1e-12):
            raise ValueError(
                f"field integral {self.field_integral_t2m} T^2m exceeds "
                f"B_max^2*L = {self.peak_field_t**2 * self.field_length_m} T^2m"
            )
        if (
            self.second_magnet_rotation_hz is not None
            and self.second_magnet_rotation_hz != self.magnet_rotation_hz
        ):
            warnings.warn(
                "magnets rotating at different frequencies is an experimental "
                "diagnostic mode; the standard analysis assumes co-rotation",
                stacklevel=2,
            )

    @property
    def pass_count(self) -> float:
        """Cavity ellipticity amplification N = 2F/pi."""
        return cavity_amplification(self.finesse)

    @property
    def effective_field_t(self) -> float:
        """Field whose square times the field length reproduces the field integral."""
        return math.sqrt(self.field_integral_t2m / self.field_length_m)

    @property
    def photon_energy_ev(self) -> float:
        return CONSTANTS.photon_energy_ev(self.wavelength_m)

    @property
    def sample_rate_hz(self) -> float:
        """Demodulated-channel rate, synchronous with the rotation."""
        return self.samples_per_revolution * self.magnet_rotation_hz

    def to_key_values(self) -> dict[str, object]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            out[f"config.{f.name}"] = v
        return out

    @classmethod
    def from_key_values(cls, kv: dict[str, str]) -> "ApparatusConfig":
        kwargs = {}
        for f in fields(cls):
            key = f"config.{f.name}"
            if key in kv:
                raw = kv[key]
                kwargs[f.name] = int(raw) if f.name == "samples_per_revolution" else float(raw)
        return cls(**kwargs)

    def content_hash(self) -> str:
        text = "\n".join(
            f"{k} = {format_number(v) if isinstance(v, float) else v}"
            for k, v in sorted(self.to_key_values().items())
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class NoiseModel:
    """Stochastic ingredients of a synthesized run; fully determined by the seed."""

    ellipticity_noise_density: float = 0.0   # one-sided ASD at 2*Omega_Mag, 1/sqrt(Hz)
    detector_white_noise: float = 0.0        # relative intensity noise per raw sample
    spurious_tones: tuple[tuple[float, float, float], ...] = ()  # (freq Hz, ellipticity amp, phase rad)
    rng_seed: int = 0

    def __post_init__(self):
        if self.ellipticity_noise_density < 0 or self.detector_white_noise < 0:
            raise ValueError("noise amplitudes must be >= 0")

    def alpha_of(self, t: np.ndarray) -> np.ndarray:
        """Slowly varying spurious ellipticity alpha(t) as a sum of tones."""
        out = np.zeros_like(t)
        for freq, amp, phase in self.spurious_tones:
            out += amp * np.cos(2.0 * math.pi * freq * t + phase)
        return out

    def describe(self) -> str:
        tones = ";".join(f"{f:g}:{a:g}:{p:g}" for f, a, p in self.spurious_tones)
        return (
            f"asd={self.ellipticity_noise_density:g},rin={self.detector_white_noise:g},"
            f"tones=[{tones}],seed={self.rng_seed}"
        )


QUIET = NoiseModel()


# ---------------------------------------------------------------------------
# Birefringence sources
# ---------------------------------------------------------------------------
# A source yields the signed Delta-n at a given field; the forward model only
# needs the effective Delta n/B^2 at the apparatus working field, because the
# induced ellipticity scales with the field integral.

@dataclass(frozen=True)
class NullSource:
    """Vacuum with no physics beyond linear electrodynamics."""

    def deltan(self, b_tesla: float) -> float:
        return 0.0

    def describe(self) -> str:
        return "none"


@dataclass(frozen=True)
class FixedDeltanSource:
    """Fixed unitary birefringence, Delta n = deltan_u * B^2."""

    deltan_u: float  # T^-2

    def deltan(self, b_tesla: float) -> float:
        return self.deltan_u * b_tesla**2

    def describe(self) -> str:
        return f"fixed-deltanu:{self.deltan_u!r}"


@dataclass(frozen=True)
class FixedEllipticitySource:
    """Fixed cavity-output ellipticity amplitude, bypassing the Delta-n chain."""

    psi: float

    def describe(self) -> str:
        return f"fixed-ellipticity:{self.psi!r}"


@dataclass(frozen=True)
class QedVacuumSource:
    """Euler-Heisenberg vacuum."""

    def deltan(self, b_tesla: float) -> float:
        return qed_unitary_birefringence() * b_tesla**2

    def describe(self) -> str:
        return "qed"


@dataclass(frozen=True)
class GasSource:
    """Cotton-Mouton birefringence of a gas at a fixed pressure."""

    gas_name: str
    pressure_atm: float

    def deltan(self, b_tesla: float) -> float:
        return cotton_mouton_deltan(gas_species(self.gas_name), self.pressure_atm, b_tesla)

    def describe(self) -> str:
        return f"gas:{self.gas_name}:{self.pressure_atm!r}atm"


@dataclass(frozen=True)
class AlpSource:
    params: AlpParams

    def deltan(self, b_tesla: float) -> float:
        return alp_deltan(self.params, b_tesla)

    def describe(self) -> str:
        p = self.params
        return f"alp:g={p.coupling_inv_ev!r},m={p.mass_ev!r}"


@dataclass(frozen=True)
class McpSource:
    params: McpParams
    allow_gap: bool = True

    def deltan(self, b_tesla: float) -> float:
        value, _ = mcp_deltan(self.params, b_tesla, allow_gap=self.allow_gap)
        return value

    def describe(self) -> str:
        p = self.params
        return f"mcp:{p.statistics}:eps={p.charge_ratio!r},m={p.mass_energy_ev!r}"


def source_ellipticity(source, config: ApparatusConfig) -> float:
    """Cavity-output ellipticity amplitude a source produces in this apparatus."""
    from .synth import cavity_ellipticity  # local import to avoid a cycle

    if isinstance(source, FixedEllipticitySource):
        return source.psi
    b = config.effective_field_t
    deltan_u_eff = source.deltan(b) / b**2
    return cavity_ellipticity(config, deltan_u_eff, math.pi / 4.0)


def parse_source(spec: str):
    """Parse a CLI source description.

    Grammar: ``none`` | ``qed`` | ``fixed-deltanu:<T^-2>`` |
    ``fixed-ellipticity:<psi>`` | ``gas:<name>:<pressure><unit>`` (unit one of
    atm/mbar/ubar) | ``alp:g=<eV^-1>,m=<eV>`` | ``mcp:<fermion|scalar>:eps=<..>,m=<eV>``.
    ALP/MCP photon energy and field length come from the apparatus config at
    synthesis time via ``resolve_source``.
    """
    parts = spec.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "none":
            return NullSource()
        if kind == "qed":
            return QedVacuumSource()
        if kind == "fixed-deltanu":
            return FixedDeltanSource(float(parts[1]))
        if kind == "fixed-ellipticity":
            return FixedEllipticitySource(float(parts[1]))
        if kind == "gas":
            name, amount = parts[1], parts[2]
            for unit in ("ubar", "mbar", "atm"):
                if amount.endswith(unit):
                    value = float(amount[: -len(unit)])
                    return GasSource(name, convert_pressure(value, unit, "atm"))
            raise ValueError(f"pressure {amount!r} must end in atm, mbar or ubar")
        if kind == "alp":
            kv = dict(item.split("=") for item in parts[1].split(","))
            return ("alp", float(kv["g"]), float(kv["m"]))
        if kind == "mcp":
            stats = parts[1]
            kv = dict(item.split("=") for item in parts[2].split(","))
            return ("mcp", stats, float(kv["eps"]), float(kv["m"]))
    except (IndexError, KeyError, ValueError) as exc:
        raise ValueError(f"cannot parse source spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown source kind {kind!r} in {spec!r}")


def resolve_source(parsed, config: ApparatusConfig):
    """Attach apparatus-dependent parameters to a parsed ALP/MCP source stub."""
    if isinstance(parsed, tuple) and parsed and parsed[0] == "alp":
        _, g, m = parsed
        return AlpSource(AlpParams(g, m, config.photon_energy_ev, config.field_length_m))
    if isinstance(parsed, tuple) and parsed and parsed[0] == "mcp":
        _, stats, eps, m = parsed
        return McpSource(McpParams(eps, m, config.photon_energy_ev, stats))
    return parsed


# ---------------------------------------------------------------------------
# Time-series records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeriesRecord:
    """Sampled channels of one run plus the metadata needed to analyze it.

    For fast-fidelity records the channels are the lock-in outputs; for
    full-fidelity records ``i_omega_pem`` holds the raw (undemodulated)
    detector intensity and ``i_2omega_pem`` is zero -- the file schema keeps a
    single fixed column order either way.
    """

    sample_rate_hz: float
    time: np.ndarray
    i_omega_pem: np.ndarray
    i_2omega_pem: np.ndarray
    i0: np.ndarray
    magnet_phase: np.ndarray
    fidelity: str                      # "fast" | "full"
    config: ApparatusConfig
    source_description: str
    seed: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.time)
        for name in ("i_omega_pem", "i_2omega_pem", "i0", "magnet_phase"):
            if len(getattr(self, name)) != n:
                raise ValueError("all channels must have equal length")
        if self.fidelity not in ("fast", "full"):
            raise ValueError(f"fidelity must be 'fast' or 'full', got {self.fidelity!r}")

    def __len__(self) -> int:
        return len(self.time)

    @property
    def duration_s(self) -> float:
        return len(self.time) / self.sample_rate_hz

    def header_items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = [
            ("tool_version", __version__),
            ("fidelity", self.fidelity),
            ("sample_rate_hz", self.sample_rate_hz),
            ("n_samples", len(self.time)),
            ("source", self.source_description),
            ("seed", self.seed),
            ("config_hash", self.config.content_hash()),
        ]
        items.extend(sorted(self.config.to_key_values().items()))
        items.extend(sorted(self.metadata.items()))
        return items


def write_record(record: TimeSeriesRecord, path) -> None:
    """Serialize to the columnar text format (header block, then fixed columns)."""
    buf = io.StringIO()
    for key, value in record.header_items():
        value_s = format_number(value) if isinstance(value, float) else str(value)
        buf.write(f"# {key} = {value_s}\n")
    buf.write("# columns = " + ", ".join(RECORD_COLUMNS) + "\n")
    cols = np.column_stack(
        [record.time, record.i_omega_pem, record.i_2omega_pem, record.i0, record.magnet_phase]
    )
    np.savetxt(buf, cols, fmt=_FMT, delimiter=", ")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_record(path) -> TimeSeriesRecord:
    """Read a record written by :func:`write_record`."""
    header: dict[str, str] = {}
    data_lines = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
            else:
                data_lines.append(line)
    if not data_lines:
        raise ValueError(f"record file {path} contains no samples")
    data = np.loadtxt(io.StringIO("\n".join(data_lines)), delimiter=",")
    data = np.atleast_2d(data)
    if data.shape[1] != len(RECORD_COLUMNS):
        raise ValueError(
            f"record file {path} has {data.shape[1]} columns, expected {len(RECORD_COLUMNS)}"
        )
    config = ApparatusConfig.from_key_values(header)
    metadata = {
        k: v
        for k, v in header.items()
        if not k.startswith("config.")
        and k not in ("tool_version", "fidelity", "sample_rate_hz", "n_samples", "source",
                      "seed", "config_hash", "columns")
    }
    return TimeSeriesRecord(
        sample_rate_hz=float(header["sample_rate_hz"]),
        time=data[:, 0],
        i_omega_pem=data[:, 1],
        i_2omega_pem=data[:, 2],
        i0=data[:, 3],
        magnet_phase=data[:, 4],
        fidelity=header["fidelity"],
        config=config,
        source_description=header.get("source", "unknown"),
        seed=int(header.get("seed", 0)),
        metadata=metadata,
    )


def truncated(record: TimeSeriesRecord, n: int) -> TimeSeriesRecord:
    """First n samples of a record (block-aligned truncation helper)."""
    return replace(
        record,
        time=record.time[:n],
        i_omega_pem=record.i_omega_pem[:n],
        i_2omega_pem=record.i_2omega_pem[:n],
        i0=record.i0[:n],
        magnet_phase=record.magnet_phase[:n],
    )
