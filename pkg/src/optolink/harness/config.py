"""Link configuration: one frozen tree, a flat ``section.key = value`` file format.

Example file::

    # receiver tweaks
    pd.responsivity = 0.35
    tia.input_noise_density = 30.0
    noise.shot = false

Unknown keys are rejected. Every leaf carries a provenance tag in
:data:`PROVENANCE`: ``published`` (a value from the reference design), ``calibrated`` (fitted
here so a simulated observable matches a published one) or ``invented``
(a modelling choice).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..cdr import CdrConfig, VcoConfig
from ..optics import MzmConfig, NoiseConfig, OpticalPath, PdConfig
from ..rx_chain import TiaConfig
from ..tx_chain import DriverConfig, FfeTaps


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LinkConfig:
    baud: float = 28e9
    osr: int = 16
    seed: int = 1
    prbs_seed: int = 0x7F
    ffe: FfeTaps = field(default_factory=FfeTaps)
    driver: DriverConfig = field(default_factory=DriverConfig)
    mzm: MzmConfig = field(default_factory=MzmConfig)
    path: OpticalPath = field(default_factory=OpticalPath)
    pd: PdConfig = field(default_factory=PdConfig)
    tia: TiaConfig = field(default_factory=TiaConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    cdr: CdrConfig = field(default_factory=CdrConfig)

    def __post_init__(self):
        if self.baud <= 0:
            raise ValueError("baud must be > 0")
        if self.osr < 8:
            raise ValueError("osr must be >= 8")
        if not 0 < self.prbs_seed <= 0x7F:
            raise ValueError("degenerate LFSR state")

    @property
    def rate_gbps(self) -> float:
        return 2.0 * self.baud / 1e9

    def with_noise(self, enabled: bool) -> LinkConfig:
        return replace(self, noise=NoiseConfig() if enabled else NoiseConfig.off())

    def with_values(self, **dotted) -> LinkConfig:
        """Copy with dotted-key overrides, e.g. ``with_values(**{"tia.bandwidth": 15e9})``."""
        flat = flatten(self)
        for k, v in dotted.items():
            if k not in flat:
                raise ConfigError(f"unknown config key {k!r}")
            flat[k] = v
        return build(flat)


# section name -> attribute path from LinkConfig
SECTIONS = {
    "link": (),
    "ffe": ("ffe",),
    "driver": ("driver",),
    "mzm": ("mzm",),
    "path": ("path",),
    "pd": ("pd",),
    "tia": ("tia",),
    "noise": ("noise",),
    "vco": ("cdr", "vco"),
    "cdr": ("cdr",),
}

# VCO runtime state, not configuration
_EXCLUDED = {"vco.code", "vco.vctrl"}

PROVENANCE = {
    "link.baud": ("published", "28 GBaud PAM-4 = 56 Gb/s"),
    "link.osr": ("invented", "samples per UI"),
    "link.seed": ("invented", "noise RNG seed"),
    "link.prbs_seed": ("invented", "PRBS7 register seed"),
    "ffe.pre": ("invented", "pre-cursor tap"),
    "ffe.main": ("invented", "main tap"),
    "ffe.post": ("invented", "post-cursor tap"),
    "ffe.idac_bits": ("invented", "tap IDAC resolution"),
    "driver.diff_swing": ("published", "1.3 V differential output swing"),
    "driver.bandwidth": ("invented", "single-pole driver bandwidth, 0.75 x baud"),
    "mzm.v_pi": ("calibrated", "root-found so a 1.3 V swing gives 4.3 dB ER"),
    "mzm.bias_phase": ("invented", "quadrature bias"),
    "mzm.insertion_loss": ("invented", "modulator insertion loss, dB"),
    "mzm.static_er": ("invented", "static extinction floor, dB"),
    "path.laser_power": ("invented", "CW laser launch power, mW"),
    "path.fiber_loss": ("invented", "5 m fiber plus connectors, dB"),
    "path.voa_atten": ("invented", "variable attenuator setting, dB"),
    "pd.responsivity": ("published", "0.35 A/W at 4 K"),
    "pd.capacitance": ("published", "80 fF at 4 K"),
    "pd.dark_current": ("invented", "dark current, nA"),
    "tia.transimpedance": ("published", "2.1 kOhm front-end gain"),
    "tia.bandwidth": ("invented", "composite front-end pole, 0.7 x baud"),
    "tia.input_noise_density": ("calibrated", "fitted to 18% UI at 1e-8 BER, -1 dBm OMA"),
    "tia.dc_comp_cutoff": ("invented", "DC-compensation high-pass corner"),
    "tia.dc_comp": ("invented", "DC compensation enabled"),
    "noise.shot": ("invented", "photodiode shot noise enabled"),
    "noise.tia": ("invented", "front-end input noise enabled"),
    "vco.f_min": ("published", "13.5 GHz bottom of tuning range"),
    "vco.f_max": ("published", "14.6 GHz top of tuning range"),
    "vco.bank_bits": ("published", "5-bit capacitor bank"),
    "vco.kvco": ("invented", "varactor gain, Hz/V"),
    "cdr.kp": ("invented", "proportional gain, V/vote"),
    "cdr.ki": ("invented", "integral gain, V/vote"),
    "cdr.freq_offset_ppm": ("invented", "VCO frequency error, ppm"),
    "cdr.initial_phase": ("invented", "sampling phase at start, UI"),
    "cdr.jitter_ui": ("invented", "random-walk VCO jitter per step, UI"),
    "cdr.lock_window": ("invented", "lock detector window, symbols"),
    "cdr.lock_vote_max": ("invented", "lock detector |mean vote| limit"),
    "cdr.lock_wander_ui": ("invented", "lock detector phase wander limit, UI p-p"),
    "cdr.acquisition_budget": ("invented", "symbols allowed for lock"),
    "cdr.mid_threshold": ("invented", "phase-detector slicer level, V"),
}


def _node(cfg: LinkConfig, path: tuple[str, ...]):
    for name in path:
        cfg = getattr(cfg, name)
    return cfg


def flatten(cfg: LinkConfig) -> dict[str, object]:
    """Dotted-key view of every configurable leaf, in schema order."""
    flat = {}
    for section, path in SECTIONS.items():
        node = _node(cfg, path)
        for f in dataclasses.fields(node):
            key = f"{section}.{f.name}"
            value = getattr(node, f.name)
            if key in _EXCLUDED or dataclasses.is_dataclass(value):
                continue
            flat[key] = value
    return flat


def build(flat: dict[str, object]) -> LinkConfig:
    """Inverse of :func:`flatten`; invariant failures become :class:`ConfigError`."""
    by_section: dict[str, dict[str, object]] = {s: {} for s in SECTIONS}
    for key, value in flat.items():
        section, _, name = key.partition(".")
        by_section[section][name] = value
    try:
        vco = VcoConfig(**by_section["vco"])
        cdr = CdrConfig(vco=vco, **by_section["cdr"])
        return LinkConfig(
            ffe=FfeTaps(**by_section["ffe"]),
            driver=DriverConfig(**by_section["driver"]),
            mzm=MzmConfig(**by_section["mzm"]),
            path=OpticalPath(**by_section["path"]),
            pd=PdConfig(**by_section["pd"]),
            tia=TiaConfig(**by_section["tia"]),
            noise=NoiseConfig(**by_section["noise"]),
            cdr=cdr,
            **by_section["link"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse(key: str, text: str, default: object) -> object:
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if isinstance(default, int):
            return int(text, 0)
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from None


def _format(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def parse_config(text: str) -> LinkConfig:
    flat = flatten(LinkConfig())
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in flat:
            raise ConfigError(f"unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"duplicate config key {key!r}")
        seen.add(key)
        flat[key] = _parse(key, value, flat[key])
    return build(flat)


def load_config(path: str | Path | None = None) -> LinkConfig:
    if path is None:
        return LinkConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: LinkConfig) -> str:
    lines = []
    section = None
    for key, value in flatten(cfg).items():
        s = key.split(".", 1)[0]
        if s != section:
            if section is not None:
                lines.append("")
            section = s
        lines.append(f"{key} = {_format(value)}")
    return "\n".join(lines) + "\n"


def config_report(cfg: LinkConfig) -> str:
    """Every config value with its default and provenance tag."""
    defaults = flatten(LinkConfig())
    rows = ["# key | value | default | provenance | note"]
    for key, value in flatten(cfg).items():
        tag, note = PROVENANCE[key]
        rows.append(f"{key} | {_format(value)} | {_format(defaults[key])} | {tag} | {note}")
    return "\n".join(rows) + "\n"
