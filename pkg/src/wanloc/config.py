"""Run configuration: a flat INI dialect with repeatable keys and line numbers.

Example::

    [potential]
    preset = mathieu1d
    amplitude = 0.5

    [window]
    n = 0
    m = 1

    [grid]
    N = 64
    cutoff = 8

Explicit potentials use one ``G = a,b,c ; re,im`` line per Fourier
coefficient instead of ``preset``; ``[lattice]`` then gives the basis
vectors as ``a1 = x,y,z`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .fiber import BandWindow, PotentialSpec, preset
from .lattice import build_lattice
from .optimizer import OptimizerConfig

SECTIONS = {
    "lattice": {"a1", "a2", "a3"},
    "potential": {"preset", "amplitude", "G"},
    "window": {"n", "m"},
    "grid": {"N", "cutoff", "samplesPerCell"},
    "optimizer": {"maxIter", "gradTol", "armijoC", "initialStep", "stepShrink",
                  "recenterEvery", "seed", "fdCheckEvery", "start"},
    "frame": {"trial", "trialModes", "windowed"},
    "output": {"directory", "formats"},
}
REPEATABLE = {("potential", "G")}

_OPT_KEYS = {"maxIter": "max_iter", "gradTol": "grad_tol", "armijoC": "armijo_c",
             "initialStep": "initial_step", "stepShrink": "step_shrink",
             "recenterEvery": "recenter_every", "seed": "seed", "fdCheckEvery": "fd_check_every"}


@dataclass
class Entry:
    value: str
    line: int


@dataclass
class RawConfig:
    source: str
    sections: dict = field(default_factory=dict)  # name -> {key: [Entry, ...]}
    header_lines: dict = field(default_factory=dict)

    def has(self, section: str) -> bool:
        return section in self.sections

    def require(self, section: str):
        if section not in self.sections:
            raise ConfigError(f"{self.source}: missing section [{section}]")
        return self.sections[section]

    def get(self, section: str, key: str, default=None):
        entries = self.sections.get(section, {}).get(key)
        return entries[-1] if entries else default

    def where(self, entry: Entry) -> str:
        return f"{self.source}:{entry.line}"


def parse_text(text: str, source: str = "<config>") -> RawConfig:
    """Parse config text, rejecting unknown sections and keys with line numbers."""
    cfg = RawConfig(source)
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: malformed section header {raw.strip()!r}")
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{current}]")
            if current in cfg.sections:
                raise ConfigError(f"{source}:{lineno}: section [{current}] repeated")
            cfg.sections[current] = {}
            cfg.header_lines[current] = lineno
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside of any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SECTIONS[current]:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} in [{current}]")
        bucket = cfg.sections[current].setdefault(key, [])
        if bucket and (current, key) not in REPEATABLE:
            raise ConfigError(f"{source}:{lineno}: key {key!r} repeated in [{current}]")
        bucket.append(Entry(value, lineno))
    return cfg


def load(path) -> RawConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path))


def _floats(cfg: RawConfig, entry: Entry, what: str):
    try:
        return [float(x) for x in entry.value.split(",")]
    except ValueError:
        raise ConfigError(f"{cfg.where(entry)}: {what} must be comma-separated numbers") from None


def _int(cfg: RawConfig, entry: Entry, what: str) -> int:
    try:
        return int(entry.value)
    except ValueError:
        raise ConfigError(f"{cfg.where(entry)}: {what} must be an integer") from None


def _float(cfg: RawConfig, entry: Entry, what: str) -> float:
    try:
        return float(entry.value)
    except ValueError:
        raise ConfigError(f"{cfg.where(entry)}: {what} must be a number") from None


def parse_coefficient(cfg: RawConfig, entry: Entry, dim: int):
    """``'a,b,c ; re,im'`` to ``(tuple of ints, complex)``."""
    parts = entry.value.split(";")
    if len(parts) != 2:
        raise ConfigError(f"{cfg.where(entry)}: expected 'G = a,b,c ; re,im'")
    try:
        g = tuple(int(x) for x in parts[0].split(","))
        re_im = [float(x) for x in parts[1].split(",")]
    except ValueError:
        raise ConfigError(f"{cfg.where(entry)}: bad integer G or coefficient") from None
    if len(g) != dim:
        raise ConfigError(f"{cfg.where(entry)}: G has {len(g)} components, lattice has {dim}")
    if len(re_im) != 2:
        raise ConfigError(f"{cfg.where(entry)}: coefficient must be 're,im'")
    return g, complex(re_im[0], re_im[1])


@dataclass
class RunConfig:
    lattice: object
    potential: PotentialSpec
    window: BandWindow | None
    sizes: tuple | None
    cutoff: float | None
    samples_per_cell: tuple | None
    optimizer: OptimizerConfig
    start: str = "identity"
    trial: str = "eigenvector"
    trial_modes: int | None = None
    windowed: bool = True
    directory: str | None = None
    formats: tuple = ("json", "csv")


def build(cfg: RawConfig, need=("potential", "window", "grid")) -> RunConfig:
    """Assemble typed settings, insisting on the sections listed in ``need``."""
    for name in need:
        cfg.require(name)
    pot_sec = cfg.require("potential")
    if "preset" in pot_sec:
        if "G" in pot_sec:
            ent = pot_sec["G"][0]
            raise ConfigError(f"{cfg.where(ent)}: give either preset or G lines, not both")
        amp_entry = cfg.get("potential", "amplitude")
        amp = _float(cfg, amp_entry, "amplitude") if amp_entry else 0.0
        lat, pot = preset(pot_sec["preset"][-1].value, amp)
        if cfg.has("lattice"):
            lat = _lattice(cfg, lat.dim)
    else:
        if "amplitude" in pot_sec:
            ent = pot_sec["amplitude"][0]
            raise ConfigError(f"{cfg.where(ent)}: amplitude only applies to a preset")
        lat = _lattice(cfg, None)
        coeffs = {}
        for ent in pot_sec.get("G", []):
            g, c = parse_coefficient(cfg, ent, lat.dim)
            if g in coeffs:
                raise ConfigError(f"{cfg.where(ent)}: coefficient for G={g} given twice")
            coeffs[g] = c
        pot = PotentialSpec.from_coefficients(coeffs) if coeffs else \
            PotentialSpec.from_coefficients({(0,) * lat.dim: 0.0})

    window = None
    if cfg.has("window"):
        n_e, m_e = cfg.get("window", "n"), cfg.get("window", "m")
        if n_e is None or m_e is None:
            raise ConfigError(f"{cfg.source}:{cfg.header_lines['window']}: [window] needs n and m")
        n, m = _int(cfg, n_e, "n"), _int(cfg, m_e, "m")
        if n < 0 or m < 1:
            raise ConfigError(f"{cfg.where(m_e)}: need n >= 0 and m >= 1")
        window = BandWindow(n, m)

    sizes = cutoff = spc = None
    if cfg.has("grid"):
        n_e, c_e = cfg.get("grid", "N"), cfg.get("grid", "cutoff")
        if n_e is None or c_e is None:
            raise ConfigError(f"{cfg.source}:{cfg.header_lines['grid']}: [grid] needs N and cutoff")
        vals = _floats(cfg, n_e, "N")
        if any(v != int(v) for v in vals):
            raise ConfigError(f"{cfg.where(n_e)}: N must be integers")
        sizes = tuple(int(v) for v in vals)
        if len(sizes) == 1:
            sizes = sizes * lat.dim
        if len(sizes) != lat.dim:
            raise ConfigError(f"{cfg.where(n_e)}: N needs {lat.dim} entries")
        cutoff = _float(cfg, c_e, "cutoff")
        if cutoff <= 0:
            raise ConfigError(f"{cfg.where(c_e)}: cutoff must be positive")
        s_e = cfg.get("grid", "samplesPerCell")
        if s_e is not None:
            spc = tuple(int(v) for v in _floats(cfg, s_e, "samplesPerCell"))
            if len(spc) == 1:
                spc = spc * lat.dim

    kw = {}
    start = "identity"
    for key, entries in cfg.sections.get("optimizer", {}).items():
        ent = entries[-1]
        if key == "start":
            start = ent.value
            if start not in ("identity", "random"):
                raise ConfigError(f"{cfg.where(ent)}: start must be identity or random")
            continue
        name = _OPT_KEYS[key]
        ftype = {f.name: f.type for f in fields(OptimizerConfig)}[name]
        kw[name] = _int(cfg, ent, key) if ftype in (int, "int") else _float(cfg, ent, key)
    try:
        opt = OptimizerConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{cfg.source}: [optimizer] {exc}") from None

    trial, modes, windowed = "eigenvector", None, True
    if cfg.has("frame"):
        ent = cfg.get("frame", "trial")
        if ent is not None:
            trial = ent.value
            if trial not in ("eigenvector", "random"):
                raise ConfigError(f"{cfg.where(ent)}: trial must be eigenvector or random")
        ent = cfg.get("frame", "trialModes")
        if ent is not None:
            modes = _int(cfg, ent, "trialModes")
        ent = cfg.get("frame", "windowed")
        if ent is not None:
            if ent.value.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ConfigError(f"{cfg.where(ent)}: windowed must be a boolean")
            windowed = ent.value.lower() in ("true", "yes", "1")

    directory, formats = None, ("json", "csv")
    if cfg.has("output"):
        ent = cfg.get("output", "directory")
        directory = ent.value if ent else None
        ent = cfg.get("output", "formats")
        if ent is not None:
            formats = tuple(s.strip().lower() for s in ent.value.split(",") if s.strip())
            bad = set(formats) - {"json", "csv"}
            if bad:
                raise ConfigError(f"{cfg.where(ent)}: unknown formats {sorted(bad)}")
    return RunConfig(lattice=lat, potential=pot, window=window, sizes=sizes, cutoff=cutoff,
                     samples_per_cell=spc, optimizer=opt, start=start, trial=trial,
                     trial_modes=modes, windowed=windowed, directory=directory, formats=formats)


def _lattice(cfg: RawConfig, dim):
    sec = cfg.require("lattice")
    vecs = []
    for key in ("a1", "a2", "a3"):
        if key in sec:
            vecs.append((sec[key][-1], _floats(cfg, sec[key][-1], key)))
    if not vecs:
        raise ConfigError(f"{cfg.source}:{cfg.header_lines['lattice']}: [lattice] needs a1..ad")
    d = len(vecs)
    for ent, v in vecs:
        if len(v) != d:
            raise ConfigError(f"{cfg.where(ent)}: expected {d} components")
    if dim is not None and d != dim:
        raise ConfigError(f"{cfg.source}: [lattice] is {d}-D but the preset is {dim}-D")
    return build_lattice(np.array([v for _, v in vecs]))
