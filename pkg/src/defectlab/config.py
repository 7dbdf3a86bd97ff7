"""Scenario configuration: INI files (section / key = value) or an equivalent JSON mirror."""
import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

SURFACES = {
    "static-plane": 1,
    "circle": 1,
    "rigid-wiggle": 1,
    "wiggly-family": 1,
    "rigid-vortex-line": 2,
}
PROBES = {"zeta", "gap", "d2e", "track", "energy", "light-cone", "matrix"}


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        where = f"{path}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line
        self.path = path


@dataclass
class Scenario:
    name: str
    surface: str
    eps: list
    k: int = 1
    N: int = 2
    # surface parameters: circle radius, graph amplitude and wavelength
    radius: float = 2.0
    amplitude: float = 0.1
    wavelength: float = 1.0
    ratio: float = 0.3
    # grid: nodes per eps (resolution), half width of the box, or explicit node counts
    resolution: float = 8.0
    half_width: float = 3.2
    shape: list = None
    cfl: float = 0.5
    rho0: float = 1.0
    rho1: float = 0.9
    T0: float = 1.0
    T1: float = 1.2
    probes: list = field(default_factory=lambda: ["track"])
    output: str = "out"
    # h-sweep node counts for the rigid scenarios
    h_ladder: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def content_hash(self):
        """Hash of the configuration, independent of the output directory."""
        data = self.to_dict()
        data.pop("output")
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FLOAT_KEYS = {"radius", "amplitude", "wavelength", "ratio", "resolution", "half_width", "cfl",
               "rho0", "rho1", "T0", "T1"}
_INT_KEYS = {"k", "N"}
_LIST_FLOAT = {"eps"}
_LIST_INT = {"shape", "h_ladder"}
_LIST_STR = {"probes"}
_SECTIONS = {
    "scenario": {"name", "surface", "k", "N", "eps"},
    "surface": {"radius", "amplitude", "wavelength", "ratio"},
    "grid": {"resolution", "half_width", "shape", "cfl", "h_ladder"},
    "chart": {"rho0", "rho1", "T0", "T1"},
    "probes": {"probes"},
    "output": {"output"},
}
_ALIASES = {("probes", "list"): "probes", ("output", "dir"): "output",
            ("output", "directory"): "output"}


def _split(text):
    return [p for p in re.split(r"[,\s]+", text.strip()) if p]


def _convert(key, raw):
    if isinstance(raw, (list, tuple)):
        items = [str(x) for x in raw]
    else:
        items = None
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    if key in _LIST_FLOAT:
        return [float(x) for x in (items or _split(raw))]
    if key in _LIST_INT:
        return [int(x) for x in (items or _split(raw))]
    if key in _LIST_STR:
        return [x.lower() for x in (items or _split(raw))]
    return str(raw).strip()


def _key_lines(text):
    """Line number of every (section, key) in an INI text."""
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), no)
        elif section and "=" in s and not s.startswith(("#", ";")):
            lines[(section, s.split("=", 1)[0].strip().lower())] = no
    return lines


def _from_sections(sections, path, lines):
    values = {}
    for sec, items in sections.items():
        sec_l = sec.lower()
        if sec_l not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec_l, None)), path)
        for key, raw in items.items():
            key_l = key.lower()
            name = _ALIASES.get((sec_l, key_l))
            if name is None:
                name = next((k for k in _SECTIONS[sec_l] if k.lower() == key_l), None)
            if name is None:
                raise ConfigError(f"unknown key '{key}' in [{sec}]", lines.get((sec_l, key_l)), path)
            try:
                values[name] = _convert(name, raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for '{key}': {exc}", lines.get((sec_l, key_l)),
                                  path) from None
    return values


def _validate(values, path, lines):
    def line_of(sec, key):
        return lines.get((sec, key.lower()))

    for req in ("name", "surface", "eps"):
        if req not in values:
            raise ConfigError(f"missing required key '{req}' in [scenario]",
                              lines.get(("scenario", None)), path)
    surface = values["surface"]
    if surface not in SURFACES:
        raise ConfigError(f"unknown scenario surface '{surface}' (expected one of "
                          f"{', '.join(sorted(SURFACES))})", line_of("scenario", "surface"), path)
    k = values.setdefault("k", SURFACES[surface])
    if k not in (1, 2):
        raise ConfigError("k must be 1 or 2", line_of("scenario", "k"), path)
    if k != SURFACES[surface]:
        raise ConfigError(f"surface '{surface}' has codimension {SURFACES[surface]}, not {k}",
                          line_of("scenario", "k"), path)
    n_dim = values.setdefault("N", 1 + k)
    if n_dim != 1 + k:
        raise ConfigError(f"N must equal 1 + k = {1 + k}", line_of("scenario", "N"), path)
    eps = values["eps"]
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("eps list must hold positive values", line_of("scenario", "eps"), path)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps list must be strictly decreasing", line_of("scenario", "eps"), path)
    bad = [p for p in values.get("probes", []) if p not in PROBES]
    if bad:
        raise ConfigError(f"unknown probe(s) {bad}", line_of("probes", "probes") or
                          line_of("probes", "list"), path)
    if values.get("shape") is not None and len(values["shape"]) != 1 + k:
        raise ConfigError(f"grid shape needs {1 + k} entries", line_of("grid", "shape"), path)
    if values.get("cfl", 0.5) <= 0 or values.get("cfl", 0.5) >= 1:
        raise ConfigError("cfl must lie in (0, 1)", line_of("grid", "cfl"), path)
    return Scenario(**values)


def parse_ini(text, path=None):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path or "<config>"))
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), getattr(exc, "lineno", None), path) from None
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    lines = _key_lines(text)
    return _validate(_from_sections(sections, path, lines), path, lines)


def parse_json(text, path=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, path) from None
    if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
        raise ConfigError("JSON config must map section names to objects", None, path)
    return _validate(_from_sections(data, path, {}), path, {})


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return parse_json(text, path)
    return parse_ini(text, path)
