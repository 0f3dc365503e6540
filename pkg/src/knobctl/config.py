"""Application config files.

INI-style text: ``[SECTION]`` headers, ``KEY = value`` lines and ``#``
comments. Numeric ranges are written ``(start;stop;step)`` and expand to
an inclusive arithmetic grid. A knob line's trailing comment, when it is a
bare identifier, names the knob::

    [FIXED]
    PBS = (1.0;0.05;-0.05)
    EBS = (0.05;1;+0.05)
    TRAIN_RATIO = 0.75
    ACCURATE_KNOBS = {'iter1': '40', 'iter2': '40'}

    [KNOBS]
    NUM_FIRST_ITER = (1;40;+1) # iter1
    NUM_SECOND_ITER = (1;40;+1) # iter2

Optional sections ``SCHEMA``, ``HARNESS``, ``INPUTS`` and ``SYNTH`` describe
the profile file columns, how to launch the program, the program inputs and
a synthetic benchmark respectively.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .core import Knob, KnobSpace
from .dataset import ProfileSchema
from .synthbench import BenchHarness


class ConfigError(ValueError):
    pass


_RANGE = re.compile(r"^\(([^;()]*);([^;()]*);([^;()]*)\)$")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


@dataclass(frozen=True)
class RangeSpec:
    start: float
    stop: float
    step: float

    def expand(self) -> List[float]:
        return expand_range(self.start, self.stop, self.step)

    def __str__(self):
        sign = "+" if self.step > 0 else "-"
        return f"({_num(self.start)};{_num(self.stop)};{sign}{_num(abs(self.step))})"


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def expand_range(start: float, stop: float, step: float) -> List[float]:
    """Inclusive grid ``start + i*step``; values rounded to 12 decimals."""
    if start == stop:
        return [float(start)]
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def parse_range_spec(text: str) -> RangeSpec:
    raw = text
    text = text.strip()
    lead = len(raw) - len(raw.lstrip())
    m = _RANGE.match(text)
    if not m:
        raise ConfigError(f"col {lead + 1}: expected '(start;stop;step)', got {raw.strip()!r}")
    vals = []
    for g, name in zip((1, 2, 3), ("start", "stop", "step")):
        try:
            v = float(m.group(g))
        except ValueError:
            raise ConfigError(f"col {lead + m.start(g) + 1}: bad {name} {m.group(g).strip()!r}") from None
        if not math.isfinite(v):
            raise ConfigError(f"col {lead + m.start(g) + 1}: non-finite {name}")
        vals.append(v)
    start, stop, step = vals
    col = lead + m.start(3) + 1
    if step == 0:
        raise ConfigError(f"col {col}: step must be nonzero")
    if start != stop and (stop - start) * step < 0:
        raise ConfigError(f"col {col}: step {m.group(3).strip()} points away from stop")
    return RangeSpec(start, stop, step)


def parse_range(text: str) -> List[float]:
    """Expand ``"(start;stop;step)"`` to its grid, e.g. "(1;40;+1)" -> 1..40."""
    return parse_range_spec(text).expand()


@dataclass(frozen=True)
class KnobSpec:
    key: str
    name: str
    range: RangeSpec


@dataclass(frozen=True)
class SynthSpec:
    n_inputs: int = 20
    feature_dim: int = 2
    noise: float = 0.0
    input_sensitivity: float = 1.0
    settings: Union[str, int] = "all"


@dataclass(frozen=True)
class AppConfig:
    pbs: RangeSpec
    ebs: RangeSpec
    train_ratio: float
    accurate_knobs: Dict[str, str]
    knobs: Tuple[KnobSpec, ...]
    seed: Optional[int] = None
    schema: ProfileSchema = ProfileSchema()
    harness: Optional[BenchHarness] = None
    inputs: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    synth: Optional[SynthSpec] = None
    has_schema: bool = False

    @property
    def pbs_grid(self) -> List[float]:
        return self.pbs.expand()

    @property
    def ebs_grid(self) -> List[float]:
        return self.ebs.expand()

    @property
    def space(self) -> KnobSpace:
        knobs = []
        for ks in self.knobs:
            levels = sorted(ks.range.expand())
            value = self.accurate_knobs.get(ks.name, self.accurate_knobs.get(ks.key))
            probe = Knob(ks.name, tuple(levels), 0)
            knobs.append(Knob(ks.name, tuple(levels), probe.index_of(float(value))))
        return KnobSpace(tuple(knobs))


_FIXED = {"PBS", "EBS", "TRAIN_RATIO", "ACCURATE_KNOBS", "SEED"}
_SCHEMA = {"INPUT", "FEATURES", "DISTANCE", "COST", "WEIGHT"}
_HARNESS = {"COMMAND", "DISTANCE_PREFIX", "COST_PREFIX", "TIMEOUT", "REPEAT"}
_SYNTH = {"N_INPUTS", "FEATURE_DIM", "NOISE", "INPUT_SENSITIVITY", "SETTINGS"}
_SECTIONS = {"FIXED", "KNOBS", "SCHEMA", "HARNESS", "INPUTS", "SYNTH"}


def _split_comment(line: str) -> Tuple[str, str]:
    if "#" in line:
        body, comment = line.split("#", 1)
        return body.rstrip(), comment.strip()
    return line.rstrip(), ""


def parse_config(text: str, source: str = "<config>") -> AppConfig:
    sections: Dict[str, List[Tuple[int, str, str, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, comment = _split_comment(raw)
        line = body.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().upper()
            if current not in _SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{current}]")
            if current in sections:
                raise ConfigError(f"{source}:{lineno}: duplicate section [{current}]")
            sections[current] = []
            continue
        if current is None:
            raise ConfigError(f"{source}:{lineno}: entry outside any section")
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'KEY = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        sections[current].append((lineno, key, value, comment))

    def entries(name, allowed):
        out = {}
        for lineno, key, value, _ in sections.get(name, []):
            k = key.upper()
            if allowed is not None and k not in allowed:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r} in [{name}]")
            if k in out:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} in [{name}]")
            out[k] = (lineno, value)
        return out

    def need(table, section, key):
        if key not in table:
            raise ConfigError(f"{source}: missing required key {key} in [{section}]")
        return table[key]

    def rng(lineno, value):
        try:
            return parse_range_spec(value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None

    def conv(lineno, key, value, fn):
        try:
            return fn(value)
        except (ValueError, TypeError):
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from None

    if "FIXED" not in sections:
        raise ConfigError(f"{source}: missing [FIXED] section")
    if "KNOBS" not in sections or not sections["KNOBS"]:
        raise ConfigError(f"{source}: missing or empty [KNOBS] section")
    fixed = entries("FIXED", _FIXED)
    pbs = rng(*need(fixed, "FIXED", "PBS"))
    ebs = rng(*need(fixed, "FIXED", "EBS"))
    ln, tr = need(fixed, "FIXED", "TRAIN_RATIO")
    train_ratio = conv(ln, "TRAIN_RATIO", tr, float)
    if not 0.0 < train_ratio < 1.0:
        raise ConfigError(f"{source}:{ln}: TRAIN_RATIO must lie in (0, 1)")
    for g, (ln_g, _), key in ((pbs, fixed["PBS"], "PBS"), (ebs, fixed["EBS"], "EBS")):
        vals = g.expand()
        lo = 0.0 if key == "EBS" else 1e-300
        if min(vals) < lo or max(vals) > 1.0:
            raise ConfigError(f"{source}:{ln_g}: {key} values must lie in {'[0, 1]' if key == 'EBS' else '(0, 1]'}")
    ln, acc_text = need(fixed, "FIXED", "ACCURATE_KNOBS")
    try:
        acc = ast.literal_eval(acc_text)
    except (ValueError, SyntaxError):
        raise ConfigError(f"{source}:{ln}: ACCURATE_KNOBS must be a dict literal") from None
    if not isinstance(acc, dict):
        raise ConfigError(f"{source}:{ln}: ACCURATE_KNOBS must be a dict literal")
    accurate = {str(k): str(v) for k, v in acc.items()}
    seed = None
    if "SEED" in fixed:
        ln_s, seed_text = fixed["SEED"]
        seed = conv(ln_s, "SEED", seed_text, int)

    knobs = []
    for lineno, key, value, comment in sections["KNOBS"]:
        name = comment if comment and _IDENT.match(comment) else key
        knobs.append((lineno, KnobSpec(key, name, rng(lineno, value))))
    names = [k.name for _, k in knobs]
    if len(set(names)) != len(names):
        raise ConfigError(f"{source}: duplicate knob names {names}")
    known = {k.name for _, k in knobs} | {k.key for _, k in knobs}
    for name in accurate:
        if name not in known:
            raise ConfigError(f"{source}:{ln}: ACCURATE_KNOBS names unknown knob {name!r}")
    for lineno, ks in knobs:
        value = accurate.get(ks.name, accurate.get(ks.key))
        if value is None:
            raise ConfigError(f"{source}:{ln}: ACCURATE_KNOBS lacks knob {ks.name!r}")
        try:
            Knob(ks.name, tuple(sorted(ks.range.expand())), 0).index_of(float(value))
        except ValueError:
            raise ConfigError(
                f"{source}:{ln}: accurate value {value!r} for knob {ks.name!r} "
                f"is not in its range (line {lineno})") from None

    synth = None
    if "SYNTH" in sections:
        st = entries("SYNTH", _SYNTH)
        kw = {}
        for key, attr, fn in (("N_INPUTS", "n_inputs", int), ("FEATURE_DIM", "feature_dim", int),
                              ("NOISE", "noise", float), ("INPUT_SENSITIVITY", "input_sensitivity", float)):
            if key in st:
                kw[attr] = conv(st[key][0], key, st[key][1], fn)
        if "SETTINGS" in st:
            v = st["SETTINGS"][1]
            kw["settings"] = "all" if v.lower() == "all" else conv(st["SETTINGS"][0], "SETTINGS", v, int)
        synth = SynthSpec(**kw)

    has_schema = "SCHEMA" in sections
    if has_schema:
        sc = entries("SCHEMA", _SCHEMA)
        feats = tuple(f.strip() for f in sc["FEATURES"][1].split(",") if f.strip()) if "FEATURES" in sc else ()
        schema = ProfileSchema(
            input_column=sc.get("INPUT", (0, "input_id"))[1],
            feature_columns=feats,
            distance_column=sc.get("DISTANCE", (0, "distance"))[1],
            cost_column=sc.get("COST", (0, "cost"))[1],
            weight_column=sc["WEIGHT"][1] if "WEIGHT" in sc else None,
        )
    elif synth is not None:
        schema = ProfileSchema(feature_columns=tuple(f"f{d}" for d in range(synth.feature_dim)))
    else:
        schema = ProfileSchema()
    cols = schema.header(KnobSpace(tuple(Knob(k.name, (0.0,), 0) for _, k in knobs)))
    if len(set(cols)) != len(cols):
        raise ConfigError(f"{source}: profile columns collide: {cols}")

    harness = None
    if "HARNESS" in sections:
        hs = entries("HARNESS", _HARNESS)
        ln_c, command = need(hs, "HARNESS", "COMMAND")
        cost_prefix = hs["COST_PREFIX"][1] if "COST_PREFIX" in hs else "COST"
        harness = BenchHarness(
            command=command,
            distance_prefix=hs["DISTANCE_PREFIX"][1] if "DISTANCE_PREFIX" in hs else "DISTANCE",
            cost_prefix=cost_prefix or None,
            timeout=conv(hs["TIMEOUT"][0], "TIMEOUT", hs["TIMEOUT"][1], float) if "TIMEOUT" in hs else 60.0,
            repeat=conv(hs["REPEAT"][0], "REPEAT", hs["REPEAT"][1], int) if "REPEAT" in hs else 1,
        )

    inputs = {}
    for lineno, key, value, _ in sections.get("INPUTS", []):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        vals = tuple(conv(lineno, key, p, float) for p in parts)
        if len(vals) != len(schema.feature_columns):
            raise ConfigError(f"{source}:{lineno}: input {key!r} has {len(vals)} features, "
                              f"schema declares {len(schema.feature_columns)}")
        if key in inputs:
            raise ConfigError(f"{source}:{lineno}: duplicate input {key!r}")
        inputs[key] = vals

    return AppConfig(pbs, ebs, train_ratio, accurate, tuple(k for _, k in knobs), seed,
                     schema, harness, inputs, synth, has_schema)


def load_config(path) -> AppConfig:
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def dump_config(cfg: AppConfig) -> str:
    lines = ["[FIXED]", "",
             f"PBS = {cfg.pbs}",
             f"EBS = {cfg.ebs}",
             f"TRAIN_RATIO = {_num(cfg.train_ratio)}",
             f"ACCURATE_KNOBS = {cfg.accurate_knobs!r}"]
    if cfg.seed is not None:
        lines.append(f"SEED = {cfg.seed}")
    lines += ["", "[KNOBS]", ""]
    for k in cfg.knobs:
        suffix = f" # {k.name}" if k.name != k.key else ""
        lines.append(f"{k.key} = {k.range}{suffix}")
    if cfg.has_schema:
        s = cfg.schema
        lines += ["", "[SCHEMA]", "", f"INPUT = {s.input_column}",
                  f"FEATURES = {', '.join(s.feature_columns)}",
                  f"DISTANCE = {s.distance_column}", f"COST = {s.cost_column}"]
        if s.weight_column:
            lines.append(f"WEIGHT = {s.weight_column}")
    if cfg.harness is not None:
        h = cfg.harness
        lines += ["", "[HARNESS]", "", f"COMMAND = {h.command}",
                  f"DISTANCE_PREFIX = {h.distance_prefix}",
                  f"COST_PREFIX = {h.cost_prefix or ''}",
                  f"TIMEOUT = {_num(h.timeout)}", f"REPEAT = {h.repeat}"]
    if cfg.inputs:
        lines += ["", "[INPUTS]", ""]
        lines += [f"{k} = {', '.join(_num(v) for v in vals)}" for k, vals in cfg.inputs.items()]
    if cfg.synth is not None:
        s = cfg.synth
        lines += ["", "[SYNTH]", "", f"N_INPUTS = {s.n_inputs}", f"FEATURE_DIM = {s.feature_dim}",
                  f"NOISE = {_num(s.noise)}", f"INPUT_SENSITIVITY = {_num(s.input_sensitivity)}",
                  f"SETTINGS = {s.settings}"]
    return "\n".join(lines) + "\n"
