"""Synthetic tunable programs with known surfaces, and a subprocess harness
for profiling real ones.
"""

from __future__ import annotations

import logging
import math
import os
import re
import shlex
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (Knob, KnobSetting, KnobSpace, RunRecord, accurate_setting,
                   enumerate_settings)
from .dataset import Dataset, ProfileSchema, read_profile, write_profile

log = logging.getLogger(__name__)


# -- synthetic surfaces --------------------------------------------------------


@dataclass(frozen=True)
class CostBlock:
    intercept: float
    feature_coef: Tuple[float, ...]
    knob_coef: Tuple[float, ...]

    def evaluate(self, features, values) -> float:
        out = self.intercept
        for c, f in zip(self.feature_coef, features):
            out += c * f
        for c, v in zip(self.knob_coef, values):
            out += c * v
        return out


@dataclass(frozen=True)
class SurfaceSpec:
    """A synthetic program.

    Cost is linear in (features, knob values) within each of two regimes
    picked by whether feature 0 is at most ``cost_split``. Raw distance is
    ``scale_i * sum_k w_k * (1 - q_k) ** gamma_ik`` where ``q_k`` in [0, 1]
    is knob k's quality fraction (1 at the accurate level), so error falls
    monotonically as any knob moves toward its accurate level. Per-input
    features, exponents and scale spread out with ``input_sensitivity``;
    at 0 every input is identical.
    """

    space: KnobSpace
    feature_dim: int
    cost_blocks: Tuple[CostBlock, CostBlock]
    cost_split: float
    error_weights: Tuple[float, ...]
    input_sensitivity: float = 1.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.feature_dim < 0:
            raise ValueError("feature_dim must be >= 0")
        if len(self.error_weights) != self.space.arity:
            raise ValueError("one error weight per knob required")
        if any(w <= 0 for w in self.error_weights):
            raise ValueError("error weights must be positive")
        for b in self.cost_blocks:
            if len(b.feature_coef) != self.feature_dim or len(b.knob_coef) != self.space.arity:
                raise ValueError("cost block arity mismatch")
        if self.noise < 0 or self.input_sensitivity < 0:
            raise ValueError("noise and input_sensitivity must be >= 0")

    @classmethod
    def default(cls, space: KnobSpace, feature_dim: int = 2, input_sensitivity: float = 1.0,
                noise: float = 0.0, seed: int = 0) -> "SurfaceSpec":
        """Random positive-cost surface whose cost rises with quality."""
        rng = np.random.default_rng([seed, 0xC057])
        blocks = []
        for _ in range(2):
            fc = tuple(float(v) for v in rng.uniform(0.5, 2.0, feature_dim))
            kc = []
            offset = 1.0
            for k in space.knobs:
                span = k.levels[-1] - k.levels[0] or 1.0
                mag = float(rng.uniform(0.5, 3.0)) / span
                if k.lowering_step > 0:  # accurate at the low end
                    mag = -mag
                    offset += -mag * k.levels[-1]
                kc.append(mag)
            blocks.append(CostBlock(offset + float(rng.uniform(0.0, 2.0)), fc, tuple(kc)))
        # second regime: steeper in knobs, so one global plane fits poorly
        hi = blocks[1]
        blocks[1] = CostBlock(hi.intercept, hi.feature_coef, tuple(3.0 * c for c in hi.knob_coef))
        if any(c < 0 for c in blocks[1].knob_coef):
            extra = sum(-c * k.levels[-1] for c, k in zip(blocks[1].knob_coef, space.knobs) if c < 0)
            blocks[1] = CostBlock(blocks[1].intercept + extra, hi.feature_coef, blocks[1].knob_coef)
        weights = tuple(float(w) for w in rng.uniform(0.5, 2.0, space.arity))
        return cls(space, feature_dim, (blocks[0], blocks[1]), 1.0 + input_sensitivity,
                   weights, input_sensitivity, noise, seed)

    # ground truth

    def input_id(self, i: int) -> str:
        return f"in{i:03d}"

    def _input_rng(self, i: int):
        return np.random.default_rng([self.seed, i, 0x1D])

    def features(self, i: int) -> Tuple[float, ...]:
        rng = self._input_rng(i)
        u = rng.uniform(0.0, 2.0, self.feature_dim)
        return tuple(float(1.0 + self.input_sensitivity * x) for x in u)

    def _error_params(self, i: int):
        rng = self._input_rng(i)
        rng.uniform(0.0, 2.0, self.feature_dim)  # features come first in the stream
        z = rng.normal(size=self.space.arity)
        s = rng.normal()
        gammas = np.exp(0.5 * self.input_sensitivity * z)
        return gammas, math.exp(self.input_sensitivity * s)

    def quality(self, setting: KnobSetting) -> Tuple[float, ...]:
        out = []
        for k, idx in zip(self.space.knobs, setting):
            n = len(k)
            if n == 1:
                out.append(1.0)
                continue
            bottom = 0 if k.lowering_step < 0 else n - 1
            out.append(abs(idx - bottom) / abs(k.accurate_level - bottom))
        return tuple(out)

    def distance(self, i: int, setting: KnobSetting) -> float:
        gammas, scale = self._error_params(i)
        q = self.quality(setting)
        return float(scale * sum(w * max(0.0, 1.0 - qk) ** g
                                 for w, qk, g in zip(self.error_weights, q, gammas)))

    def cost(self, features: Sequence[float], setting: KnobSetting) -> float:
        block = self.cost_blocks[0]
        if self.feature_dim and features[0] > self.cost_split:
            block = self.cost_blocks[1]
        return block.evaluate(features, self.space.values(setting))

    def record(self, i: int, setting: KnobSetting) -> RunRecord:
        feats = self.features(i)
        d = self.distance(i, setting)
        c = self.cost(feats, setting)
        if c <= 0:
            raise ValueError(f"surface produced non-positive cost {c} at {setting}")
        if self.noise > 0:
            rng = np.random.default_rng([self.seed, i, self.space.ordinal(setting), 0x401])
            c *= math.exp(self.noise * rng.normal())
            d = max(0.0, d + self.noise * sum(self.error_weights) * rng.normal())
        return RunRecord(self.input_id(i), feats, setting, d, c)


def generate_dataset(spec: SurfaceSpec, n_inputs: int,
                     settings: Union[str, int] = "all") -> Dataset:
    """Records for each input at every setting, or at ``settings`` sampled
    settings per input (the accurate setting is always included)."""
    space = spec.space
    names = tuple(f"f{d}" for d in range(spec.feature_dim))
    records = []
    acc = accurate_setting(space)
    for i in range(n_inputs):
        if settings == "all":
            chosen = list(enumerate_settings(space))
        else:
            m = int(settings)
            if not 1 <= m <= space.size:
                raise ValueError(f"sample size must lie in [1, {space.size}]")
            rng = np.random.default_rng([spec.seed, i, 0x5A])
            others = [o for o in range(space.size) if o != space.ordinal(acc)]
            picks = sorted(rng.choice(others, size=m - 1, replace=False).tolist()) if m > 1 else []
            chosen = sorted([acc] + [space.setting_at(o) for o in picks])
        records.extend(spec.record(i, k) for k in chosen)
    return Dataset(space, names, records)


def synthetic_space(levels: int = 10, knobs: int = 2) -> KnobSpace:
    return KnobSpace(tuple(Knob(f"k{j}", tuple(range(1, levels + 1)), levels - 1)
                           for j in range(knobs)))


# -- external programs ---------------------------------------------------------

_PLACEHOLDER = re.compile(r"\{(input|python|knob:[^{}]+|feature:[^{}]+)\}")


@dataclass(frozen=True)
class BenchHarness:
    """How to launch and read one profiled execution.

    ``command`` is split like a shell line; tokens may contain ``{input}``,
    ``{knob:NAME}``, ``{feature:NAME}`` and ``{python}``. Output lines
    starting with ``distance_prefix`` / ``cost_prefix`` carry the numbers;
    with no cost prefix the wall-clock time is the cost.
    """

    command: str
    distance_prefix: str = "DISTANCE"
    cost_prefix: Optional[str] = "COST"
    timeout: float = 60.0
    repeat: int = 1

    def check(self, space: KnobSpace) -> None:
        found = set(_PLACEHOLDER.findall(self.command))
        missing = [f"knob:{n}" for n in space.names if f"knob:{n}" not in found]
        if "input" not in found:
            missing.insert(0, "input")
        if missing:
            raise ValueError(f"command template lacks placeholders: {', '.join(missing)}")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")

    def argv(self, space: KnobSpace, input_id: str, setting: KnobSetting,
             feature_names: Sequence[str] = (), features: Sequence[float] = ()) -> List[str]:
        values = dict(zip(space.names, space.values(setting)))
        feats = dict(zip(feature_names, features))

        def sub(m):
            key = m.group(1)
            if key == "input":
                return input_id
            if key == "python":
                return sys.executable
            kind, name = key.split(":", 1)
            table = values if kind == "knob" else feats
            if name not in table:
                raise ValueError(f"unknown {kind} {name!r} in command template")
            return _num(table[name])

        return [_PLACEHOLDER.sub(sub, tok) for tok in shlex.split(self.command)]

    def parse(self, text: str, prefix: str) -> Optional[float]:
        for line in text.splitlines():
            if line.startswith(prefix):
                rest = line[len(prefix):].strip().lstrip(":=").strip()
                try:
                    return float(rest.split()[0])
                except (ValueError, IndexError):
                    return None
        return None


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass
class Failure:
    input_id: str
    setting: KnobSetting
    reason: str


@dataclass
class RunReport:
    dataset: Dataset
    failures: List[Failure] = field(default_factory=list)
    launched: int = 0


def _run_one(harness: BenchHarness, argv: List[str]):
    """Returns ((distance, cost), None) or (None, reason). Averages repeats."""
    dists, costs = [], []
    for _ in range(harness.repeat):
        t0 = time.perf_counter()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=harness.timeout)
        except subprocess.TimeoutExpired:
            return None, f"timeout after {harness.timeout:g}s"
        except OSError as exc:
            return None, f"launch failed: {exc}"
        elapsed = time.perf_counter() - t0
        if proc.returncode != 0:
            return None, f"exit status {proc.returncode}: {proc.stderr.strip()[-200:]}"
        d = harness.parse(proc.stdout, harness.distance_prefix)
        c = harness.parse(proc.stdout, harness.cost_prefix) if harness.cost_prefix else elapsed
        if d is None or c is None or not math.isfinite(d) or not math.isfinite(c) or d < 0 or c <= 0:
            return None, f"unparseable output: {proc.stdout.strip()[-200:]!r}"
        dists.append(d)
        costs.append(c)
    return (sum(dists) / len(dists), sum(costs) / len(costs)), None


def run_external(harness: BenchHarness, space: KnobSpace, inputs: Mapping[str, Sequence[float]],
                 settings: Optional[Sequence[KnobSetting]] = None, *,
                 schema: ProfileSchema = ProfileSchema(), profile_path=None,
                 workers: int = 1) -> RunReport:
    """Profile every (input, setting) pair not already in ``profile_path``.

    ``inputs`` maps input id to its feature vector (in ``schema`` feature
    order). Completed pairs found in an existing profile file are skipped;
    the file is rewritten in canonical order afterwards.
    """
    harness.check(space)
    if settings is None:
        settings = list(enumerate_settings(space))
    settings = [space.validate(k) for k in settings]
    done: Dict[Tuple[str, KnobSetting], RunRecord] = {}
    if profile_path is not None and os.path.exists(profile_path):
        for r in read_profile(profile_path, space, schema).records:
            done[(r.input_id, r.setting)] = r
    todo = [(i, k) for i in sorted(inputs) for k in settings if (i, k) not in done]

    def job(item):
        iid, k = item
        argv = harness.argv(space, iid, k, schema.feature_columns, inputs[iid])
        return item, _run_one(harness, argv)

    failures = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for (iid, k), (result, reason) in pool.map(job, todo):
            if result is None:
                log.warning("run failed for input %s setting %s: %s", iid, k, reason)
                failures.append(Failure(iid, k, reason))
                continue
            done[(iid, k)] = RunRecord(iid, tuple(inputs[iid]), k, result[0], result[1])
    ds = Dataset(space, schema.feature_columns, [done[key] for key in sorted(done)])
    if profile_path is not None:
        write_profile(ds, schema, profile_path)
    return RunReport(ds, failures, launched=len(todo))
