"""Trial and sweep configuration: dataclasses plus a flat key=value text
format. Every run writes its resolved config next to its results so any
trial can be replayed exactly.

Schema (one `key = value` per line, `#` comments, order irrelevant):

  trial files start with the header line  `# reloc2d-trial v1`
  sweep files with                        `# reloc2d-sweep v1`

  trial keys:  seed, scheme, change_ratio
  sweep keys:  master_seed, seeds, ratios, schemes, jobs
  world keys:  world_width, world_height, n_landmarks, mapped_x0, mapped_y0,
               mapped_x1, mapped_y1, start_x, start_y, start_theta, goal_x,
               goal_y, step_length, sensor_range, range_sigma,
               bearing_sigma_deg, odom_sigma_frac
  scoring keys: n_pairs, inlier_gate, verify_gate, q_min, h_new, t_retry,
               max_pair_candidates, pair_tol, min_pair_sep, k_groups,
               m_exponent, beta_prime, pair_retry, retire_enabled,
               retire_q, retire_r
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .geometry import Point2
from .relocalizer import SchemeConfig
from .world import InvalidParams, Rect, WorldParams, quick_params

TRIAL_MAGIC = "# reloc2d-trial v1"
SWEEP_MAGIC = "# reloc2d-sweep v1"

DEFAULT_RATIOS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
DEFAULT_SCHEMES = ("depth", "breadth", "hybrid")
DEFAULT_N_SEEDS = 5


@dataclass(frozen=True)
class TrialConfig:
    seed: int = 1
    scheme: str = "hybrid"
    change_ratio: float = 0.0
    world: WorldParams = field(default_factory=WorldParams)
    scoring: SchemeConfig = field(default_factory=SchemeConfig)

    def resolved_world(self) -> WorldParams:
        return replace(self.world, change_ratio=self.change_ratio)

    def resolved_scoring(self) -> SchemeConfig:
        return replace(self.scoring, scheme=self.scheme)

    def validate(self):
        self.resolved_world().validate()
        self.resolved_scoring().validate()
        return self


@dataclass(frozen=True)
class SweepConfig:
    master_seed: int = 1
    ratios: tuple = DEFAULT_RATIOS
    schemes: tuple = DEFAULT_SCHEMES
    seeds: tuple = tuple(range(1, DEFAULT_N_SEEDS + 1))
    world: WorldParams = field(default_factory=WorldParams)
    scoring: SchemeConfig = field(default_factory=SchemeConfig)

    def trials(self):
        out = []
        for ratio in self.ratios:
            for scheme in self.schemes:
                for seed in self.seeds:
                    out.append(TrialConfig(seed=int(seed), scheme=scheme,
                                           change_ratio=float(ratio),
                                           world=self.world,
                                           scoring=self.scoring))
        return out

    def validate(self):
        if not self.ratios or not self.schemes or not self.seeds:
            raise InvalidParams("sweep grid must be nonempty "
                                "(ratios, schemes, seeds)")
        for r in self.ratios:
            if not 0.0 <= r <= 1.0:
                raise InvalidParams(f"ratios entries must be in [0, 1]: {r}")
        for s in self.schemes:
            if s not in DEFAULT_SCHEMES:
                raise InvalidParams(f"schemes entries must be "
                                    f"depth|breadth|hybrid: {s!r}")
        self.world.validate()
        self.scoring.validate()
        return self


# --- flat key tables ----------------------------------------------------

_WORLD_KEYS = {
    "world_width": ("width", float),
    "world_height": ("height", float),
    "n_landmarks": ("n_landmarks", int),
    "start_theta": ("start_theta", float),
    "step_length": ("step_length", float),
    "sensor_range": ("sensor_range", float),
    "range_sigma": ("range_sigma", float),
    "bearing_sigma_deg": ("bearing_sigma_deg", float),
    "odom_sigma_frac": ("odom_sigma_frac", float),
}

_SCORING_KEYS = {f.name: f.name for f in fields(SchemeConfig)
                 if f.name != "scheme"}
_SCORING_TYPES = {f.name: f.type for f in fields(SchemeConfig)}


def _parse_bool(v, key):
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise InvalidParams(f"field {key}: expected true/false, got {v!r}")


def _parse_value(key, raw):
    try:
        if key in _WORLD_KEYS:
            return _WORLD_KEYS[key][1](raw)
        if key in _SCORING_KEYS:
            t = _SCORING_TYPES[key]
            if t in ("bool", bool):
                return _parse_bool(raw, key)
            if t in ("int", int):
                return int(raw)
            return float(raw)
        raise KeyError(key)
    except (ValueError, TypeError) as exc:
        raise InvalidParams(f"field {key}: cannot parse {raw!r}") from exc


def _read_kv(text, magic, path="<config>"):
    lines = text.splitlines()
    if not lines or lines[0].strip() != magic:
        raise InvalidParams(
            f"{path}: expected header {magic!r}, got "
            f"{lines[0].strip() if lines else '<empty>'!r}")
    kv = {}
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParams(f"{path}:{lineno}: expected 'key = value', "
                                f"got {line!r}")
        key, _, raw = line.partition("=")
        kv[key.strip()] = raw.strip()
    return kv


def _build_world(kv) -> WorldParams:
    base = WorldParams()
    args = {}
    for key, (attr, conv) in _WORLD_KEYS.items():
        if key in kv:
            args[attr] = _parse_value(key, kv.pop(key))
    rect = [kv.pop(k, None) for k in
            ("mapped_x0", "mapped_y0", "mapped_x1", "mapped_y1")]
    if any(v is not None for v in rect):
        if any(v is None for v in rect):
            raise InvalidParams("fields mapped_x0..mapped_y1 must be "
                                "given together")
        args["mapped"] = Rect(*(float(v) for v in rect))
    for name in ("start", "goal"):
        xy = [kv.pop(f"{name}_x", None), kv.pop(f"{name}_y", None)]
        if any(v is not None for v in xy):
            if any(v is None for v in xy):
                raise InvalidParams(f"fields {name}_x/{name}_y must be "
                                    f"given together")
            args[name] = Point2(float(xy[0]), float(xy[1]))
    return replace(base, **args)


def _build_scoring(kv) -> SchemeConfig:
    args = {}
    for key in list(kv):
        if key in _SCORING_KEYS:
            args[key] = _parse_value(key, kv.pop(key))
    return replace(SchemeConfig(), **args)


def _reject_leftover(kv, path):
    if kv:
        raise InvalidParams(f"{path}: unknown fields: {', '.join(sorted(kv))}")


def parse_trial_config(text, path="<config>") -> TrialConfig:
    kv = _read_kv(text, TRIAL_MAGIC, path)
    try:
        seed = int(kv.pop("seed"))
        scheme = kv.pop("scheme")
        ratio = float(kv.pop("change_ratio"))
    except KeyError as exc:
        raise InvalidParams(f"{path}: missing required field {exc}") from exc
    except ValueError as exc:
        raise InvalidParams(f"{path}: bad trial field: {exc}") from exc
    world = _build_world(kv)
    scoring = _build_scoring(kv)
    _reject_leftover(kv, path)
    return TrialConfig(seed=seed, scheme=scheme, change_ratio=ratio,
                       world=world, scoring=scoring).validate()


def parse_sweep_config(text, path="<config>") -> SweepConfig:
    kv = _read_kv(text, SWEEP_MAGIC, path)
    try:
        master = int(kv.pop("master_seed"))
        ratios = tuple(float(v) for v in kv.pop("ratios").split(","))
        schemes = tuple(v.strip() for v in kv.pop("schemes").split(","))
        seeds = tuple(int(v) for v in kv.pop("seeds").split(","))
    except KeyError as exc:
        raise InvalidParams(f"{path}: missing required field {exc}") from exc
    except ValueError as exc:
        raise InvalidParams(f"{path}: bad grid field: {exc}") from exc
    world = _build_world(kv)
    scoring = _build_scoring(kv)
    _reject_leftover(kv, path)
    return SweepConfig(master_seed=master, ratios=ratios, schemes=schemes,
                       seeds=seeds, world=world, scoring=scoring).validate()


def _world_lines(w: WorldParams):
    m = w.mapped
    return [
        f"world_width = {w.width!r}",
        f"world_height = {w.height!r}",
        f"n_landmarks = {w.n_landmarks}",
        f"mapped_x0 = {m.x0!r}",
        f"mapped_y0 = {m.y0!r}",
        f"mapped_x1 = {m.x1!r}",
        f"mapped_y1 = {m.y1!r}",
        f"start_x = {w.start.x!r}",
        f"start_y = {w.start.y!r}",
        f"start_theta = {w.start_theta!r}",
        f"goal_x = {w.goal.x!r}",
        f"goal_y = {w.goal.y!r}",
        f"step_length = {w.step_length!r}",
        f"sensor_range = {w.sensor_range!r}",
        f"range_sigma = {w.range_sigma!r}",
        f"bearing_sigma_deg = {w.bearing_sigma_deg!r}",
        f"odom_sigma_frac = {w.odom_sigma_frac!r}",
    ]


def _scoring_lines(c: SchemeConfig):
    out = []
    for f in fields(SchemeConfig):
        if f.name == "scheme":
            continue
        v = getattr(c, f.name)
        if isinstance(v, bool):
            out.append(f"{f.name} = {'true' if v else 'false'}")
        elif isinstance(v, float):
            out.append(f"{f.name} = {v!r}")
        else:
            out.append(f"{f.name} = {v}")
    return out


def format_trial_config(cfg: TrialConfig) -> str:
    lines = [TRIAL_MAGIC,
             f"seed = {cfg.seed}",
             f"scheme = {cfg.scheme}",
             f"change_ratio = {cfg.change_ratio!r}"]
    lines += _world_lines(cfg.world)
    lines += _scoring_lines(cfg.scoring)
    return "\n".join(lines) + "\n"


def format_sweep_config(cfg: SweepConfig) -> str:
    lines = [SWEEP_MAGIC,
             f"master_seed = {cfg.master_seed}",
             "ratios = " + ",".join(repr(r) for r in cfg.ratios),
             "schemes = " + ",".join(cfg.schemes),
             "seeds = " + ",".join(str(s) for s in cfg.seeds)]
    lines += _world_lines(cfg.world)
    lines += _scoring_lines(cfg.scoring)
    return "\n".join(lines) + "\n"


def quick_world() -> WorldParams:
    return quick_params()
