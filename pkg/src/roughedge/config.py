"""Run configuration: YAML loading, defaults, validation and a canonical echo.

Documented key set (all blocks optional; defaults shown)::

    seed: 0                      # drives random spot checks (verify)
    phantom:
      center: [-0.35, 0.15]
      radius: 1.0
      arc_halfwidth: 0.7         # must lie in (0, pi/4)
      jump: 1.0
    profile:                     # kind: zero | sinusoid | sawtooth | weierstrass | lattice
      kind: sinusoid             # other keys: amplitude, frequency, phase, a, b, terms,
      amplitude: 1.0             #   lattice_step, jump_bound, seed, values
      frequency: 1.0
    kernel:
      beta: 4.0
      aperture_degree: null      # default ceil(beta) + 2
      interp_degree: null        # default ceil(beta)
      q_tab: 64.0
      psi_step: 0.00390625
      dtb_step: 0.00390625
    grid:
      kappa: auto                # positive number or "auto" (golden ratio / |x0|)
      p_bar: null                # null selects the built-in offsets
      alpha_bar: null
      mode: perturbation         # perturbation | full
      eps: [0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125, 0.0009765625]
    point:
      case: A                    # A | B | C
      x0: null                   # explicit [x, y] skips case selection
      M: 512
      eta_max: 2.0
    patch:
      box: 4.0
      step: 0.25
    diagnostics:
      enabled: true
      M: null                    # null: ceil(eps^-gamma) clipped to [8, 64]
      model_eps: [0.0625, ..., 0.0009765625]
      model_alpha: [0.0, 0.01, -0.01, 0.03, 0.1, 0.3, 1.0]
    figures: true
"""

import copy
import math

import yaml

from .errors import ConfigError

DEFAULTS = {
    "seed": 0,
    "phantom": {"center": [-0.35, 0.15], "radius": 1.0, "arc_halfwidth": 0.7, "jump": 1.0},
    "profile": {"kind": "sinusoid", "amplitude": 1.0, "frequency": 1.0},
    "kernel": {"beta": 4.0, "aperture_degree": None, "interp_degree": None, "q_tab": 64.0,
               "psi_step": 1 / 256, "dtb_step": 1 / 256},
    "grid": {"kappa": "auto", "p_bar": None, "alpha_bar": None, "mode": "perturbation",
             "eps": [2.0**-5 * 2.0**-i for i in range(6)]},
    "point": {"case": "A", "x0": None, "M": 512, "eta_max": 2.0},
    "patch": {"box": 4.0, "step": 0.25},
    "diagnostics": {"enabled": True, "M": None,
                    "model_eps": [2.0**-i for i in range(4, 11)],
                    "model_alpha": [0.0, 0.01, -0.01, 0.03, 0.1, 0.3, 1.0]},
    "figures": True,
}

PROFILE_KEYS = {
    "zero": set(),
    "sinusoid": {"amplitude", "frequency", "phase"},
    "sawtooth": {"amplitude", "frequency"},
    "weierstrass": {"amplitude", "a", "b", "terms"},
    "lattice": {"lattice_step", "amplitude", "jump_bound", "seed", "values"},
}


def _line_map(text):
    """``{key path tuple: 1-based line}`` for every mapping key in the YAML text."""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for knode, vnode in node.value:
                p = path + (str(knode.value),)
                lines[p] = knode.start_mark.line + 1
                walk(vnode, p)

    root = yaml.compose(text)
    if root is not None:
        walk(root, ())
    return lines


class RunConfig:
    """Validated configuration; ``data`` holds the merged block dictionaries."""

    def __init__(self, data, source=None, lines=None):
        self.data = data
        self.source = source
        self._lines = lines or {}

    def __getitem__(self, key):
        return self.data[key]

    def where(self, *path):
        line = self._lines.get(tuple(path))
        key = ".".join(path)
        return f"{key} (line {line})" if line else key

    def echo(self):
        """Canonical YAML dump of the effective configuration (round-trips through :func:`load_config`)."""
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None)


def _merge(base, over, path=()):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError("unknown key", ".".join(path + (str(k),)))
        if isinstance(base[k], dict) and k != "profile":
            if not isinstance(v, dict):
                raise ConfigError("expected a mapping", ".".join(path + (str(k),)))
            out[k] = _merge(base[k], v, path + (k,))
        else:
            out[k] = v
    return out


def load_config(path=None, text=None, overrides=None):
    """Load, merge with defaults and validate.  Either ``path`` or ``text`` (or neither for defaults)."""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = {}
    lines = {}
    if text:
        try:
            raw = yaml.safe_load(text) or {}
            lines = _line_map(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("top level must be a mapping")
    try:
        data = _merge(DEFAULTS, raw)
    except ConfigError as exc:
        key = exc.key
        line = lines.get(tuple(key.split("."))) if key else None
        raise ConfigError(exc.message, f"{key} (line {line})" if line else key) from None
    if "profile" in raw:
        data["profile"] = dict(raw["profile"])
    for k, v in (overrides or {}).items():
        block, _, key = k.partition(".")
        if key:
            data[block][key] = v
        else:
            data[block] = v
    cfg = RunConfig(data, path, lines)
    validate(cfg)
    return cfg


def _num(cfg, block, key, positive=False, allow_none=False):
    v = cfg[block][key]
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError("expected a finite number", cfg.where(block, key))
    if positive and not v > 0:
        raise ConfigError("must be positive", cfg.where(block, key))


def validate(cfg):
    """Raise :class:`ConfigError` naming the key (and line) of the first problem found."""
    d = cfg.data
    if not isinstance(d["seed"], int) or isinstance(d["seed"], bool) or d["seed"] < 0:
        raise ConfigError("must be a non-negative integer", cfg.where("seed"))
    ph = d["phantom"]
    c = ph["center"]
    if not (isinstance(c, (list, tuple)) and len(c) == 2 and all(isinstance(v, (int, float)) for v in c)):
        raise ConfigError("expected [x, y]", cfg.where("phantom", "center"))
    _num(cfg, "phantom", "radius", positive=True)
    _num(cfg, "phantom", "arc_halfwidth", positive=True)
    if not ph["arc_halfwidth"] < math.pi / 4:
        raise ConfigError("must lie in (0, pi/4)", cfg.where("phantom", "arc_halfwidth"))
    _num(cfg, "phantom", "jump")
    if ph["jump"] == 0:
        raise ConfigError("must be nonzero", cfg.where("phantom", "jump"))

    prof = d["profile"]
    if not isinstance(prof, dict) or "kind" not in prof:
        raise ConfigError("profile block needs a kind", cfg.where("profile"))
    kind = str(prof["kind"]).lower()
    if kind not in PROFILE_KEYS:
        raise ConfigError(f"unknown kind {prof['kind']!r}", cfg.where("profile", "kind"))
    extra = set(prof) - PROFILE_KEYS[kind] - {"kind"}
    if extra:
        k = sorted(extra)[0]
        raise ConfigError(f"not a {kind} parameter", cfg.where("profile", k))
    try:
        from .perturbation import PerturbationProfile

        PerturbationProfile.from_config(prof)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), cfg.where("profile")) from None

    k = d["kernel"]
    _num(cfg, "kernel", "beta", positive=True)
    if not k["beta"] > 2:
        raise ConfigError("beta must exceed 2 (the aliasing bounds need beta > 2)", cfg.where("kernel", "beta"))
    for key in ("aperture_degree", "interp_degree"):
        v = k[key]
        if v is not None and (not isinstance(v, int) or isinstance(v, bool)):
            raise ConfigError("expected an integer or null", cfg.where("kernel", key))
    for key in ("q_tab", "psi_step", "dtb_step"):
        _num(cfg, "kernel", key, positive=True)
    try:
        from .kernels import check_degrees

        check_degrees(k["beta"], k["aperture_degree"], k["interp_degree"])
    except ConfigError as exc:
        raise ConfigError(exc.message, cfg.where(*exc.key.split("."))) from None

    g = d["grid"]
    kap = g["kappa"]
    if kap != "auto":
        _num(cfg, "grid", "kappa", positive=True)
    _num(cfg, "grid", "p_bar", allow_none=True)
    _num(cfg, "grid", "alpha_bar", allow_none=True)
    if g["mode"] not in ("perturbation", "full"):
        raise ConfigError("must be 'perturbation' or 'full'", cfg.where("grid", "mode"))
    eps = g["eps"]
    if not isinstance(eps, (list, tuple)) or not eps:
        raise ConfigError("expected a non-empty list", cfg.where("grid", "eps"))
    if any(isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 < e < 1 for e in eps):
        raise ConfigError("entries must lie in (0, 1)", cfg.where("grid", "eps"))
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("must be strictly decreasing", cfg.where("grid", "eps"))

    p = d["point"]
    from .phantom import CaseLabel

    try:
        CaseLabel.parse(p["case"])
    except ValueError:
        raise ConfigError(f"unknown case {p['case']!r}", cfg.where("point", "case")) from None
    if p["x0"] is not None:
        x0 = p["x0"]
        if not (isinstance(x0, (list, tuple)) and len(x0) == 2):
            raise ConfigError("expected [x, y] or null", cfg.where("point", "x0"))
    if not isinstance(p["M"], int) or p["M"] < 64:
        raise ConfigError("must be an integer >= 64", cfg.where("point", "M"))
    _num(cfg, "point", "eta_max", positive=True)

    _num(cfg, "patch", "box", positive=True)
    _num(cfg, "patch", "step", positive=True)
    if d["patch"]["step"] > d["patch"]["box"]:
        raise ConfigError("step larger than the box half-width", cfg.where("patch", "step"))

    dg = d["diagnostics"]
    if not isinstance(dg["enabled"], bool):
        raise ConfigError("expected true or false", cfg.where("diagnostics", "enabled"))
    if dg["M"] is not None and (not isinstance(dg["M"], int) or not 8 <= dg["M"] <= 64):
        raise ConfigError("must be an integer in [8, 64] or null", cfg.where("diagnostics", "M"))
    for key in ("model_eps", "model_alpha"):
        v = dg[key]
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError("expected a non-empty list", cfg.where("diagnostics", key))
    if any(not 0 < e < 1 for e in dg["model_eps"]):
        raise ConfigError("entries must lie in (0, 1)", cfg.where("diagnostics", "model_eps"))
    if not isinstance(d["figures"], bool):
        raise ConfigError("expected true or false", cfg.where("figures"))
    return cfg
