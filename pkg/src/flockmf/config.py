"""Run configuration parsed from a TOML key-value document."""
from dataclasses import asdict, dataclass, field, fields
import math

import tomli

from .coupling import xi_schedule
from .exceptions import ConfigError, InvalidParameterError
from .initial import KINDS, InitialLaw
from .particles import Params, Xi

EXPLICIT_XI = ("eps", "delta", "nu")
SCHEDULE_KEYS = ("alpha", "use_schedule")


@dataclass
class Config:
    d: int = 3
    n: int = 256
    m_multiplier: int = 8
    t_final: float = 0.5
    dt: float = 1e-3
    gamma: float = 1.0
    lam: float = 1.0
    beta: float = 1.0
    sigma: float = 1.0
    eps: float = None
    delta: float = None
    nu: float = None
    alpha: float = 0.05
    use_schedule: bool = True
    eps_max: float = 0.5
    delta_max: float = 0.5
    seed: int = 0
    reps: int = 10
    n_list: list = field(default_factory=lambda: [64, 128, 256, 512])
    picard_max_iters: int = 50
    picard_tol: float = 1e-12
    k: int = 4
    save_every: int = 1
    initial: InitialLaw = field(default_factory=InitialLaw)
    out_dir: str = "out"

    @property
    def m(self):
        return self.m_multiplier * self.n

    def schedule(self, n=None):
        if not self.use_schedule:
            return None
        return xi_schedule(n or self.n, self.alpha, self.d,
                           eps_max=self.eps_max, delta_max=self.delta_max)

    def xi(self, n=None):
        if self.use_schedule:
            return self.schedule(n).xi
        return Xi(self.eps, self.delta, self.nu)

    def params(self, n=None):
        return Params(gamma=self.gamma, lam=self.lam, beta=self.beta, sigma=self.sigma,
                      xi=self.xi(n), d=self.d)

    def as_dict(self):
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


# TOML key -> (attribute, accepted types)
_NUM = (int, float)
_KEYS = {
    "d": ("d", (int,)), "n": ("n", (int,)), "m_multiplier": ("m_multiplier", (int,)),
    "t_final": ("t_final", _NUM), "dt": ("dt", _NUM), "gamma": ("gamma", _NUM),
    "lambda": ("lam", _NUM), "beta": ("beta", _NUM), "sigma": ("sigma", _NUM),
    "eps": ("eps", _NUM), "delta": ("delta", _NUM), "nu": ("nu", _NUM),
    "alpha": ("alpha", _NUM), "use_schedule": ("use_schedule", (bool,)),
    "eps_max": ("eps_max", _NUM), "delta_max": ("delta_max", _NUM),
    "seed": ("seed", (int,)), "reps": ("reps", (int,)), "n_list": ("n_list", (list,)),
    "picard_max_iters": ("picard_max_iters", (int,)), "picard_tol": ("picard_tol", _NUM),
    "k": ("k", (int,)), "save_every": ("save_every", (int,)),
    "initial": ("initial", (str, dict)), "out_dir": ("out_dir", (str,)),
}


def _require(key, ok, constraint):
    if not ok:
        raise ConfigError(key, f"violates constraint {constraint}")


def _finite_pos(key, val):
    _require(key, math.isfinite(val) and val > 0, f"0 < {key} < inf")


def _parse_initial(raw):
    if isinstance(raw, str):
        raw = {"kind": raw}
    allowed = {f.name for f in fields(InitialLaw)}
    for k in raw:
        if k not in allowed:
            raise ConfigError(f"initial.{k}", f"unknown key; expected one of {sorted(allowed)}")
    if raw.get("kind", "gaussian") not in KINDS:
        raise ConfigError("initial.kind", f"must be one of {KINDS}")
    try:
        return InitialLaw(**raw)
    except (InvalidParameterError, TypeError) as exc:
        raise ConfigError("initial", str(exc)) from None


def parse_config(text):
    """Parse and validate a TOML document; omitted keys take their defaults."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"not valid TOML: {exc}") from None
    cfg = Config()
    for key, val in raw.items():
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        attr, types = _KEYS[key]
        if isinstance(val, bool) and bool not in types:
            raise ConfigError(key, f"expected {' or '.join(t.__name__ for t in types)}, got bool")
        if not isinstance(val, types):
            raise ConfigError(
                key, f"expected {' or '.join(t.__name__ for t in types)}, got {type(val).__name__}")
        if key == "initial":
            val = _parse_initial(val)
        elif types == _NUM:
            val = float(val)
        setattr(cfg, attr, val)

    explicit = [k for k in EXPLICIT_XI if k in raw]
    scheduled = [k for k in SCHEDULE_KEYS if k in raw]
    if explicit and scheduled and raw.get("use_schedule", True):
        raise ConfigError(
            ",".join(explicit + scheduled),
            "explicit (eps, delta, nu) and schedule mode (alpha/use_schedule) are mutually exclusive")
    if explicit:
        if len(explicit) != 3:
            missing = [k for k in EXPLICIT_XI if k not in raw]
            raise ConfigError(",".join(missing), "explicit mode needs all of eps, delta, nu")
        cfg.use_schedule = False
    elif not cfg.use_schedule:
        raise ConfigError("use_schedule", "false requires explicit eps, delta, nu")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    _require("d", cfg.d >= 3, "d >= 3")
    _require("n", cfg.n >= 1, "n >= 1")
    _require("m_multiplier", cfg.m_multiplier >= 1, "m_multiplier >= 1")
    _finite_pos("t_final", cfg.t_final)
    _finite_pos("dt", cfg.dt)
    n_steps = round(cfg.t_final / cfg.dt)
    _require("dt", n_steps >= 1 and abs(n_steps * cfg.dt - cfg.t_final) <= 1e-9 * cfg.t_final,
             "dt divides t_final")
    for key in ("gamma", "lam", "beta", "sigma"):
        name = "lambda" if key == "lam" else key
        val = getattr(cfg, key)
        _require(name, math.isfinite(val) and val >= 0, f"0 <= {name} < inf")
    if cfg.use_schedule:
        _require("alpha", 0 < cfg.alpha <= 1, "0 < alpha <= 1")
        _require("n", cfg.n >= 2, "n >= 2 in schedule mode")
        if cfg.eps_max is not None:
            _finite_pos("eps_max", cfg.eps_max)
        if cfg.delta_max is not None:
            _finite_pos("delta_max", cfg.delta_max)
    else:
        for key in EXPLICIT_XI:
            _finite_pos(key, getattr(cfg, key))
    _require("reps", cfg.reps >= 1, "reps >= 1")
    _require("n_list", all(isinstance(v, int) and not isinstance(v, bool) and v >= 2
                           for v in cfg.n_list), "integers >= 2")
    _require("picard_max_iters", cfg.picard_max_iters >= 1, "picard_max_iters >= 1")
    _finite_pos("picard_tol", cfg.picard_tol)
    _require("k", cfg.k >= 1, "k >= 1")
    _require("save_every", cfg.save_every >= 1 and n_steps % cfg.save_every == 0,
             "save_every >= 1 and divides the step count")
    return cfg


def load_config(path):
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text)
