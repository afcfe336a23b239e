"""Experiment configuration: ingestion, validation, and resolution.

Configs are JSON documents (see ``schemas/config.schema.json``). The
``system`` entry is either a builtin name ("example1", "example2") or an
inline linear system; certificates come builtin, from the Riccati
construction, inline, or from a certificate file. Validation happens in
code with explicit messages; the shipped schema documents the format and
is exercised by the test suite.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import builtin, numkernel
from .certificates import Certificate, admissible_input_map, eta_bound
from .errors import ConfigError
from .geometry import Box
from .hierarchy import AffineInterface
from .lattice import Quantizer
from .planner import Workspace
from .systems import InputMap, IqcSystem

BUILTIN_SYSTEMS = ("example1", "example2")
OUT_DIR_ENV = "SYMABS_OUT"


@dataclass
class DisturbanceConfig:
    hold: float = 0.1
    count: int = 100
    base_seed: int = 0

    def validate(self) -> None:
        if self.hold <= 0:
            raise ConfigError("disturbance.hold must be positive")
        if self.count < 0:
            raise ConfigError("disturbance.count must be nonnegative")


@dataclass
class ExperimentConfig:
    """Parsed experiment description, prior to resolution."""

    system: Union[str, dict]
    certificate: Union[str, dict] = "builtin"
    epsilon: Optional[float] = None
    eta: Union[float, str, None] = None
    t_final: Optional[float] = None
    dt: Optional[float] = None
    x0: Optional[list] = None
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    u_prime_box: Union[list, str, None] = "default"
    workspace: Union[str, dict, None] = "default"
    out_dir: Optional[str] = None
    seed: Optional[int] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        known = {
            "system", "certificate", "epsilon", "eta", "t_final", "dt", "x0",
            "disturbance", "u_prime_box", "workspace", "out_dir", "seed",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "system" not in raw:
            raise ConfigError("config requires a 'system' entry")
        dist = raw.get("disturbance", {})
        if not isinstance(dist, dict):
            raise ConfigError("'disturbance' must be an object")
        cfg = cls(
            system=raw["system"],
            certificate=raw.get("certificate", "builtin"),
            epsilon=raw.get("epsilon"),
            eta=raw.get("eta"),
            t_final=raw.get("t_final"),
            dt=raw.get("dt"),
            x0=raw.get("x0"),
            disturbance=DisturbanceConfig(
                hold=float(dist.get("hold", 0.1)),
                count=int(dist.get("count", 100)),
                base_seed=int(dist.get("base_seed", 0)),
            ),
            u_prime_box=raw.get("u_prime_box", "default"),
            workspace=raw.get("workspace", "default"),
            out_dir=raw.get("out_dir"),
            seed=raw.get("seed"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_name_or_file(cls, spec: str) -> "ExperimentConfig":
        """A builtin name resolves directly; anything else is a file path."""
        if spec in BUILTIN_SYSTEMS:
            return cls.from_dict({"system": spec})
        return cls.from_file(spec)

    def validate(self) -> None:
        if isinstance(self.system, str):
            if self.system not in BUILTIN_SYSTEMS:
                raise ConfigError(
                    f"unknown builtin system {self.system!r}; expected one of {BUILTIN_SYSTEMS}"
                )
        elif isinstance(self.system, dict):
            for key in ("a", "b", "c"):
                if key not in self.system:
                    raise ConfigError(f"inline system requires matrix {key!r}")
        else:
            raise ConfigError("'system' must be a builtin name or an inline object")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if isinstance(self.eta, str) and self.eta != "from-theorem3":
            raise ConfigError("eta must be a positive number or 'from-theorem3'")
        if isinstance(self.eta, (int, float)) and self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")
        self.disturbance.validate()

    def resolve_out_dir(self, override: Optional[str] = None) -> Path:
        chosen = override or self.out_dir or os.environ.get(OUT_DIR_ENV) or "."
        path = Path(chosen)
        path.mkdir(parents=True, exist_ok=True)
        return path


def _parse_box(value, name: str) -> Optional[Box]:
    if value is None:
        return None
    try:
        lo, hi = value
        return Box.make(lo, hi)
    except Exception as exc:
        raise ConfigError(f"{name} must be [[lo...], [hi...]] or null") from exc


def _build_inline(cfg: ExperimentConfig) -> builtin.ExampleSetup:
    raw = cfg.system
    a = np.array(raw["a"], dtype=float)
    b = np.array(raw["b"], dtype=float)
    c = np.array(raw["c"], dtype=float)
    n = a.shape[0]
    u_set = _parse_box(raw.get("u_box"), "system.u_box")
    w_box = raw.get("w_box")
    w_set = _parse_box(w_box, "system.w_box") if w_box is not None else Box.point([0.0] * n)
    iqc = IqcSystem(
        a=a, b=b, c=c,
        e=np.zeros((n, 0)),
        c_q=np.zeros((0, n)),
        d_q=np.zeros((0, 0)),
        p=lambda t, q: np.zeros_like(q),
        multiplier=np.zeros((0, 0)),
    )

    cert = _resolve_certificate(cfg, iqc)
    epsilon = cfg.epsilon if cfg.epsilon is not None else 1.0
    w_sup = w_set.corner_sup_norm()
    eta = _resolve_eta(cfg, cert, c, epsilon, w_sup)
    quantizer = Quantizer(n=n, eta=eta)
    input_map = _resolve_input_map(cfg, cert, u_set, eta, w_sup)

    setup = builtin.ExampleSetup(
        name="inline",
        iqc=iqc,
        certificate=cert,
        quantizer=quantizer,
        concrete=iqc.as_concrete(u_set=u_set, w_set=w_set),
        abstract=iqc.as_abstract(quantizer, input_map),
        interface=AffineInterface(gain=cert.gain),
        x0=np.array(cfg.x0, dtype=float) if cfg.x0 is not None else np.zeros(n),
        epsilon=epsilon,
        eta=eta,
        t_final=cfg.t_final if cfg.t_final is not None else 10.0,
        dt=cfg.dt if cfg.dt is not None else 1e-3,
        v=None,
        disturbance_hold=cfg.disturbance.hold,
        n_trials=cfg.disturbance.count,
        base_seed=cfg.disturbance.base_seed,
        workspace=_resolve_workspace(cfg, default=None),
    )
    return setup


def _resolve_certificate(cfg: ExperimentConfig, iqc: IqcSystem) -> Certificate:
    spec = cfg.certificate
    if spec == "builtin":
        raise ConfigError("inline systems need an explicit or 'riccati' certificate")
    if spec == "riccati":
        p = numkernel.solve_riccati(iqc.a, iqc.b, np.eye(iqc.n))
        gain = -0.5 * iqc.b.T @ p
        alpha = 1.0 / (2.0 * numkernel.sym_eigen(p).max)
        return Certificate(
            p_matrix=p, gain=gain, alpha=alpha,
            multiplier=np.zeros((0, 0)), input_matrix=iqc.b,
        )
    if isinstance(spec, str):
        path = Path(spec)
        if not path.exists():
            raise ConfigError(f"certificate file not found: {path}")
        return Certificate.load(path)
    if isinstance(spec, dict):
        try:
            return Certificate.from_dict(
                {
                    "p": spec["p"],
                    "gain": spec["gain"],
                    "alpha": spec["alpha"],
                    "multiplier": spec.get("multiplier", np.zeros((0, 0)).tolist()),
                    "input_matrix": spec.get("input_matrix", iqc.b.tolist()),
                }
            )
        except KeyError as exc:
            raise ConfigError(f"inline certificate missing {exc}") from exc
    raise ConfigError("certificate must be 'builtin', 'riccati', a path, or inline")


def _resolve_eta(cfg, cert, c, epsilon, w_sup) -> float:
    if cfg.eta == "from-theorem3":
        return eta_bound(cert, c, epsilon, w_sup)
    if cfg.eta is not None:
        return float(cfg.eta)
    raise ConfigError("eta is required (a number or 'from-theorem3')")


def _resolve_input_map(cfg, cert, u_set, eta, w_sup) -> InputMap:
    if cfg.u_prime_box == "computed":
        spec = admissible_input_map(u_set, None, cert, eta, w_sup)
        return InputMap(box=spec.shrunk)
    if cfg.u_prime_box in ("default", None):
        return InputMap(box=None) if u_set is None else InputMap(box=u_set)
    return InputMap(box=_parse_box(cfg.u_prime_box, "u_prime_box"))


def _resolve_workspace(cfg, default) -> Optional[Workspace]:
    spec = cfg.workspace
    if spec == "default" or spec is None:
        return default
    if isinstance(spec, str):
        path = Path(spec)
        if not path.exists():
            raise ConfigError(f"workspace file not found: {path}")
        try:
            with open(path) as fh:
                return Workspace.from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ConfigError(f"bad workspace file: {exc}") from exc
    if isinstance(spec, dict):
        try:
            return Workspace.from_dict(spec)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad workspace geometry: {exc}") from exc
    raise ConfigError("workspace must be 'default', a path, or inline geometry")


def resolve(cfg: ExperimentConfig) -> builtin.ExampleSetup:
    """Build the runnable setup a config describes.

    Builtin systems start from their shipped constants and apply only the
    overrides present in the config; overriding eta rebuilds the quantizer
    and the abstract system around it.
    """
    if isinstance(cfg.system, dict):
        return _build_inline(cfg)

    setup = builtin.get_example(
        cfg.system, n_trials=cfg.disturbance.count, base_seed=cfg.disturbance.base_seed
    )
    if cfg.certificate != "builtin":
        setup.certificate = _resolve_certificate(cfg, setup.iqc)
        setup.interface = AffineInterface(gain=setup.certificate.gain)
    if cfg.epsilon is not None:
        setup.epsilon = cfg.epsilon
    w_sup = setup.w_sup
    if cfg.eta is not None:
        eta = _resolve_eta(cfg, setup.certificate, setup.iqc.c, setup.epsilon, w_sup)
        setup.eta = eta
        setup.quantizer = Quantizer(n=setup.iqc.n, eta=eta)
        setup.abstract = setup.iqc.as_abstract(setup.quantizer, setup.abstract.input_map)
    if cfg.u_prime_box not in ("default",):
        setup.abstract = setup.iqc.as_abstract(
            setup.quantizer,
            _resolve_input_map(cfg, setup.certificate, setup.concrete.u_set, setup.eta, w_sup),
        )
    if cfg.t_final is not None:
        setup.t_final = cfg.t_final
    if cfg.dt is not None:
        setup.dt = cfg.dt
    if cfg.x0 is not None:
        setup.x0 = np.array(cfg.x0, dtype=float)
    setup.disturbance_hold = cfg.disturbance.hold
    setup.n_trials = cfg.disturbance.count
    setup.base_seed = cfg.disturbance.base_seed
    ws = _resolve_workspace(cfg, default=setup.workspace)
    setup.workspace = ws
    return setup
