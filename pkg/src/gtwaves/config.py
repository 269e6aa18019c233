"""Experiment configuration: YAML loading, strict schema validation, and
construction of models, frames, and expression-based callables."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import yaml

from .errors import ConfigError
from .models import BarotropicModel, ForceSpec, GtwClosedForm, PressureLaw
from .systems import HyperbolicSystem
from .travelling import TravellingFrame

DEFAULT_TOLERANCES = {
    "ode_rtol": 1e-10,
    "ode_atol": 1e-12,
    "compat_tol": 1e-5,
    "init_tol": 1e-6,
    "sonic_tol": None,
    "hyperbolicity_tol": 1e-8,
    "structural_tol": 1e-7,
    "bracket_tol": 1e-7,
    "decouple_tol": 1e-8,
}

_NUM = (int, float)

SCHEMA = {
    "model": {
        "kind": (str,),
        "pressure": {"kind": (str,), "kappa": _NUM, "gamma": _NUM,
                     "a": _NUM},
        "force": {"kind": (str,), "k1": _NUM, "s": _NUM, "beta": (str,),
                  "expr": (str,)},
        "rho_min": _NUM,
        "names": (list,),
        "A": (list,),
        "B": (list,),
    },
    "frame": {
        "s": _NUM, "family": (str,), "k1": _NUM, "a0": _NUM, "rho0": _NUM,
        "beta": (str,), "expr": (list,), "anchor": (list,), "x0": _NUM,
    },
    "window": {"x_min": _NUM, "x_max": _NUM, "t_max": _NUM,
               "nx": (int,), "nt": (int,)},
    "tolerances": {k: _NUM + (type(None),) for k in DEFAULT_TOLERANCES},
    "output": {"dir": (str,)},
    "states": (list,),
    "fv": {"cells": (int,), "cfl": _NUM, "scheme": (str,),
           "source_mode": (str,), "boundary": (str,), "t_end": _NUM,
           "ladder": (list,), "initial": (list,)},
    "simple_wave": {"family": (int,), "v_index": (int,), "k": (list,),
                    "from_state": (list,), "v0": (str,),
                    "xi_span": (list,), "n_xi": (int,)},
    "case_i": {"family": (int,), "v_index": (int,), "F": (list,),
               "R0": (list,), "v0": (str,)},
    "case_ii": {"family": (int,), "v_index": (int,), "F": (list,),
                "G": (list,), "R0": (list,), "v0": (str,)},
}


def _validate(cfg, schema, path=""):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    for key, val in cfg.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {where!r}")
        rule = schema[key]
        if isinstance(rule, dict):
            _validate(val, rule, where)
        elif not isinstance(val, rule):
            names = "/".join(t.__name__ for t in rule)
            raise ConfigError(
                f"{where}: expected {names}, got {type(val).__name__}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    _validate(cfg, SCHEMA)
    return cfg


def compile_expression(expr: str, symbols) -> Callable:
    """Compile a scalar expression over the named symbols with sympy."""
    import sympy as sp
    try:
        syms = sp.symbols(symbols)
        if isinstance(syms, sp.Symbol):
            syms = (syms,)
        parsed = sp.sympify(expr, locals={s.name: s for s in syms})
        extra = parsed.free_symbols - set(syms)
        if extra:
            raise ConfigError(
                f"expression {expr!r} uses unknown symbols "
                f"{sorted(s.name for s in extra)}")
        fn = sp.lambdify(syms, parsed, modules="numpy")
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc}") from exc
    return fn


@dataclass
class ModelBundle:
    """Everything a command needs about the configured model."""
    system: HyperbolicSystem
    barotropic: Optional[BarotropicModel]
    config: dict


def build_pressure(cfg: dict) -> PressureLaw:
    kind = cfg.get("kind", "polytropic")
    if kind == "polytropic":
        return PressureLaw.polytropic(kappa=cfg.get("kappa", 1.0),
                                      gamma=cfg.get("gamma", 2.0))
    if kind == "isothermal":
        return PressureLaw.isothermal(a=cfg.get("a", 1.0))
    raise ConfigError(f"unknown pressure kind {kind!r}")


def build_model(cfg: dict) -> ModelBundle:
    mcfg = cfg.get("model", {})
    kind = mcfg.get("kind", "barotropic")
    if kind == "barotropic":
        law = build_pressure(mcfg.get("pressure", {}))
        fcfg = mcfg.get("force", {"kind": "none"})
        fkind = fcfg.get("kind", "none")
        if fkind == "none":
            force = ForceSpec.none()
        elif fkind == "gtw_family":
            force = ForceSpec.gtw_family(k1=fcfg.get("k1", 0.0),
                                         s=fcfg.get("s", 0.0),
                                         beta=fcfg.get("beta",
                                                       "rho_over_c"))
        elif fkind == "expr":
            fn = compile_expression(fcfg["expr"], ("rho", "u"))
            force = ForceSpec.custom(lambda rho, u: fn(rho, u))
        else:
            raise ConfigError(f"unknown force kind {fkind!r}")
        model = BarotropicModel(pressure=law, force=force,
                                rho_min=mcfg.get("rho_min", 1e-10))
        return ModelBundle(system=model.system(), barotropic=model,
                           config=mcfg)
    if kind == "custom":
        names = tuple(mcfg.get("names") or ())
        if not names:
            raise ConfigError("custom model needs component names")
        n = len(names)
        A_rows = mcfg.get("A")
        B_rows = mcfg.get("B")
        if A_rows is None or B_rows is None:
            raise ConfigError("custom model needs A and B expression tables")
        if len(A_rows) != n or any(len(r) != n for r in A_rows) \
                or len(B_rows) != n:
            raise ConfigError("A must be n x n and B length n")
        A_fns = [[compile_expression(str(e), names) for e in row]
                 for row in A_rows]
        B_fns = [compile_expression(str(e), names) for e in B_rows]

        def A(U):
            return np.array([[f(*U) for f in row] for row in A_fns],
                            dtype=float)

        def B(U):
            return np.array([f(*U) for f in B_fns], dtype=float)

        sysm = HyperbolicSystem(n=n, A=A, B=B, names=names)
        return ModelBundle(system=sysm, barotropic=None, config=mcfg)
    raise ConfigError(f"unknown model kind {kind!r}")


@dataclass
class FrameBundle:
    frame: TravellingFrame
    anchor: np.ndarray
    x0: float
    closed_form: Optional[GtwClosedForm]
    config: dict


def build_frame(cfg: dict, bundle: ModelBundle) -> FrameBundle:
    fcfg = cfg.get("frame")
    if fcfg is None:
        raise ConfigError("this command needs a 'frame' block")
    s = fcfg.get("s", 0.0)
    family = fcfg.get("family", "zero")
    n = bundle.system.n
    closed = None
    if family == "zero":
        frame = TravellingFrame.homogeneous(s, n=n)
    elif family == "barotropic":
        if bundle.barotropic is None:
            raise ConfigError("frame family 'barotropic' needs a "
                              "barotropic model")
        frame = TravellingFrame.barotropic_family(s=s, k1=fcfg.get("k1", 0.0))
    elif family == "expr":
        exprs = fcfg.get("expr")
        if not exprs or len(exprs) != n:
            raise ConfigError(f"frame expr needs {n} component expressions")
        fns = [compile_expression(str(e), bundle.system.names)
               for e in exprs]

        def F(U):
            return np.array([f(*U) for f in fns], dtype=float)
        frame = TravellingFrame(s=s, F=F, label="expr")
    else:
        raise ConfigError(f"unknown frame family {family!r}")

    if bundle.barotropic is not None and family == "barotropic":
        closed = GtwClosedForm(bundle.barotropic.pressure,
                               k1=fcfg.get("k1", 0.0), s=s,
                               a0=fcfg.get("a0", 0.0),
                               rho0=fcfg.get("rho0", 1.0),
                               beta=fcfg.get("beta", "rho_over_c"),
                               rho_min=bundle.barotropic.rho_min)

    if "anchor" in fcfg:
        anchor = np.asarray(fcfg["anchor"], dtype=float)
        if anchor.size != n:
            raise ConfigError(f"anchor must have {n} components")
    elif closed is not None:
        anchor = closed(fcfg.get("x0", 0.0), 0.0)
    else:
        raise ConfigError("frame needs an explicit anchor for this family")
    return FrameBundle(frame=frame, anchor=anchor,
                       x0=fcfg.get("x0", 0.0), closed_form=closed,
                       config=fcfg)


def effective_tolerances(cfg: dict, overrides: dict) -> dict:
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(cfg.get("tolerances", {}) or {})
    for key, val in overrides.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r} in override")
        tols[key] = val
    return tols


def get_window(cfg: dict):
    wcfg = cfg.get("window")
    if wcfg is None:
        raise ConfigError("this command needs a 'window' block")
    try:
        window = (float(wcfg["x_min"]), float(wcfg["x_max"]),
                  float(wcfg["t_max"]))
    except KeyError as exc:
        raise ConfigError(f"window block is missing {exc}") from exc
    if not window[0] < window[1]:
        raise ConfigError("window needs x_min < x_max")
    if window[2] <= 0:
        raise ConfigError("window needs t_max > 0")
    return window, int(wcfg.get("nx", 201)), int(wcfg.get("nt", 51))
