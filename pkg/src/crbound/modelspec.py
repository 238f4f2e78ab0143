"""Loading model-spec JSON documents into families, parameter functions and estimators."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema

from .errors import CRBoundError, FamilyError
from .estimation import Estimator
from .expectation import ExpectationMethod
from .geometry import ParameterFunction
from .model_space import (SampleSpace, make_bernoulli, make_categorical, make_gaussian,
                          make_poisson, make_product, make_tabulated)
from .score import FDScheme

SCHEMA_VERSION = "1"


class SpecError(CRBoundError, ValueError):
    """The model spec is malformed or inconsistent."""


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    """One of the shipped schemas: ``model_spec`` or ``report``."""
    text = resources.files("crbound").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def validate(document: Any, schema_name: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(x) for x in err.absolute_path) or "<root>"
        raise SpecError(f"{schema_name} validation failed at {where}: {err.message}")


@dataclass(frozen=True, eq=False)
class LoadedSpec:
    family: Any
    theta: ParameterFunction
    estimator: Optional[Estimator]
    method: ExpectationMethod
    fd: FDScheme
    document: dict


def _coordinate_domains(node: dict) -> dict[str, Optional[tuple[float, float]]]:
    out = {}
    for c in node.get("coordinates", []):
        if c["name"] in out:
            raise SpecError(f"coordinate {c['name']!r} listed twice")
        out[c["name"]] = tuple(c["domain"]) if "domain" in c else None
    return out


def _check_names(coords: dict, allowed: tuple[str, ...], family: str):
    unknown = set(coords) - set(allowed)
    if unknown:
        raise SpecError(f"{family} family has coordinates {allowed}; unknown {sorted(unknown)}")


def _load_table(ref, base: Path) -> dict:
    if isinstance(ref, dict):
        return ref
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    try:
        table = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise SpecError(f"cannot read table file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"table file {path} is not valid JSON: {exc}") from None
    validate({"family": "tabulated", "table": table}, "model_spec")
    return table


def _build_family(node: dict, base: Path):
    kind = node["family"]
    params = node.get("params", {})
    grid = node.get("grid", {})
    coords = _coordinate_domains(node)
    if kind != "gaussian" and {"mu", "sigma"} & set(params):
        raise SpecError(f"params mu/sigma only apply to the gaussian family")
    if kind != "categorical" and "m" in params:
        raise SpecError("param m only applies to the categorical family")
    if kind == "gaussian":
        _check_names(coords, ("mu", "sigma"), kind)
        if not coords:
            coords = {"mu": None}
        kwargs = {k: grid[k] for k in ("nodes", "span") if k in grid}
        if coords.get("mu"):
            kwargs["mu_range"] = coords["mu"]
        if coords.get("sigma"):
            kwargs["sigma_range"] = coords["sigma"]
        for name in ("mu", "sigma"):
            if name in coords and name in params:
                raise SpecError(f"{name} cannot be both a coordinate and a known constant")
        return make_gaussian(mu_known="mu" not in coords, sigma_known="sigma" not in coords,
                             mu=params.get("mu", 0.0), sigma=params.get("sigma", 1.0), **kwargs)
    if kind == "bernoulli":
        _check_names(coords, ("p",), kind)
        return make_bernoulli(coords["p"]) if coords.get("p") else make_bernoulli()
    if kind == "poisson":
        _check_names(coords, ("lam",), kind)
        kwargs = {"tail_mass": grid["tail_mass"]} if "tail_mass" in grid else {}
        if coords.get("lam"):
            kwargs["lam_range"] = coords["lam"]
        return make_poisson(**kwargs)
    if kind == "categorical":
        fam = make_categorical(params.get("m", 3))
        _check_names(coords, fam.coordinate_names, kind)
        if any(v is not None for v in coords.values()):
            raise SpecError("categorical coordinate domains are fixed to the open simplex")
        return fam
    if kind == "tabulated":
        table = _load_table(node["table"], base)
        sp = table["space"]
        if sp["kind"] == "discrete":
            if "points" not in sp:
                raise SpecError("a discrete table space needs 'points'")
            space = SampleSpace.discrete(sp["points"], sp.get("weights"))
        else:
            if "interval" not in sp:
                raise SpecError("a grid table space needs 'interval'")
            space = SampleSpace.grid(sp["interval"][0], sp["interval"][1], sp.get("nodes", 2001))
        names = table.get("coordinates") or (list(coords) if coords else None)
        if any(v is not None for v in coords.values()):
            raise SpecError("tabulated coordinate domains come from the parameter grid")
        return make_tabulated(space, table["param_grid"], table["densities"], names)
    if kind == "product":
        if coords:
            raise SpecError("product coordinates are defined by the factors and 'shared'")
        factors = [_build_family(f, base) for f in node["factors"]]
        return make_product(factors, node.get("shared"))
    raise SpecError(f"unknown family {kind!r}")


def load_spec(document: dict, base_dir: Optional[Path] = None) -> LoadedSpec:
    """Validate a spec document and build everything it describes."""
    validate(document, "model_spec")
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    try:
        family = _build_family(document, base)
    except FamilyError as exc:
        raise SpecError(str(exc)) from None
    fd = FDScheme(**document.get("fd", {}))
    names = family.coordinate_names
    if "theta" in document:
        theta = ParameterFunction.from_expression(document["theta"], names, fd)
    else:
        theta = ParameterFunction.coordinate(0, names[0])
    estimator = None
    if "estimator" in document:
        estimator = Estimator.from_expression(document["estimator"], family.space.names)
    m = document.get("method", {"kind": "exact"})
    if m["kind"] == "mc":
        method = ExpectationMethod.monte_carlo(m.get("samples", 100_000), m.get("seed", 0))
    else:
        method = ExpectationMethod.exact()
    return LoadedSpec(family, theta, estimator, method, fd, document)


def read_spec(path) -> LoadedSpec:
    path = Path(path)
    try:
        document = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec {path} is not valid JSON: {exc}") from None
    return load_spec(document, path.parent)
