"""Scenario config documents and the offline/online pipeline glue.

A scenario config is a single JSON object:

    {
      "agents": {"<id>": {"dim": n,
                          "drift": "zero" | {"kind": "affine", "A": [[..]], "b": [..]},
                          "input": "identity" | {"matrix": [[..]]}}},
      "cliques": {"<name>": {"members": [ids...],
                             "formula": "<task text>",
                             "coupling_bound": C}},
      "initial_states": {"<id>": [..]},
      "coupling": {"kind": "none" | "saturating_attraction",
                   "attractions": {"<id>": [[gain, target_id], ...]}},
      "secondary": {"kind": "none" | "pairwise_repulsion", "group": [ids...],
                    "gain": g, "softening": s, "known": false},
      "noise": {"bound": w, "distribution": "uniform_ball" | "adversarial" | "none",
                "seed": s},
      "sim": {"dt": dt},
      "search": {...SearchConfig fields...}
    }

Barrier documents produced by construction embed a hash of the producing
config so mismatched construct/simulate pipelines fail loudly.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from .barrier import barrier_to_dict, barrier_from_dict
from .controller import AgentModel, Clique
from .formula import normalize
from .parsing import parse
from .param_search import SearchConfig, maximize_r
from .predicates import StateLayout
from .sim import CouplingSpec, NoiseSpec, Scenario, SecondaryControlSpec

__all__ = [
    "ConfigError",
    "load_config",
    "validate_config",
    "config_hash",
    "canonical_json",
    "clique_layouts",
    "clique_formulas",
    "build_agents",
    "build_search_config",
    "run_construct",
    "build_cliques",
    "build_scenario",
]

BARRIER_DOC_FORMAT = "stlcbf-barriers"
LOG_DOC_FORMAT = "stlcbf-log"


class ConfigError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("agents", "cliques", "initial_states"):
        if key not in cfg:
            raise ConfigError(f"config is missing the {key!r} section")
    seen = set()
    for name, cl in cfg["cliques"].items():
        if "members" not in cl or "formula" not in cl:
            raise ConfigError(f"clique {name!r} needs members and formula")
        for i in cl["members"]:
            if str(i) not in cfg["agents"]:
                raise ConfigError(f"clique {name!r} member {i} is not a declared agent")
            if i in seen:
                raise ConfigError(f"agent {i} appears in more than one clique")
            seen.add(i)
    for i in cfg["agents"]:
        if int(i) not in seen:
            raise ConfigError(f"agent {i} belongs to no clique")
        if i not in cfg["initial_states"]:
            raise ConfigError(f"agent {i} has no initial state")
        dim = cfg["agents"][i].get("dim")
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError(f"agent {i} needs a positive integer dim")
        if len(cfg["initial_states"][i]) != dim:
            raise ConfigError(f"agent {i} initial state has wrong dimension")
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
    return validate_config(cfg)


def clique_layouts(cfg: dict) -> dict:
    out = {}
    for name, cl in cfg["cliques"].items():
        ids = tuple(int(i) for i in cl["members"])
        dims = tuple(cfg["agents"][str(i)]["dim"] for i in ids)
        out[name] = StateLayout(ids=ids, dims=dims)
    return out


def clique_formulas(cfg: dict) -> dict:
    layouts = clique_layouts(cfg)
    return {name: parse(cfg["cliques"][name]["formula"], layouts[name]) for name in layouts}


def _build_drift(spec, dim):
    if spec in (None, "zero"):
        return None
    if isinstance(spec, dict) and spec.get("kind") == "affine":
        A = np.asarray(spec["A"], dtype=float)
        b = np.asarray(spec["b"], dtype=float)
        if A.shape != (dim, dim) or b.shape != (dim,):
            raise ConfigError("affine drift has wrong shape")
        return lambda x, t: A @ x + b
    raise ConfigError(f"unknown drift spec {spec!r}")


def build_agents(cfg: dict) -> dict:
    agents = {}
    for key, spec in cfg["agents"].items():
        i = int(key)
        dim = spec["dim"]
        input_spec = spec.get("input", "identity")
        input_map = None
        input_dim = dim
        if isinstance(input_spec, dict):
            input_map = np.asarray(input_spec["matrix"], dtype=float)
            input_dim = input_map.shape[1]
        elif input_spec != "identity":
            raise ConfigError(f"unknown input map spec {input_spec!r}")
        agents[i] = AgentModel(
            agent_id=i,
            state_dim=dim,
            input_dim=input_dim,
            drift=_build_drift(spec.get("drift"), dim),
            input_map=input_map,
        )
    return agents


def build_search_config(cfg: dict) -> SearchConfig:
    sc = dict(cfg.get("search", {}))
    if "eta_grid" in sc:
        sc["eta_grid"] = tuple(float(e) for e in sc["eta_grid"])
    for rng_key in ("f0_range", "f1_range"):
        if rng_key in sc:
            sc[rng_key] = tuple(sc[rng_key])
    try:
        return SearchConfig(**sc)
    except TypeError as err:
        raise ConfigError(f"bad search section: {err}") from None


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def run_construct(cfg: dict) -> dict:
    """Offline stage: parameter search per clique; returns the barrier document."""
    layouts = clique_layouts(cfg)
    formulas = clique_formulas(cfg)
    search_cfg = build_search_config(cfg)
    doc = {
        "format": BARRIER_DOC_FORMAT,
        "version": 1,
        "config_hash": config_hash(cfg),
        "cliques": {},
    }
    for name in sorted(cfg["cliques"]):
        layout = layouts[name]
        x0 = np.concatenate(
            [np.asarray(cfg["initial_states"][str(i)], dtype=float) for i in layout.ids]
        )
        units = normalize(formulas[name])
        result = maximize_r(units, x0, search_cfg)
        entry = {
            "feasible": result.feasible,
            "r_star": result.r_star,
            "kappa": result.kappa,
            "witnesses": {repr(float(s)): w.tolist() for s, w in result.witnesses.items()},
            "diagnostics": _jsonable(result.diagnostics),
        }
        if result.barrier is not None:
            entry["barrier"] = barrier_to_dict(result.barrier)
        doc["cliques"][name] = entry
    return doc


def _check_doc(cfg: dict, doc: dict) -> None:
    if doc.get("format") != BARRIER_DOC_FORMAT:
        raise ConfigError("not a barrier document")
    if doc.get("config_hash") != config_hash(cfg):
        raise ConfigError(
            "barrier document was produced from a different config "
            "(hash mismatch); re-run construction"
        )
    for name, entry in doc["cliques"].items():
        if not entry.get("feasible") or "barrier" not in entry:
            raise ConfigError(f"clique {name!r} has no feasible barrier in the document")


def build_cliques(cfg: dict, doc: dict) -> tuple:
    """Rebuild runtime cliques from a barrier document; returns
    (cliques tuple, r_stars dict)."""
    _check_doc(cfg, doc)
    layouts = clique_layouts(cfg)
    max_dim = max(spec["dim"] for spec in cfg["agents"].values())
    cliques = []
    r_stars = {}
    for name in sorted(cfg["cliques"]):
        entry = doc["cliques"][name]
        cliques.append(
            Clique(
                name=name,
                members=tuple(int(i) for i in cfg["cliques"][name]["members"]),
                barrier=barrier_from_dict(entry["barrier"]),
                layout=layouts[name],
                coupling_bound=float(cfg["cliques"][name].get("coupling_bound", 0.0)),
                kappa=float(entry["kappa"]),
                max_agent_dim=max_dim,
            )
        )
        r_stars[name] = float(entry["r_star"])
    return tuple(cliques), r_stars


def _known_secondary_fn(layout: StateLayout, member: int, group, gain, softening):
    blocks = {j: layout.block(j) for j in group}

    def fn(x_bar, t):
        xi = x_bar[blocks[member]]
        fu = np.zeros_like(xi)
        for j in group:
            if j == member:
                continue
            diff = xi - x_bar[blocks[j]]
            fu = fu + diff / (float(np.linalg.norm(diff)) + softening)
        return gain * fu

    return fn


def build_scenario(cfg: dict, doc: dict, *, seed: int | None = None, dt: float | None = None):
    """Online stage inputs: (Scenario, formulas, r_stars)."""
    cliques, r_stars = build_cliques(cfg, doc)
    agents = build_agents(cfg)
    coup_cfg = cfg.get("coupling", {"kind": "none"})
    coupling = CouplingSpec(
        kind=coup_cfg.get("kind", "none"),
        attractions={
            int(i): tuple((float(g), int(tgt)) for g, tgt in pulls)
            for i, pulls in coup_cfg.get("attractions", {}).items()
        },
    )
    sec_cfg = cfg.get("secondary", {"kind": "none"})
    secondary = SecondaryControlSpec(
        kind=sec_cfg.get("kind", "none"),
        group=tuple(int(i) for i in sec_cfg.get("group", ())),
        gain=float(sec_cfg.get("gain", 1.0)),
        softening=float(sec_cfg.get("softening", 0.01)),
    )
    if sec_cfg.get("known", False) and secondary.kind == "pairwise_repulsion":
        for cl in cliques:
            for i in cl.members:
                if i in secondary.group:
                    if not set(secondary.group) <= set(cl.members):
                        raise ConfigError(
                            "known secondary control requires the whole group "
                            f"inside one clique (agent {i} in {cl.name!r})"
                        )
                    model = agents[i]
                    agents[i] = AgentModel(
                        agent_id=model.agent_id,
                        state_dim=model.state_dim,
                        input_dim=model.input_dim,
                        drift=model.drift,
                        input_map=model.input_map,
                        known_secondary=_known_secondary_fn(
                            cl.layout, i, secondary.group, secondary.gain, secondary.softening
                        ),
                    )
    noise_cfg = cfg.get("noise", {})
    noise = NoiseSpec(
        bound=float(noise_cfg.get("bound", 0.0)),
        distribution=noise_cfg.get("distribution", "uniform_ball"),
        seed=int(seed if seed is not None else noise_cfg.get("seed", 0)),
    )
    sim_cfg = cfg.get("sim", {})
    scenario = Scenario(
        agents=agents,
        cliques=cliques,
        x0={int(i): np.asarray(v, dtype=float) for i, v in cfg["initial_states"].items()},
        dt=float(dt if dt is not None else sim_cfg.get("dt", 0.005)),
        coupling=coupling,
        secondary=secondary,
        noise=noise,
    )
    return scenario, clique_formulas(cfg), r_stars
