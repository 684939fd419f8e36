"""JSON scenario configs and gains files.

Matrices are stored as ``{"rows": r, "cols": c, "data": [row-major]}`` in
gains files; configs accept plain nested lists.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Digraph
from .plant import AgentPlant, Exosystem, InternalModel, PlantEnsemble
from .synthesis import OUTPUT_FEEDBACK, STATE_FEEDBACK, ControllerRealization


@dataclass
class Scenario:
    ensemble: PlantEnsemble
    synthesis: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    output_dir: str = "."
    has_perturbation: bool = False


SYNTHESIS_DEFAULTS = {
    "kind": STATE_FEEDBACK,
    "gamma0": 0.1,
    "nu1": None,
    "nu2": None,
    "max_halvings": 20,
    "gamma_sweep": None,
}


def _mat(x, name):
    m = np.array(x, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1) if name in ("C", "F") else m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a nested list (matrix)")
    return m


def parse_scenario(cfg):
    """Build a :class:`Scenario` from a decoded config dictionary."""
    plant = cfg["plant"]
    exo_cfg = cfg["exosystem"]
    a, b, c = _mat(plant["A"], "A"), _mat(plant["B"], "B"), _mat(plant["C"], "C")
    s = _mat(exo_cfg["S"], "S")
    f = _mat(exo_cfg["F"], "F")
    v0 = exo_cfg.get("v0", np.zeros(s.shape[0]))
    edges = cfg["graph"]["edges"]
    if "E_agents" in plant:
        e_list = [_mat(e, "E") for e in plant["E_agents"]]
        n_agents = len(e_list)
    else:
        n_agents = int(plant.get("agents", cfg["graph"].get("nodes", 0) - 1))
        e_list = [_mat(plant.get("E", np.zeros((a.shape[0], s.shape[0]))), "E")] * n_agents
    graph = Digraph.from_edges(int(cfg["graph"].get("nodes", n_agents + 1)), edges)
    perts = plant.get("perturbations") or [{}] * n_agents
    if len(perts) != n_agents:
        raise ValueError(f"{len(perts)} perturbation blocks for {n_agents} agents")
    agents = []
    for e, pert in zip(e_list, perts):
        agents.append(AgentPlant(
            a, b, e, c,
            dA=pert.get("dA"), dB=pert.get("dB"), dE=pert.get("dE"), dC=pert.get("dC"),
        ))
    delays = cfg.get("delays", {})
    pe = PlantEnsemble(
        agents, Exosystem(s, f, v0), graph,
        tau_con=float(delays.get("tau_con", 0.0)), tau_com=float(delays.get("tau_com", 0.0)),
    )
    if plant.get("w") is not None:
        pe = pe.with_uncertainty(plant["w"])
    has_pert = bool(np.any(pe.uncertainty()))
    syn = {**SYNTHESIS_DEFAULTS, **cfg.get("synthesis", {})}
    if syn["kind"] not in (STATE_FEEDBACK, OUTPUT_FEEDBACK):
        raise ValueError(f"unknown feedback kind {syn['kind']!r}")
    sim = dict(cfg.get("simulation", {}))
    init = {}
    for key, cfg_key in (("x", "x0"), ("z", "z0"), ("xi", "xi0")):
        if sim.get(cfg_key) is not None:
            init[key] = np.asarray(sim[cfg_key], dtype=float).ravel()
    sim["init"] = init or None
    out = cfg.get("output", {}).get("dir", ".")
    return Scenario(pe, syn, sim, out, has_pert)


def load_scenario(path):
    with open(path) as fh:
        return parse_scenario(json.load(fh))


def matrix_to_json(m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return {"rows": m.shape[0], "cols": m.shape[1], "data": [float(x) for x in m.ravel()]}


def matrix_from_json(d):
    return np.array(d["data"], dtype=float).reshape(d["rows"], d["cols"])


def gains_to_json(ctrl):
    out = {
        "kind": ctrl.kind,
        "Kx": matrix_to_json(ctrl.Kx),
        "Kz": matrix_to_json(ctrl.Kz),
        "G1": matrix_to_json(ctrl.im.G1),
        "G2": matrix_to_json(ctrl.im.G2),
        "beta": matrix_to_json(ctrl.im.beta),
        "sigma": matrix_to_json(ctrl.im.sigma),
        "copies": ctrl.im.copies,
        "gamma": ctrl.gamma,
        "nu1": ctrl.nu1,
        "nu2": ctrl.nu2,
        "notes": list(ctrl.notes),
    }
    if ctrl.L is not None:
        out["L"] = matrix_to_json(ctrl.L)
    if ctrl.certificate is not None:
        out["certificate"] = ctrl.certificate.to_dict()
    return out


def gains_from_json(d):
    im = InternalModel(
        G1=matrix_from_json(d["G1"]),
        G2=matrix_from_json(d["G2"]),
        beta=matrix_from_json(d["beta"]),
        sigma=matrix_from_json(d["sigma"]),
        copies=int(d["copies"]),
    )
    return ControllerRealization(
        kind=d["kind"],
        Kx=matrix_from_json(d["Kx"]),
        Kz=matrix_from_json(d["Kz"]),
        im=im,
        gamma=d["gamma"],
        nu1=d["nu1"],
        L=matrix_from_json(d["L"]) if "L" in d else None,
        nu2=d.get("nu2"),
        notes=list(d.get("notes", [])),
    )


def save_gains(ctrl, path):
    Path(path).write_text(json.dumps(gains_to_json(ctrl), indent=2))


def load_gains(path):
    return gains_from_json(json.loads(Path(path).read_text()))
