"""Multi-agent plant, exosystem, internal model and assumption checks."""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .exceptions import DimensionError, NumericFailure
from .graph import Digraph, has_spanning_tree_from_leader, laplacian_parts, reachable_from_leader
from .numerics import (
    AXIS,
    RIGHT,
    as_matrix,
    companion,
    eigenvalues,
    minimal_polynomial,
    pbh_controllable,
    pbh_detectable,
    pbh_stabilizable,
    transmission_rank_ok,
)


@dataclass(frozen=True)
class AgentPlant:
    """One follower: nominal matrices plus additive perturbations."""

    A_nom: np.ndarray
    B_nom: np.ndarray
    E_nom: np.ndarray
    C_nom: np.ndarray
    dA: np.ndarray = None
    dB: np.ndarray = None
    dE: np.ndarray = None
    dC: np.ndarray = None

    def __post_init__(self):
        for name in ("A_nom", "B_nom", "E_nom", "C_nom"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        n = self.A_nom.shape[0]
        if self.A_nom.shape != (n, n):
            raise DimensionError("A must be square")
        if self.B_nom.shape[0] != n or self.E_nom.shape[0] != n or self.C_nom.shape[1] != n:
            raise DimensionError("B, E, C are inconsistent with A")
        for name, nom in (("dA", "A_nom"), ("dB", "B_nom"), ("dE", "E_nom"), ("dC", "C_nom")):
            ref = getattr(self, nom)
            val = getattr(self, name)
            val = np.zeros_like(ref) if val is None else as_matrix(val, name)
            if val.shape != ref.shape:
                raise DimensionError(f"{name} has shape {val.shape}, expected {ref.shape}")
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A_nom.shape[0]

    @property
    def m(self):
        return self.B_nom.shape[1]

    @property
    def p(self):
        return self.C_nom.shape[0]

    @property
    def q(self):
        return self.E_nom.shape[1]

    @property
    def A(self):
        return self.A_nom + self.dA

    @property
    def B(self):
        return self.B_nom + self.dB

    @property
    def E(self):
        return self.E_nom + self.dE

    @property
    def C(self):
        return self.C_nom + self.dC

    def nominal(self):
        return AgentPlant(self.A_nom, self.B_nom, self.E_nom, self.C_nom)


@dataclass(frozen=True)
class Exosystem:
    S: np.ndarray
    F: np.ndarray
    v0: np.ndarray

    def __post_init__(self):
        s = as_matrix(self.S, "S")
        f = as_matrix(self.F, "F")
        v0 = np.asarray(self.v0, dtype=float).ravel()
        if s.shape[0] != s.shape[1]:
            raise DimensionError("S must be square")
        if f.shape[1] != s.shape[0] or v0.size != s.shape[0]:
            raise DimensionError("F or v0 is inconsistent with S")
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "F", f)
        object.__setattr__(self, "v0", v0)

    @property
    def q(self):
        return self.S.shape[0]


@dataclass(frozen=True)
class StackedPlant:
    """Block-stacked agent matrices used by the closed-loop assembly."""

    A: np.ndarray   # blockdiag(A_i)
    B: np.ndarray   # blockdiag(B_i)
    E: np.ndarray   # col(E_i)
    C: np.ndarray   # (H kron I_p) blockdiag(C_i)
    F: np.ndarray   # (Delta 1_N) kron F
    C_agents: np.ndarray   # blockdiag(C_i)
    F_agents: np.ndarray   # 1_N kron F


@dataclass(frozen=True)
class PlantEnsemble:
    agents: tuple
    exo: Exosystem
    graph: Digraph
    tau_con: float = 0.0
    tau_com: float = 0.0

    def __post_init__(self):
        agents = tuple(self.agents)
        object.__setattr__(self, "agents", agents)
        if not agents:
            raise ValueError("at least one agent is required")
        if self.graph.followers != len(agents):
            raise DimensionError(
                f"graph has {self.graph.followers} followers but {len(agents)} agents given"
            )
        if self.tau_con < 0 or self.tau_com < 0:
            raise ValueError("delays must be nonnegative")
        first = agents[0]
        for k, ag in enumerate(agents[1:], start=2):
            for name in ("A_nom", "B_nom", "C_nom"):
                if getattr(ag, name).shape != getattr(first, name).shape or not np.allclose(
                    getattr(ag, name), getattr(first, name), rtol=0, atol=1e-12
                ):
                    raise ValueError(f"agent {k} has a different nominal {name[0]} matrix")
            if ag.E_nom.shape != first.E_nom.shape:
                raise DimensionError(f"agent {k} has E of shape {ag.E_nom.shape}")
        if first.q != self.exo.q or self.exo.F.shape[0] != first.p:
            raise DimensionError("exosystem dimensions do not match the agents")

    @property
    def N(self):
        return len(self.agents)

    @property
    def tau(self):
        """Composite delay ``tau_con + tau_com``."""
        return self.tau_con + self.tau_com

    @property
    def A(self):
        return self.agents[0].A_nom

    @property
    def B(self):
        return self.agents[0].B_nom

    @property
    def C(self):
        return self.agents[0].C_nom

    @property
    def dims(self):
        a = self.agents[0]
        return a.n, a.m, a.p, a.q

    def nominal(self):
        return replace(self, agents=tuple(a.nominal() for a in self.agents))

    def with_uncertainty(self, w):
        """Copy with perturbations unpacked from the uncertainty vector `w`."""
        n, m, p, q = self.dims
        parts = unpack_uncertainty(w, self.N, n, m, p, q)
        agents = tuple(
            replace(a, dA=dA, dB=dB, dE=dE, dC=dC) for a, (dA, dB, dE, dC) in zip(self.agents, parts)
        )
        return replace(self, agents=agents)

    def uncertainty(self):
        return pack_uncertainty(self.agents)

    def stacked(self, use_nominal=False):
        agents = [a.nominal() for a in self.agents] if use_nominal else self.agents
        lp = laplacian_parts(self.graph)
        _, _, p, _ = self.dims
        c_agents = sla.block_diag(*[a.C for a in agents])
        ones = np.ones((self.N, 1))
        return StackedPlant(
            A=sla.block_diag(*[a.A for a in agents]),
            B=sla.block_diag(*[a.B for a in agents]),
            E=np.vstack([a.E for a in agents]),
            C=np.kron(lp.H, np.eye(p)) @ c_agents,
            F=np.kron(lp.Delta @ ones, self.exo.F),
            C_agents=c_agents,
            F_agents=np.kron(ones, self.exo.F),
        )


def pack_uncertainty(agents):
    """Stack perturbations as ``col(vec[dA_1..dA_N], vec[dB..], vec[dE..], vec[dC..])``.

    ``vec`` is column-major on the horizontal concatenation.
    """
    blocks = []
    for name in ("dA", "dB", "dE", "dC"):
        blocks.append(np.hstack([getattr(a, name) for a in agents]).ravel(order="F"))
    return np.concatenate(blocks)


def unpack_uncertainty(w, N, n, m, p, q):
    """Inverse of :func:`pack_uncertainty`; returns ``[(dA, dB, dE, dC), ...]``."""
    w = np.asarray(w, dtype=float).ravel()
    shapes = [(n, n), (n, m), (n, q), (p, n)]
    sizes = [N * r * c for r, c in shapes]
    if w.size != sum(sizes):
        raise DimensionError(f"uncertainty vector has length {w.size}, expected {sum(sizes)}")
    per_kind = []
    offset = 0
    for (r, c), size in zip(shapes, sizes):
        wide = w[offset:offset + size].reshape((r, N * c), order="F")
        per_kind.append([wide[:, k * c:(k + 1) * c] for k in range(N)])
        offset += size
    return [tuple(kind[k] for kind in per_kind) for k in range(N)]


@dataclass(frozen=True)
class InternalModel:
    """Minimal p-copy internal model ``(G1, G2)`` built from ``(beta, sigma)``."""

    G1: np.ndarray
    G2: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    copies: int
    min_poly: np.ndarray = field(repr=False, default=None)

    @property
    def nz(self):
        return self.G1.shape[0]


def build_internal_model(s, p):
    """Companion-form minimal p-copy internal model of `s`.

    ``beta`` is the companion matrix of the minimal polynomial of `s` and
    ``sigma`` the last unit vector. Both invariants (characteristic
    polynomial and controllability) are re-checked on the result.
    """
    mpoly = minimal_polynomial(s)
    beta = companion(mpoly)
    d = beta.shape[0]
    sigma = np.zeros((d, 1))
    if d:
        sigma[-1, 0] = 1.0
        char = np.poly(beta)[::-1]
        if np.max(np.abs(char - mpoly)) > 1e-8 * max(1.0, np.max(np.abs(mpoly))):
            raise NumericFailure("companion matrix lost its characteristic polynomial")
        if not pbh_controllable(beta, sigma):
            raise NumericFailure("(beta, sigma) is not controllable")
    g1 = np.kron(np.eye(p), beta)
    g2 = np.kron(np.eye(p), sigma)
    return InternalModel(G1=g1, G2=g2, beta=beta, sigma=sigma, copies=p, min_poly=mpoly)


@dataclass
class AssumptionResult:
    key: str
    description: str
    passed: bool
    hard: bool = True
    witness: object = None
    note: str = ""

    def to_dict(self):
        w = self.witness
        if isinstance(w, complex) or isinstance(w, np.complexfloating):
            w = [float(np.real(w)), float(np.imag(w))]
        elif isinstance(w, np.generic):
            w = w.item()
        return {
            "key": self.key,
            "description": self.description,
            "passed": bool(self.passed),
            "hard": self.hard,
            "witness": w,
            "note": self.note,
        }


@dataclass
class AssumptionReport:
    results: list

    def __getitem__(self, key):
        for r in self.results:
            if r.key == key:
                return r
        raise KeyError(key)

    @property
    def ok(self):
        return all(r.passed for r in self.results if r.hard)

    def failures(self, keys=None):
        return [
            r for r in self.results
            if r.hard and not r.passed and (keys is None or r.key in keys)
        ]

    def to_dict(self):
        return {"ok": self.ok, "assumptions": [r.to_dict() for r in self.results]}


def check_assumptions(pe):
    """Evaluate every standing assumption and record a numeric witness."""
    results = []
    a, b, c, s = pe.A, pe.B, pe.C, pe.exo.S

    e_differs = any(not np.array_equal(ag.E_nom, pe.agents[0].E_nom) for ag in pe.agents)
    results.append(AssumptionResult(
        "identical_nominal", "nominal A, B, C are shared by all agents", True, hard=False,
        note="disturbance matrices E_i differ across agents" if e_differs else "",
    ))

    spec_s = eigenvalues(s)
    off = [lam for lam, lab in zip(spec_s.values, spec_s.labels) if lab != AXIS]
    results.append(AssumptionResult(
        "exosystem_on_axis", "all eigenvalues of S lie on the imaginary axis",
        not off, witness=complex(off[0]) if off else None,
    ))

    ok, lam = pbh_stabilizable(a, b, witness=True)
    results.append(AssumptionResult(
        "stabilizable", "(A, B) is stabilizable", ok, witness=None if ok else complex(lam),
    ))

    ok, lam = pbh_detectable(c, a, witness=True)
    results.append(AssumptionResult(
        "detectable", "(C, A) is detectable", ok, witness=None if ok else complex(lam),
    ))

    ok, lam = transmission_rank_ok(a, b, c, s, witness=True)
    results.append(AssumptionResult(
        "transmission_rank", "rank [[A - lam I, B], [C, 0]] = n + p for lam in eig(S)",
        ok, witness=None if ok else complex(lam),
    ))

    reach = has_spanning_tree_from_leader(pe.graph)
    missing = None
    if not reach:
        missing = sorted(set(range(pe.graph.node_count)) - reachable_from_leader(pe.graph))
    results.append(AssumptionResult(
        "spanning_tree", "the leader roots a directed spanning tree", reach,
        witness=missing, note="" if reach else "followers unreachable from node 0",
    ))

    spec_a = eigenvalues(a)
    right = spec_a.where(RIGHT)
    results.append(AssumptionResult(
        "no_unstable_modes", "A has no eigenvalue with positive real part",
        not len(right), witness=complex(right[0]) if len(right) else None,
    ))
    return AssumptionReport(results)


def regulated_errors(y, v, F):
    """``e_i = y_i + F v`` for stacked outputs ``y = col(y_1..y_N)``.

    Works on single samples (``y`` of length ``N p``) or on time series
    with samples along the first axis.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    F = as_matrix(F, "F")
    p = F.shape[0]
    if y.shape[-1] % p:
        raise DimensionError("stacked output length is not a multiple of p")
    ref = v @ F.T
    n_agents = y.shape[-1] // p
    return y + np.tile(ref, n_agents) if ref.ndim == 1 else y + np.tile(ref, (1, n_agents))
