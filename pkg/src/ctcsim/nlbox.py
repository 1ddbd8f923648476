"""Nonlinear boxes acting on generalised states and the no-signalling audit.

A generalised state is a finite mixture of delta functionals over ontic
density matrices. A box acts on each ontic state separately; an observer only
sees the weighted average of the outputs.
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np

from ._parallel import chunk_streams, pmap
from .qcore import DensityMatrix, DimensionMismatch, ket, trace_distance_array
from . import deutsch

EPS_BALL = 1e-6
GAP_THRESHOLD = 1e-6
SIMPLIFY_TOL = 1e-10
MC_CHUNK = 10_000


class UnknownBox(KeyError):
    pass


class Verdict(str, Enum):
    NO_SIGNALLING = "NoSignalling"
    SIGNALLING_POSSIBLE = "SignallingPossible"


class _NotApplicable:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NotApplicable"


NotApplicable = _NotApplicable()


@dataclass(frozen=True, eq=False)
class GeneralizedState:
    support: tuple[tuple[float, DensityMatrix], ...]

    def __post_init__(self):
        sup = tuple((float(w), r) for w, r in self.support)
        if not sup:
            raise ValueError("empty support")
        ws = np.array([w for w, _ in sup])
        if (ws <= 0).any():
            raise ValueError("weights must be positive")
        if abs(ws.sum() - 1) > 1e-12:
            raise ValueError(f"weights sum to {ws.sum()}")
        if len({r.dims for _, r in sup}) != 1:
            raise DimensionMismatch("ontic states must share dims")
        object.__setattr__(self, "support", sup)

    @property
    def dims(self):
        return self.support[0][1].dims

    @staticmethod
    def delta(rho: DensityMatrix) -> "GeneralizedState":
        return GeneralizedState(((1.0, rho),))


@dataclass(frozen=True)
class NonlinearBox:
    dims: tuple[int, ...] | None  # None accepts any dims
    map: Callable[[DensityMatrix], DensityMatrix]
    label: str = "box"

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        if self.dims is not None and rho.dims != self.dims:
            raise DimensionMismatch(f"box expects dims {self.dims}, got {rho.dims}")
        return self.map(rho)


@dataclass(frozen=True)
class RemotePreparation:
    label: str
    settings: tuple[str, ...]
    ensembles: tuple[GeneralizedState, ...]

    def __post_init__(self):
        if len(self.settings) != len(self.ensembles):
            raise ValueError("one ensemble per setting")
        s = [simplify(g).data for g in self.ensembles]
        for a in s[1:]:
            if np.abs(a - s[0]).max() > SIMPLIFY_TOL:
                raise ValueError(f"{self.label}: settings differ already in standard quantum mechanics")


@dataclass
class Witness:
    prep: str
    pair: tuple[str, str]
    measurement: np.ndarray  # Helstrom projector; outcome 0 guesses the first label
    distance: float


@dataclass
class AuditReport:
    verdict: Verdict
    witnesses: list[Witness] = field(default_factory=list)


# ---------------------------------------------------------------- core ops

def simplify(g: GeneralizedState) -> DensityMatrix:
    return DensityMatrix(g.dims, sum(w * r.data for w, r in g.support))


def apply_box(box: NonlinearBox, g: GeneralizedState) -> GeneralizedState:
    return GeneralizedState(tuple((w, box(r)) for w, r in g.support))


def box_output(box: NonlinearBox, g: GeneralizedState) -> np.ndarray:
    """What an observer sees: the simplification of the mapped state."""
    return simplify(apply_box(box, g)).data


def helstrom(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Projector onto the positive part of a - b and the trace distance."""
    d = 0.5 * ((a - b) + (a - b).conj().T)
    lam, v = np.linalg.eigh(d)
    pos = v[:, lam > 0]
    return pos @ pos.conj().T, float(0.5 * np.abs(lam).sum())


# ---------------------------------------------------------------- boxes

_PURE = {"0": "0", "1": "1", "+": "+", "-": "-", "y+": "r", "y-": "l"}


def product_state(labels: Sequence[str]) -> DensityMatrix:
    """Product state from per-qubit labels 0 1 + - y+ y- I."""
    mats = []
    for lab in labels:
        lab = lab.strip()
        if lab == "I":
            mats.append(np.eye(2) / 2)
        elif lab in _PURE:
            k = ket(_PURE[lab])
            mats.append(np.outer(k, k.conj()))
        else:
            raise ValueError(f"unknown qubit label {lab!r}")
    return DensityMatrix((2,) * len(mats), reduce(np.kron, mats))


def pure_state_box(table: Mapping[str, str], label: str, eps_ball: float = EPS_BALL) -> NonlinearBox:
    """Map listed pure inputs (keys, comma separated labels) to listed outputs,
    for every state within ``eps_ball`` trace distance; identity elsewhere."""
    pairs = [(product_state(k.split(",")), product_state(v.split(","))) for k, v in table.items()]
    dims = pairs[0][0].dims

    def f(rho: DensityMatrix) -> DensityMatrix:
        for src, dst in pairs:
            if trace_distance_array(rho.data, src.data) < eps_ball:
                return dst
        return rho

    return NonlinearBox(dims, f, label)


BRUN_TABLE = {"0,0": "0,0", "1,0": "0,1", "+,0": "1,0", "-,0": "1,1"}
AXIS_SWAP_TABLE = {"y+": "0", "y-": "1"}


def builtin_box(name: str, U=None, eps_ball: float = EPS_BALL, cfg=None) -> NonlinearBox:
    key = name.lower()
    if key == "brun":
        return pure_state_box(BRUN_TABLE, "Brun", eps_ball)
    if key == "axisswap":
        return pure_state_box(AXIS_SWAP_TABLE, "AxisSwap", eps_ball)
    if key == "identity":
        return NonlinearBox(None, lambda r: r, "identity")
    if key == "deutschbox":
        if U is None:
            raise ValueError("DeutschBox needs a unitary")
        n = len(U.dims)
        dims = tuple(U.dims[: n // 2]) if len(U.dims) > 1 else (2,)
        return NonlinearBox(dims, lambda r: deutsch.deutsch_output(U, r, cfg), "DeutschBox")
    raise UnknownBox(name)


# ---------------------------------------------------------------- verification

def _solve_mix(si: np.ndarray, sj: np.ndarray, sk: np.ndarray) -> float | None:
    """gamma in [0,1] with gamma si + (1-gamma) sj = sk, else None."""
    a = (si - sj).ravel()
    b = (sk - sj).ravel()
    nrm = np.vdot(a, a).real
    if nrm < 1e-20:
        return None
    g = float(np.vdot(a, b).real / nrm)
    if not -1e-12 <= g <= 1 + 1e-12:
        return None
    if np.abs(g * a - b).max() > SIMPLIFY_TOL:
        return None
    return min(max(g, 0.0), 1.0)


def verifying_witnesses(box: NonlinearBox, states: Sequence[GeneralizedState],
                        labels: Sequence[str] | None = None, prep: str = "",
                        threshold: float = GAP_THRESHOLD) -> list[Witness]:
    labels = list(labels) if labels is not None else [str(i) for i in range(len(states))]
    simp = [simplify(g).data for g in states]
    outs = [box_output(box, g) for g in states]
    found: list[Witness] = []
    for i, j in itertools.combinations(range(len(states)), 2):
        if np.abs(simp[i] - simp[j]).max() > SIMPLIFY_TOL:
            continue
        P, d = helstrom(outs[i], outs[j])
        if d > threshold:
            found.append(Witness(prep, (labels[i], labels[j]), P, d))
    # a member against a convex combination of two others
    for k in range(len(states)):
        for i, j in itertools.combinations([m for m in range(len(states)) if m != k], 2):
            g = _solve_mix(simp[i], simp[j], simp[k])
            if g is None or g in (0.0, 1.0):
                continue
            mixed = g * outs[i] + (1 - g) * outs[j]
            P, d = helstrom(outs[k], mixed)
            if d > threshold:
                name = f"{g:.6g}*{labels[i]}+{1 - g:.6g}*{labels[j]}"
                found.append(Witness(prep, (labels[k], name), P, d))
    return found


def is_verifying_set(box: NonlinearBox, states: Sequence[GeneralizedState],
                     threshold: float = GAP_THRESHOLD) -> tuple[bool, Witness | None]:
    if len(states) < 2:
        raise ValueError("need at least two states")
    w = verifying_witnesses(box, states, threshold=threshold)
    if not w:
        return False, None
    return True, max(w, key=lambda x: x.distance)


def signalling_audit(box: NonlinearBox, preps: Sequence[RemotePreparation],
                     threshold: float = GAP_THRESHOLD) -> AuditReport:
    wit: list[Witness] = []
    for p in preps:
        wit += verifying_witnesses(box, p.ensembles, p.settings, p.label, threshold)
    verdict = Verdict.SIGNALLING_POSSIBLE if wit else Verdict.NO_SIGNALLING
    return AuditReport(verdict, wit)


# ---------------------------------------------------------------- Gisin experiment

@dataclass
class GisinResult:
    success: float
    stderr: float
    analytic: float
    trials: int


def _measurement(outs: list[np.ndarray]) -> list[np.ndarray]:
    """Helstrom for two settings, pretty-good measurement otherwise (equal priors)."""
    if len(outs) == 2:
        P, _ = helstrom(outs[0], outs[1])
        return [P, np.eye(P.shape[0]) - P]
    S = sum(outs)
    lam, v = np.linalg.eigh(S)
    inv = np.where(lam > 1e-14, 1 / np.sqrt(np.clip(lam, 1e-300, None)), 0.0)
    Sm = (v * inv) @ v.conj().T
    E = [Sm @ o @ Sm for o in outs]
    # complete on the kernel of S so the POVM sums to identity
    E[0] = E[0] + (np.eye(S.shape[0]) - sum(E))
    return E


def gisin_experiment(box: NonlinearBox, ontology: Mapping[str, GeneralizedState],
                     trials: int = 10_000, seed: int = 0, workers: int | None = None):
    """Monte-Carlo estimate of Bob's probability of guessing Alice's setting.

    Alice picks a setting uniformly, Bob receives an ontic state drawn from
    that setting's ensemble, passes it through the box and measures.
    """
    settings = list(ontology)
    if len(settings) < 2:
        return NotApplicable
    ens = [ontology[s] for s in settings]
    outs = [box_output(box, g) for g in ens]
    E = _measurement(outs)
    n = len(settings)
    analytic = float(sum(np.trace(E[x] @ outs[x]).real for x in range(n)) / n)
    # guess probabilities per (setting, ontic index)
    probs, weights = [], []
    for g in ens:
        mapped = [box(r).data for _, r in g.support]
        probs.append(np.array([[np.clip(np.trace(Ey @ m).real, 0, 1) for Ey in E] for m in mapped]))
        weights.append(np.array([w for w, _ in g.support]))

    def run(job):
        m, rng = job
        xs = rng.integers(n, size=m)
        hits = 0
        for x in range(n):
            cnt = int((xs == x).sum())
            if not cnt:
                continue
            idx = rng.choice(len(weights[x]), size=cnt, p=weights[x])
            p = probs[x][idx]
            p = p / p.sum(axis=1, keepdims=True)
            u = rng.random(cnt)
            guess = (u[:, None] > np.cumsum(p, axis=1)).sum(axis=1)
            hits += int((guess == x).sum())
        return hits

    hits = sum(pmap(run, chunk_streams(seed, trials, MC_CHUNK), workers))
    s = hits / trials
    return GisinResult(s, float(np.sqrt(s * (1 - s) / trials)), analytic, trials)


# ---------------------------------------------------------------- fixtures

def parse_ensemble(text: str) -> GeneralizedState:
    """Parse ``w @ a,b | w @ c,d`` into a generalised state."""
    sup = []
    for term in text.split("|"):
        w, st = term.split("@")
        sup.append((float(w), product_state(st.strip().split(","))))
    return GeneralizedState(tuple(sup))


@dataclass(frozen=True)
class Fixture:
    name: str
    box: str
    description: str
    prep: RemotePreparation

    @property
    def ontology(self) -> dict[str, GeneralizedState]:
        return dict(zip(self.prep.settings, self.prep.ensembles))


def load_fixtures(path=None) -> dict[str, Fixture]:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if path is None:
        cp.read_string(resources.files("ctcsim.data").joinpath("ontologies.ini").read_text())
    else:
        cp.read(path)
    out = {}
    for sec in cp.sections():
        items = cp[sec]
        sets = [(k.split(".", 1)[1], parse_ensemble(v)) for k, v in items.items() if k.startswith("setting.")]
        prep = RemotePreparation(sec, tuple(s for s, _ in sets), tuple(g for _, g in sets))
        out[sec] = Fixture(sec, items.get("box", "identity"), items.get("description", ""), prep)
    return out


def audit_fixtures(fixtures: Mapping[str, Fixture] | None = None) -> dict[str, AuditReport]:
    fixtures = fixtures or load_fixtures()
    return {k: signalling_audit(builtin_box(f.box), [f.prep]) for k, f in fixtures.items()}
