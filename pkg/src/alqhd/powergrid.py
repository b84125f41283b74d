"""MATPOWER cases, BFS subgraphs, bus admittance and ACOPF expressions.

Model variables are per-unit: bus voltage magnitudes ``V``, bus angles
``theta`` (reference bus substituted by 0), and in-service generator
outputs ``Pg``/``Qg``.  Power-balance residuals are product-separable after
splitting ``cos(ti - tj)`` and ``sin(ti - tj)`` into single-angle products.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .grid import DomainBox
from .objectives import ConstraintSet, Factor, ObjectiveFn, SeparableExpr, Term, make_term
from .encode import TermTooWide

BUS_COLS = 13
GEN_COLS = 10
BRANCH_COLS = 11
GENCOST_MIN_COLS = 4
PENALTY_MAX_WIDTH = 8

REF, PV, PQ = 3, 2, 1


class ParseError(ValueError):
    pass


class UnsupportedVersion(ParseError):
    pass


class ZeroImpedanceBranch(ValueError):
    pass


class Disconnected(RuntimeError):
    def __init__(self, msg: str, partial: "PowerCase"):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class Bus:
    id: int
    type: int
    Pd: float
    Qd: float
    Gs: float
    Bs: float
    Vmax: float
    Vmin: float


@dataclass(frozen=True)
class Generator:
    bus: int
    Pmax: float
    Pmin: float
    Qmax: float
    Qmin: float
    status: int = 1
    cost: tuple[float, float, float] = (0.0, 0.0, 0.0)  # a, b, c of a*P^2 + b*P + c (P in MW)


@dataclass(frozen=True)
class Branch:
    f: int
    t: int
    r: float
    x: float
    b: float
    tap: float = 1.0
    shift: float = 0.0  # degrees
    status: int = 1
    rate_a: float = 0.0


@dataclass(frozen=True)
class PowerCase:
    base_mva: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...] = ()
    branches: tuple[Branch, ...] = ()
    name: str = "case"

    def __post_init__(self):
        ids = {b.id for b in self.buses}
        if len(ids) != len(self.buses):
            raise ValueError("duplicate bus ids")
        for br in self.branches:
            if br.f not in ids or br.t not in ids:
                raise ValueError(f"branch {br.f}-{br.t} references an unknown bus")
        for g in self.generators:
            if g.bus not in ids:
                raise ValueError(f"generator at unknown bus {g.bus}")

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def active_generators(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if g.status > 0)

    @property
    def active_branches(self) -> tuple[Branch, ...]:
        return tuple(br for br in self.branches if br.status > 0)


# -- parsing ------------------------------------------------------------------

_MATRIX_START = re.compile(r"^\s*mpc\.(\w+)\s*=\s*\[(.*)$")
_SCALAR = re.compile(r"^\s*mpc\.(\w+)\s*=\s*([^\[;]+?)\s*;?\s*$")
_FUNCTION = re.compile(r"^\s*function\s+mpc\s*=\s*(\w+)")


def _strip_comment(line: str) -> str:
    return line.split("%", 1)[0]


def _read_matrices(text: str) -> tuple[dict, dict]:
    scalars: dict[str, str] = {}
    matrices: dict[str, list[tuple[int, list[float]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is None:
            m = _MATRIX_START.match(line)
            if m:
                current = m.group(1)
                matrices[current] = []
                line = m.group(2)
            else:
                s = _SCALAR.match(line) or _FUNCTION.match(line)
                if s and s.re is _FUNCTION:
                    scalars["name"] = s.group(1)
                elif s:
                    scalars[s.group(1)] = s.group(2).strip().strip("'\"")
                continue
        closed = "]" in line
        body = line.split("]", 1)[0]
        for chunk in body.split(";"):
            tokens = chunk.replace(",", " ").split()
            if not tokens:
                continue
            try:
                row = [float(tok) for tok in tokens]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: non-numeric entry in mpc.{current}: {chunk.strip()!r}") from exc
            matrices[current].append((lineno, row))
        if closed:
            current = None
    if current is not None:
        raise ParseError(f"unterminated matrix mpc.{current}")
    return scalars, matrices


def _check_rows(name: str, rows, min_cols: int, uniform: bool = True) -> None:
    if not rows:
        return
    width = len(rows[0][1])
    for i, (lineno, row) in enumerate(rows):
        if len(row) < min_cols or (uniform and len(row) != width):
            raise ParseError(
                f"line {lineno}: mpc.{name} row {i + 1} has {len(row)} columns "
                f"(expected {width if uniform else min_cols}{'' if uniform else '+'})"
            )


def _gencost_coeffs(lineno: int, row: list[float]) -> tuple[float, float, float]:
    model, ncost = int(row[0]), int(row[3])
    if model != 2:
        raise ParseError(f"line {lineno}: only polynomial gencost (model 2) is supported")
    coeffs = row[4 : 4 + ncost]
    if len(coeffs) != ncost or ncost > 3:
        raise ParseError(f"line {lineno}: gencost needs {ncost} coefficients (at most quadratic)")
    padded = [0.0] * (3 - ncost) + coeffs
    return tuple(padded)  # type: ignore[return-value]


def parse_case(text: str, name: str = "case") -> PowerCase:
    scalars, mats = _read_matrices(text)
    version = scalars.get("version", "2")
    if version != "2":
        raise UnsupportedVersion(f"MATPOWER case version {version!r} is not supported (need '2')")
    for required in ("bus", "gen", "branch"):
        if required not in mats:
            raise ParseError(f"missing matrix mpc.{required}")
    _check_rows("bus", mats["bus"], BUS_COLS)
    _check_rows("gen", mats["gen"], GEN_COLS)
    _check_rows("branch", mats["branch"], BRANCH_COLS)
    costs = mats.get("gencost", [])
    _check_rows("gencost", costs, GENCOST_MIN_COLS, uniform=False)
    if costs and len(costs) != len(mats["gen"]):
        raise ParseError(f"mpc.gencost has {len(costs)} rows for {len(mats['gen'])} generators")

    buses = tuple(
        Bus(int(r[0]), int(r[1]), r[2], r[3], r[4], r[5], Vmax=r[11], Vmin=r[12]) for _, r in mats["bus"]
    )
    gens = []
    for i, (_, r) in enumerate(mats["gen"]):
        cost = _gencost_coeffs(*costs[i]) if costs else (0.0, 0.0, 0.0)
        gens.append(Generator(int(r[0]), Pmax=r[8], Pmin=r[9], Qmax=r[3], Qmin=r[4], status=int(r[7]), cost=cost))
    branches = tuple(
        Branch(int(r[0]), int(r[1]), r[2], r[3], r[4], tap=r[8] if r[8] != 0 else 1.0,
               shift=r[9], status=int(r[10]), rate_a=r[5])
        for _, r in mats["branch"]
    )
    name = scalars.get("name", name)
    base = float(scalars.get("baseMVA", 100.0))
    try:
        return PowerCase(base, buses, tuple(gens), branches, name)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def load_case(path) -> PowerCase:
    with open(path) as fh:
        text = fh.read()
    stem = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return parse_case(text, name=stem)


def fixture(name: str) -> PowerCase:
    """Bundled small test cases: ``case2``, ``case3``, ``case5chain``."""
    text = resources.files("alqhd").joinpath(f"data/{name}.m").read_text()
    return parse_case(text, name=name)


def to_matpower(case: PowerCase) -> str:
    """Serialise the consumed columns back to a version-2 case file."""
    fmt = lambda v: f"{v:.17g}"  # noqa: E731
    out = [f"function mpc = {case.name}", "mpc.version = '2';", f"mpc.baseMVA = {fmt(case.base_mva)};", "mpc.bus = ["]
    for b in case.buses:
        row = [b.id, b.type, b.Pd, b.Qd, b.Gs, b.Bs, 1, 1.0, 0.0, 0, 1, b.Vmax, b.Vmin]
        out.append("\t" + "\t".join(fmt(v) for v in row) + ";")
    out += ["];", "mpc.gen = ["]
    for g in case.generators:
        row = [g.bus, 0, 0, g.Qmax, g.Qmin, 1.0, case.base_mva, g.status, g.Pmax, g.Pmin]
        out.append("\t" + "\t".join(fmt(v) for v in row) + ";")
    out += ["];", "mpc.branch = ["]
    for br in case.branches:
        row = [br.f, br.t, br.r, br.x, br.b, br.rate_a, 0, 0, br.tap, br.shift, br.status, -360, 360]
        out.append("\t" + "\t".join(fmt(v) for v in row) + ";")
    out += ["];", "mpc.gencost = ["]
    for g in case.generators:
        out.append("\t2\t0\t0\t3\t" + "\t".join(fmt(v) for v in g.cost) + ";")
    out.append("];")
    return "\n".join(out) + "\n"


# -- subgraphs ----------------------------------------------------------------


def seed_bus(case: PowerCase, rule: str | int = "max-generation") -> int:
    if rule == "max-generation":
        cap: dict[int, float] = {}
        for g in case.active_generators:
            cap[g.bus] = cap.get(g.bus, 0.0) + g.Pmax
        if not cap:
            return min(b.id for b in case.buses)
        return min(cap, key=lambda bid: (-cap[bid], bid))
    bid = int(rule)
    if bid not in case.bus_index:
        raise ValueError(f"seed bus {bid} not in case")
    return bid


def _adjacency(case: PowerCase) -> dict[int, list[int]]:
    adj: dict[int, set[int]] = {b.id: set() for b in case.buses}
    for br in case.active_branches:
        if br.f != br.t:
            adj[br.f].add(br.t)
            adj[br.t].add(br.f)
    return {k: sorted(v) for k, v in adj.items()}


def extract_subgraph(case: PowerCase, target_n: int, seed_rule: str | int = "max-generation",
                     allow_partial: bool = False) -> PowerCase:
    """Breadth-first bus neighbourhood of ``target_n`` buses, renumbered 1..n."""
    if not 1 <= target_n <= case.n_bus:
        raise ValueError(f"target_n must lie in [1, {case.n_bus}], got {target_n}")
    adj = _adjacency(case)
    start = seed_bus(case, seed_rule)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue and len(order) < target_n:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
                if len(order) == target_n:
                    break

    keep = sorted(seen)
    renum = {old: new for new, old in enumerate(keep, 1)}
    buses = tuple(replace(b, id=renum[b.id]) for b in case.buses if b.id in renum)
    gens = tuple(replace(g, bus=renum[g.bus]) for g in case.generators if g.bus in renum)
    branches = tuple(
        replace(br, f=renum[br.f], t=renum[br.t]) for br in case.branches if br.f in renum and br.t in renum
    )
    if not any(b.type == REF for b in buses):
        ref_old = seed_bus(case, "max-generation") if seed_rule == "max-generation" else start
        ref = renum.get(ref_old, renum[start])
        buses = tuple(replace(b, type=REF) if b.id == ref else b for b in buses)
    sub = PowerCase(case.base_mva, buses, gens, branches, f"{case.name}_sub{len(keep)}")
    if len(keep) < target_n:
        if allow_partial:
            return sub
        raise Disconnected(f"BFS from bus {start} reached only {len(keep)} of {target_n} buses", sub)
    return sub


def is_connected(case: PowerCase) -> bool:
    adj = _adjacency(case)
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    queue = deque([start])
    while queue:
        for v in adj[queue.popleft()]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == len(adj)


def synthetic_case(n_bus: int, seed: int = 0, chord_prob: float = 0.3, gen_every: int = 4) -> PowerCase:
    """Ring network with random chords, loads on every bus, generators every few buses."""
    rng = np.random.default_rng(seed)
    buses = []
    for i in range(1, n_bus + 1):
        btype = REF if i == 1 else (PV if (i - 1) % gen_every == 0 else PQ)
        buses.append(Bus(i, btype, Pd=float(rng.uniform(10, 60)), Qd=float(rng.uniform(2, 20)),
                         Gs=0.0, Bs=0.0, Vmax=1.06, Vmin=0.94))
    gens = [
        Generator(b.id, Pmax=float(rng.uniform(150, 400)), Pmin=0.0, Qmax=150.0, Qmin=-100.0,
                  cost=(float(rng.uniform(0.005, 0.05)), float(rng.uniform(10, 40)), 0.0))
        for b in buses if b.type in (REF, PV)
    ]
    edges = set()
    if n_bus > 1:
        for i in range(1, n_bus + 1):
            j = i % n_bus + 1
            if i != j:
                edges.add((min(i, j), max(i, j)))
        for i in range(1, n_bus + 1):
            if rng.random() < chord_prob and n_bus > 3:
                j = int(rng.integers(1, n_bus + 1))
                if j != i:
                    edges.add((min(i, j), max(i, j)))
    branches = tuple(
        Branch(f, t, r=float(rng.uniform(0.005, 0.03)), x=float(rng.uniform(0.05, 0.2)),
               b=float(rng.uniform(0.0, 0.05)))
        for f, t in sorted(edges)
    )
    return PowerCase(100.0, tuple(buses), tuple(gens), branches, f"synthetic{n_bus}_s{seed}")


# -- admittance ---------------------------------------------------------------


def build_ybus(case: PowerCase) -> sp.csr_matrix:
    n = case.n_bus
    idx = case.bus_index
    rows, cols, vals = [], [], []

    def put(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for br in case.active_branches:
        z = complex(br.r, br.x)
        if z == 0:
            raise ZeroImpedanceBranch(f"branch {br.f}-{br.t} has zero impedance")
        y = 1.0 / z
        tap = br.tap * np.exp(1j * math.radians(br.shift))
        f, t = idx[br.f], idx[br.t]
        half_b = 0.5j * br.b
        put(f, f, (y + half_b) / abs(tap) ** 2)
        put(f, t, -y / np.conj(tap))
        put(t, f, -y / tap)
        put(t, t, y + half_b)
    for b in case.buses:
        if b.Gs or b.Bs:
            i = idx[b.id]
            put(i, i, complex(b.Gs, b.Bs) / case.base_mva)
    return sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n)).tocsr()


# -- ACOPF model --------------------------------------------------------------


@dataclass(frozen=True)
class AcopfModel:
    registry: tuple[str, ...]
    objective: SeparableExpr
    p_residuals: tuple[SeparableExpr, ...]
    q_residuals: tuple[SeparableExpr, ...]
    box: DomainBox
    ref_bus: int
    n_bus: int
    n_gen: int

    @property
    def n_active(self) -> int:
        return len(self.registry)

    @property
    def residuals(self) -> tuple[SeparableExpr, ...]:
        return self.p_residuals + self.q_residuals

    def var(self, name: str) -> int:
        return self.registry.index(name)

    def constraints(self) -> ConstraintSet:
        return ConstraintSet(equalities=tuple(ObjectiveFn.from_expr(r, "balance") for r in self.residuals))

    def summary(self) -> dict:
        return {
            "n_active": self.n_active,
            "n_bus": self.n_bus,
            "n_gen": self.n_gen,
            "ref_bus": self.ref_bus,
            "registry": list(self.registry),
            "objective_terms": len(self.objective.terms),
            "residual_terms": [len(r.terms) for r in self.residuals],
            "max_residual_width": max((r.width for r in self.residuals), default=0),
        }


def reference_bus(case: PowerCase) -> int:
    for b in case.buses:
        if b.type == REF:
            return b.id
    return seed_bus(case, "max-generation")


def build_acopf(case: PowerCase, ybus: sp.spmatrix | None = None) -> AcopfModel:
    ybus = build_ybus(case) if ybus is None else ybus
    Y = sp.coo_matrix(ybus)
    n = case.n_bus
    ref = case.bus_index[reference_bus(case)]
    gens = case.active_generators
    base = case.base_mva

    names = [f"V[{b.id}]" for b in case.buses]
    theta_var = {}
    for i, b in enumerate(case.buses):
        if i != ref:
            theta_var[i] = len(names)
            names.append(f"theta[{b.id}]")
    pg = [len(names) + k for k in range(len(gens))]
    names += [f"Pg[{k}]" for k in range(len(gens))]
    qg = [len(names) + k for k in range(len(gens))]
    names += [f"Qg[{k}]" for k in range(len(gens))]
    dim = len(names)

    def trig(i: int, kind: str):
        """cos/sin of bus i's angle as (variable, factor), or a constant at the reference."""
        if i not in theta_var:
            return 1.0 if kind == "cos" else 0.0
        return (theta_var[i], Factor(kind))

    def product(coef: float, parts) -> Term | None:
        factors = []
        for p in parts:
            if isinstance(p, float):
                coef *= p
            else:
                factors.append(p)
        return make_term(coef, factors) if coef != 0.0 else None

    p_terms: list[list[Term]] = [[] for _ in range(n)]
    q_terms: list[list[Term]] = [[] for _ in range(n)]
    for i, j, yij in zip(Y.row, Y.col, Y.data):
        G, B = yij.real, yij.imag
        Vi, Vj = (i, Factor("power", 1)), (j, Factor("power", 1))
        if i == j:
            p_terms[i].append(make_term(G, [Vi, Vi]))
            q_terms[i].append(make_term(-B, [Vi, Vi]))
            continue
        ci, si, cj, sj = trig(i, "cos"), trig(i, "sin"), trig(j, "cos"), trig(j, "sin")
        # cos(ti - tj) = ci cj + si sj ; sin(ti - tj) = si cj - ci sj
        candidates = [
            (G, [ci, cj]), (G, [si, sj]),
            (B, [si, cj]), (-B, [ci, sj]),
        ]
        for coef, trig_parts in candidates:
            t = product(coef, [Vi, Vj] + trig_parts)
            if t is not None:
                p_terms[i].append(t)
        candidates = [
            (G, [si, cj]), (-G, [ci, sj]),
            (-B, [ci, cj]), (-B, [si, sj]),
        ]
        for coef, trig_parts in candidates:
            t = product(coef, [Vi, Vj] + trig_parts)
            if t is not None:
                q_terms[i].append(t)

    idx = case.bus_index
    for k, g in enumerate(gens):
        i = idx[g.bus]
        p_terms[i].append(make_term(-1.0, [(pg[k], Factor("power", 1))]))
        q_terms[i].append(make_term(-1.0, [(qg[k], Factor("power", 1))]))
    for i, b in enumerate(case.buses):
        if b.Pd:
            p_terms[i].append(Term(b.Pd / base))
        if b.Qd:
            q_terms[i].append(Term(b.Qd / base))

    p_res = tuple(SeparableExpr(dim, tuple(ts)).collect() for ts in p_terms)
    q_res = tuple(SeparableExpr(dim, tuple(ts)).collect() for ts in q_terms)

    cost_terms = []
    for k, g in enumerate(gens):
        a, b_, c = g.cost
        cost_terms.append(make_term(a * base**2, [(pg[k], Factor("power", 2))]))
        cost_terms.append(make_term(b_ * base, [(pg[k], Factor("power", 1))]))
        cost_terms.append(Term(c))
    objective = SeparableExpr(dim, tuple(cost_terms)).collect()

    lower, upper = [], []
    for b in case.buses:
        lower.append(b.Vmin)
        upper.append(b.Vmax)
    for _ in theta_var:
        lower.append(-math.pi)
        upper.append(math.pi)
    for g in gens:
        lower.append(g.Pmin / base)
        upper.append(g.Pmax / base)
    for g in gens:
        lower.append(g.Qmin / base)
        upper.append(g.Qmax / base)
    lower, upper = np.array(lower), np.array(upper)
    flat = upper <= lower
    upper[flat] = lower[flat] + 1e-6  # fixed quantities still need a nonempty interval

    return AcopfModel(tuple(names), objective, p_res, q_res, DomainBox(lower, upper),
                      case.buses[ref].id, n, len(gens))


def penalized_objective(model: AcopfModel, mu: float, max_term_width: int = PENALTY_MAX_WIDTH) -> SeparableExpr:
    """Generation cost plus ``mu`` times the sum of squared balance residuals."""
    if not mu > 0:
        raise ValueError(f"penalty weight must be positive, got {mu}")
    expr = model.objective
    for res in model.residuals:
        expr = expr + res.square() * mu
    expr = expr.collect()
    if expr.width > max_term_width:
        raise TermTooWide(f"penalised objective has a term over {expr.width} variables (limit {max_term_width})")
    return expr
