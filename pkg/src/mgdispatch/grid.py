"""Radial feeder model and backward-forward sweep power flow.

The sweep uses the path-incidence form: with T[b, j] = 1 when bus j lies
downstream of branch b, branch currents are T @ I and bus voltages are
1 - T.T @ diag(z) @ T @ I.  Many operating points are solved at once by
stacking them along a leading axis.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidStateError, SchemaError, TopologyError

TOLERANCE = 1e-6
MAX_ITER = 100


@dataclass(frozen=True)
class Bus:
    id: int
    p_load: float
    q_load: float
    mg_zone: int = 0
    devices: tuple = ()


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    length: float = 1.0
    failure_rate: float = 0.0
    has_sectionalizer: bool = False


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple
    branches: tuple
    substation_bus: int
    v_base: float = 12.66  # kV
    s_base: float = 10000.0  # kVA
    name: str = ""
    _topo: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        buses = tuple(sorted(self.buses, key=lambda b: b.id))
        object.__setattr__(self, "buses", buses)
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "_topo", _build_topology(self))

    @property
    def n_bus(self):
        return len(self.buses)

    @property
    def bus_ids(self):
        return [b.id for b in self.buses]

    def bus_index(self, bus_id):
        try:
            return self._topo["index"][bus_id]
        except KeyError:
            raise SchemaError(f"unknown bus id {bus_id}") from None

    def branch_index(self, branch_id):
        return self._topo["branch_index"][branch_id]

    @property
    def z_base(self):
        return self.v_base**2 * 1000.0 / self.s_base

    @property
    def p_load(self):
        return np.array([b.p_load for b in self.buses])

    @property
    def q_load(self):
        return np.array([b.q_load for b in self.buses])

    @property
    def zones(self):
        return np.array([b.mg_zone for b in self.buses])

    @property
    def parent_index(self):
        """Upstream bus index of each branch, in branch order."""
        return self._topo["parent"]

    @property
    def child_index(self):
        return self._topo["child"]

    @property
    def downstream(self):
        """Boolean (n_branch, n_bus) matrix: bus j is fed through branch b."""
        return self._topo["T"]

    def downstream_buses(self, branch_id):
        b = self.branch_index(branch_id)
        return [self.buses[j].id for j in np.flatnonzero(self.downstream[b])]


def _build_topology(net: NetworkModel):
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate bus id")
    index = {bid: i for i, bid in enumerate(ids)}
    if net.substation_bus not in index:
        raise SchemaError(f"substation bus {net.substation_bus} not in bus list")
    br_ids = [br.id for br in net.branches]
    if len(set(br_ids)) != len(br_ids):
        raise SchemaError("duplicate branch id")
    adj = {i: [] for i in range(len(ids))}
    for k, br in enumerate(net.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in index:
                raise SchemaError(f"branch {br.id} references unknown bus {end}")
        if br.from_bus == br.to_bus:
            raise TopologyError(f"branch {br.id} is a self-loop")
        adj[index[br.from_bus]].append((index[br.to_bus], k))
        adj[index[br.to_bus]].append((index[br.from_bus], k))

    n, m = len(ids), len(net.branches)
    root = index[net.substation_bus]
    parent = np.full(m, -1)
    child = np.full(m, -1)
    seen = {root}
    used = set()
    queue = deque([root])
    order = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for v, k in sorted(adj[u], key=lambda e: net.branches[e[1]].id):
            if k in used:
                continue
            used.add(k)
            if v in seen:
                raise TopologyError(f"branch {net.branches[k].id} closes a cycle")
            seen.add(v)
            parent[k], child[k] = u, v
            queue.append(v)
    if len(seen) != n:
        lost = sorted(ids[i] for i in set(range(n)) - seen)
        raise TopologyError(f"buses {lost} are not connected to the substation")
    if m != n - 1:
        raise TopologyError(f"{m} branches for {n} buses; a radial feeder needs {n - 1}")

    # branch feeding each bus, then downstream sets by walking up from every bus
    feeder = np.full(n, -1)
    feeder[child] = np.arange(m)
    T = np.zeros((m, n), dtype=bool)
    for j in range(n):
        u = j
        while u != root:
            k = feeder[u]
            T[k, j] = True
            u = parent[k]
    return {
        "index": index,
        "branch_index": {bid: k for k, bid in enumerate(br_ids)},
        "parent": parent,
        "child": child,
        "root": root,
        "order": np.array(order),
        "T": T,
    }


def _read_rows(path, required):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path.name}: missing columns {missing}")
        return [(i, row) for i, row in enumerate(reader, start=2)]


def _parse(path, line, row, col, cast):
    try:
        return cast(row[col])
    except (TypeError, ValueError):
        raise SchemaError(f"{path.name} row {line}: bad {col} value {row[col]!r}") from None


def _flag(s):
    s = s.strip().lower()
    if s in ("1", "true", "yes"):
        return True
    if s in ("0", "false", "no", ""):
        return False
    raise ValueError(s)


BUS_COLUMNS = ("bus_id", "p_load_kw", "q_load_kvar", "mg_zone")
BRANCH_COLUMNS = ("branch_id", "from", "to", "r_ohm", "x_ohm", "length_km",
                  "failures_per_km_yr", "has_sectionalizer")


def load_network(path):
    """Read ``buses.csv``, ``branches.csv`` and optional ``meta.csv`` from a directory.

    Branch impedances are in ohms and converted to per-unit with the bases in
    ``meta.csv`` (keys ``substation_bus``, ``v_base_kv``, ``s_base_kva``, ``name``).
    """
    path = Path(path)
    if not path.is_dir():
        raise SchemaError(f"{path} is not a dataset directory")
    meta = {"name": path.name, "v_base_kv": "12.66", "s_base_kva": "10000"}
    meta_path = path / "meta.csv"
    if meta_path.exists():
        for line, row in _read_rows(meta_path, ("key", "value")):
            meta[row["key"].strip()] = row["value"].strip()

    bpath = path / "buses.csv"
    buses, seen = [], set()
    for line, row in _read_rows(bpath, BUS_COLUMNS):
        bid = _parse(bpath, line, row, "bus_id", int)
        if bid in seen:
            raise SchemaError(f"buses.csv row {line}: duplicate bus id {bid}")
        seen.add(bid)
        p = _parse(bpath, line, row, "p_load_kw", float)
        q = _parse(bpath, line, row, "q_load_kvar", float)
        if p < 0 or q < 0 or not np.isfinite([p, q]).all():
            raise SchemaError(f"buses.csv row {line}: loads must be finite and >= 0")
        buses.append(Bus(bid, p, q, _parse(bpath, line, row, "mg_zone", int)))

    try:
        v_base = float(meta["v_base_kv"])
        s_base = float(meta["s_base_kva"])
        sub = int(meta.get("substation_bus", min(seen) if seen else 1))
    except ValueError as exc:
        raise SchemaError(f"meta.csv: {exc}") from None
    z_base = v_base**2 * 1000.0 / s_base

    rpath = path / "branches.csv"
    branches, br_seen, pairs = [], set(), {}
    for line, row in _read_rows(rpath, BRANCH_COLUMNS):
        brid = _parse(rpath, line, row, "branch_id", int)
        if brid in br_seen:
            raise SchemaError(f"branches.csv row {line}: duplicate branch id {brid}")
        br_seen.add(brid)
        a = _parse(rpath, line, row, "from", int)
        b = _parse(rpath, line, row, "to", int)
        for end in (a, b):
            if end not in seen:
                raise SchemaError(f"branches.csv row {line}: unknown bus {end}")
        key = frozenset((a, b))
        if key in pairs:
            raise TopologyError(
                f"branches.csv row {line}: branch {brid} duplicates row {pairs[key]} and forms a cycle"
            )
        pairs[key] = line
        r = _parse(rpath, line, row, "r_ohm", float)
        x = _parse(rpath, line, row, "x_ohm", float)
        length = _parse(rpath, line, row, "length_km", float)
        lam = _parse(rpath, line, row, "failures_per_km_yr", float)
        if r < 0 or x < 0 or length <= 0 or lam < 0:
            raise SchemaError(f"branches.csv row {line}: need r, x, rate >= 0 and length > 0")
        sect = _parse(rpath, line, row, "has_sectionalizer", _flag)
        branches.append(Branch(brid, a, b, r / z_base, x / z_base, length, lam, sect))

    return NetworkModel(tuple(buses), tuple(branches), sub, v_base, s_base, meta["name"])


def bundled_dataset(name="pge69"):
    """Path of a dataset shipped with the package."""
    return Path(str(resources.files("mgdispatch") / "data" / name))


@dataclass(frozen=True)
class PowerFlowSolution:
    """Sweep result.  Arrays may carry a leading batch axis."""

    v: np.ndarray  # per-bus magnitude, p.u.
    branch_p: np.ndarray  # sending-end kW
    branch_q: np.ndarray  # sending-end kVAr
    losses_kw: np.ndarray
    slack_p: np.ndarray  # kW drawn from the substation
    slack_q: np.ndarray
    converged: bool
    iterations: int
    net: NetworkModel = field(repr=False)
    load_p: np.ndarray = field(repr=False, default=None)  # net demand per bus, kW
    load_q: np.ndarray = field(repr=False, default=None)

    @classmethod
    def flat(cls, net: NetworkModel, p_inj=None, q_inj=None):
        """Flat 1.0 p.u. start with zero branch flows (not a solution)."""
        n, m = net.n_bus, len(net.branches)
        p = np.zeros(n) if p_inj is None else np.asarray(p_inj, float)
        q = np.zeros(n) if q_inj is None else np.asarray(q_inj, float)
        return cls(np.ones(n), np.zeros(m), np.zeros(m), np.array(0.0), np.array(0.0),
                   np.array(0.0), False, 0, net, -p, -q)


def _sweep_matrices(net):
    cached = net._topo.get("sweep")
    if cached is None:
        T = net.downstream.astype(float)
        z = np.array([br.r + 1j * br.x for br in net.branches])
        dlf = T.T @ (z[:, None] * T)  # (n, n); substation row/column are zero
        cached = net._topo["sweep"] = (T, dlf)
    return cached


def run_power_flow(net: NetworkModel, p_inj, q_inj=None, tol=TOLERANCE, max_iter=MAX_ITER):
    """Backward-forward sweep with the substation fixed at 1.0 p.u.

    ``p_inj``/``q_inj`` are net injections (generation minus load) in kW and
    kVAr, shaped ``(n_bus,)`` or ``(..., n_bus)``.  Divergence is reported
    through ``converged=False``, not raised.
    """
    p_inj = np.asarray(p_inj, dtype=float)
    q_inj = np.zeros_like(p_inj) if q_inj is None else np.asarray(q_inj, dtype=float)
    if p_inj.shape[-1] != net.n_bus or q_inj.shape != p_inj.shape:
        raise ValueError("injection arrays must end in n_bus")
    batch = p_inj.shape[:-1]
    s_load = -(p_inj + 1j * q_inj).reshape(-1, net.n_bus) / net.s_base  # demand, p.u.

    T, dlf = _sweep_matrices(net)

    v = np.ones_like(s_load)
    converged = False
    it = 0
    with np.errstate(all="ignore"):
        for it in range(1, max_iter + 1):
            i_load = np.conj(s_load / v)
            v_new = 1.0 - i_load @ dlf.T
            step = np.max(np.abs(v_new - v)) if v.size else 0.0
            v = v_new
            if not np.isfinite(step):
                break
            if step < tol:
                converged = True
                break
        i_load = np.conj(s_load / v)
        i_branch = i_load @ T.T
        v_send = v[:, net.parent_index]
        s_send = v_send * np.conj(i_branch)
        r = np.array([br.r for br in net.branches])
        loss = (np.abs(i_branch) ** 2) @ r
    root = net._topo["root"]
    root_branches = net.parent_index == root
    s_slack = s_send[:, root_branches].sum(axis=1) + s_load[:, root]

    sb = net.s_base
    shape = lambda a, tail: a.reshape(batch + tail)
    return PowerFlowSolution(
        v=shape(np.abs(v), (net.n_bus,)),
        branch_p=shape(s_send.real * sb, (len(net.branches),)),
        branch_q=shape(s_send.imag * sb, (len(net.branches),)),
        losses_kw=shape(loss * sb, ()),
        slack_p=shape(s_slack.real * sb, ()),
        slack_q=shape(s_slack.imag * sb, ()),
        converged=bool(converged),
        iterations=it,
        net=net,
        load_p=shape(-p_inj.reshape(-1, net.n_bus), (net.n_bus,)),
        load_q=shape(-q_inj.reshape(-1, net.n_bus), (net.n_bus,)),
    )


def losses_cost(sol: PowerFlowSolution, price, dt=1.0):
    """Branch-loss cost: sum of (P² + Q²)·R / V² at the sending end, times price and dt.

    ``price`` is per kWh; the result keeps any batch axis of ``sol``.
    """
    if not sol.converged:
        raise InvalidStateError("losses are undefined for a non-converged power flow")
    net = sol.net
    r = np.array([br.r for br in net.branches])
    v_send = sol.v[..., net.parent_index]
    loss_kw = np.sum((sol.branch_p**2 + sol.branch_q**2) * r / v_send**2, axis=-1) / net.s_base
    return loss_kw * dt * price


def distflow_residual(net: NetworkModel, sol: PowerFlowSolution):
    """Largest per-unit violation of the branch real/reactive power recursions.

    For a branch from bus i to bus j:
        P_ij - r (P_ij² + Q_ij²) / V_i² - p_j - sum(P_jk) = 0
    and likewise for Q with x.
    """
    sb = net.s_base
    P = np.asarray(sol.branch_p) / sb
    Q = np.asarray(sol.branch_q) / sb
    V = np.asarray(sol.v)
    pd = np.asarray(sol.load_p) / sb
    qd = np.asarray(sol.load_q) / sb
    parent, child = net.parent_index, net.child_index
    r = np.array([br.r for br in net.branches])
    x = np.array([br.x for br in net.branches])
    # outflow[..., j] = sum of flows on branches leaving bus j
    out_p = np.zeros(V.shape)
    out_q = np.zeros(V.shape)
    np.add.at(np.moveaxis(out_p, -1, 0), parent, np.moveaxis(P, -1, 0))
    np.add.at(np.moveaxis(out_q, -1, 0), parent, np.moveaxis(Q, -1, 0))
    s2 = (P**2 + Q**2) / V[..., parent] ** 2
    res_p = P - r * s2 - pd[..., child] - out_p[..., child]
    res_q = Q - x * s2 - qd[..., child] - out_q[..., child]
    if res_p.size == 0:
        return 0.0
    return float(max(np.max(np.abs(res_p)), np.max(np.abs(res_q))))


def voltage_profile(sol: PowerFlowSolution):
    """Voltage magnitudes (p.u.) in ascending bus-id order."""
    if not sol.converged:
        raise InvalidStateError("voltage profile of a non-converged power flow")
    return np.asarray(sol.v, dtype=float).tolist()
