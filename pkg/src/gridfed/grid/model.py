"""Domain types for electrical networks.

Two network classes share one model: balanced positive-sequence transmission
grids (single phase ``a`` by convention) and unbalanced radial distribution
feeders (any subset of phases ``abc``). Impedances are per-unit on the model's
own base; load and device ratings are kW / kVAR / kVA; generator setpoints are
MW / MVAr on transmission models.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

PHASES = "abc"

BUS_KINDS = ("slack", "pq", "pv")
LOAD_KINDS = ("constant_power", "constant_current", "constant_impedance")


class ModelError(Exception):
    """A network violates a structural invariant."""


class GridFileError(Exception):
    """A network or scenario document is malformed.

    Carries the 1-based line number when the problem is tied to a line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def canonical_phases(phases: str) -> str:
    """Normalize a phase string to canonical 'abc' order, validating it."""
    seen = [p for p in PHASES if p in phases]
    if not seen or len(phases) != len(seen) or set(phases) - set(PHASES):
        raise ModelError(f"invalid phase set {phases!r}")
    return "".join(seen)


@dataclass(frozen=True)
class Bus:
    id: str
    phases: str
    base_kv: float
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "phases", canonical_phases(self.phases))
        if self.base_kv <= 0:
            raise ModelError(f"bus {self.id}: base_kv must be > 0")
        if self.kind not in BUS_KINDS:
            raise ModelError(f"bus {self.id}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Branch:
    from_bus: str
    to_bus: str
    z_matrix: tuple  # tuple of tuples of complex, per shared phase, p.u.

    def __post_init__(self):
        z = tuple(tuple(complex(v) for v in row) for row in self.z_matrix)
        object.__setattr__(self, "z_matrix", z)
        n = len(z)
        if n == 0 or n > 3 or any(len(row) != n for row in z):
            raise ModelError(
                f"branch {self.from_bus}-{self.to_bus}: z_matrix must be square, 1x1 to 3x3"
            )
        for i in range(n):
            if z[i][i] == 0:
                raise ModelError(
                    f"branch {self.from_bus}-{self.to_bus}: zero diagonal impedance"
                )
            for j in range(n):
                if z[i][j] != z[j][i]:
                    raise ModelError(
                        f"branch {self.from_bus}-{self.to_bus}: z_matrix not symmetric"
                    )


@dataclass(frozen=True)
class ZipLoad:
    bus: str
    phases: str
    kind: str
    rated_p: float  # kW at nominal voltage, whole connection
    rated_q: float  # kVAR at nominal voltage

    def __post_init__(self):
        object.__setattr__(self, "phases", canonical_phases(self.phases))
        if self.kind not in LOAD_KINDS:
            raise ModelError(f"load at {self.bus}: unknown kind {self.kind!r}")
        if self.rated_p < 0:
            raise ModelError(f"load at {self.bus}: rated_p must be >= 0")


@dataclass(frozen=True)
class SolarFarm:
    id: str
    bus: str
    s_rating: float  # kVA
    profile_id: str

    def __post_init__(self):
        if self.s_rating <= 0:
            raise ModelError(f"solar {self.id}: s_rating must be > 0")


@dataclass(frozen=True)
class Shunt:
    """Switchable reactive compensation: n_blocks identical kVAR blocks."""

    id: str
    bus: str
    phases: str
    kvar_per_block: float
    n_blocks: int
    n_on: int

    def __post_init__(self):
        object.__setattr__(self, "phases", canonical_phases(self.phases))
        if self.n_blocks < 1 or not 0 <= self.n_on <= self.n_blocks:
            raise ModelError(f"shunt {self.id}: invalid block counts")


@dataclass(frozen=True)
class Generator:
    bus: str
    p_set: float | None  # MW; None on the slack bus
    v_set: float  # p.u.
    q_min: float  # MVAr
    q_max: float  # MVAr

    def __post_init__(self):
        if self.q_min > self.q_max:
            raise ModelError(f"generator at {self.bus}: q_min > q_max")


@dataclass
class GridModel:
    buses: list[Bus] = field(default_factory=list)
    branches: list[Branch] = field(default_factory=list)
    loads: list[ZipLoad] = field(default_factory=list)
    shunts: list[Shunt] = field(default_factory=list)
    generators: list[Generator] = field(default_factory=list)
    solar: list[SolarFarm] = field(default_factory=list)
    base_mva: float = 1.0

    def bus(self, bus_id: str) -> Bus:
        b = self._index().get(bus_id)
        if b is None:
            raise ModelError(f"unknown bus {bus_id!r}")
        return b

    def _index(self) -> dict[str, Bus]:
        return {b.id: b for b in self.buses}

    @property
    def slack_bus(self) -> Bus:
        slacks = [b for b in self.buses if b.kind == "slack"]
        if len(slacks) != 1:
            raise ModelError(f"expected exactly one slack bus, found {len(slacks)}")
        return slacks[0]

    def shared_phases(self, branch: Branch) -> str:
        f = self.bus(branch.from_bus)
        t = self.bus(branch.to_bus)
        return "".join(p for p in PHASES if p in f.phases and p in t.phases)

    def validate(self, require_radial: bool = False) -> None:
        """Check all cross-reference and structural invariants.

        Raises ModelError on the first violation found.
        """
        if self.base_mva <= 0:
            raise ModelError("base_mva must be > 0")
        index = self._index()
        if len(index) != len(self.buses):
            dup = [b.id for b in self.buses if sum(x.id == b.id for x in self.buses) > 1]
            raise ModelError(f"duplicate bus id {dup[0]!r}")
        slacks = [b for b in self.buses if b.kind == "slack"]
        if len(slacks) > 1:
            raise ModelError("multiple slack buses")
        if not slacks:
            raise ModelError("no slack bus")
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in index:
                    raise ModelError(f"branch references undeclared bus {end!r}")
            shared = self.shared_phases(br)
            if not shared:
                raise ModelError(
                    f"branch {br.from_bus}-{br.to_bus}: endpoints share no phase"
                )
            if len(br.z_matrix) != len(shared):
                raise ModelError(
                    f"branch {br.from_bus}-{br.to_bus}: z_matrix is "
                    f"{len(br.z_matrix)}x{len(br.z_matrix)} but shared phases are {shared!r}"
                )
        for ld in self.loads:
            if ld.bus not in index:
                raise ModelError(f"load references undeclared bus {ld.bus!r}")
            if set(ld.phases) - set(index[ld.bus].phases):
                raise ModelError(
                    f"load at {ld.bus}: connection {ld.phases!r} not present on bus"
                )
        for sh in self.shunts:
            if sh.bus not in index:
                raise ModelError(f"shunt {sh.id} references undeclared bus {sh.bus!r}")
            if set(sh.phases) - set(index[sh.bus].phases):
                raise ModelError(f"shunt {sh.id}: phases not present on bus {sh.bus}")
        for gen in self.generators:
            if gen.bus not in index:
                raise ModelError(f"generator references undeclared bus {gen.bus!r}")
            if index[gen.bus].kind == "slack" and gen.p_set is not None:
                raise ModelError(f"slack generator at {gen.bus} must not set p_set")
        for pv in self.solar:
            if pv.bus not in index:
                raise ModelError(f"solar {pv.id} references undeclared bus {pv.bus!r}")
            if index[pv.bus].phases != PHASES:
                raise ModelError(f"solar {pv.id}: bus {pv.bus} is not three-phase")
        if require_radial:
            self.check_radial()

    def check_radial(self) -> None:
        """Require exactly one path from the slack bus to every other bus."""
        root = self.slack_bus.id
        adjacency: dict[str, list[str]] = {b.id: [] for b in self.buses}
        for br in self.branches:
            adjacency[br.from_bus].append(br.to_bus)
            adjacency[br.to_bus].append(br.from_bus)
        if len(self.branches) != len(self.buses) - 1:
            raise ModelError(
                f"non-radial network: {len(self.branches)} branches for "
                f"{len(self.buses)} buses"
            )
        seen = {root}
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for nxt in adjacency[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        if len(seen) != len(self.buses):
            missing = sorted(set(b.id for b in self.buses) - seen)
            raise ModelError(f"non-radial network: bus {missing[0]} unreachable")
