"""Plain-text network file format.

UTF-8, line oriented. Sections are introduced by ``[buses]``, ``[branches]``,
``[loads]``, ``[shunts]``, ``[generators]``, ``[solar]`` headers; one record
per line, comma-separated fields in the fixed order documented below; ``#``
begins a comment; decimal numbers only.

Record layouts::

    [buses]       id, phases, base_kv, kind
    [branches]    from, to, r/x pairs        (see below)
    [loads]       bus, phases, kind, p_kw, q_kvar
    [shunts]      id, bus, phases, kvar_per_block, n_blocks, n_on
    [generators]  bus, p_set_mw, v_set_pu, q_min_mvar, q_max_mvar
    [solar]       id, bus, s_rating_kva, profile_id

A branch's phase set is the intersection of its endpoint phase sets; the
impedance fields depend on its size n:

    n=1:  r, x
    n=2:  r11, x11, r22, x22, r12, x12
    n=3:  r11, x11, r22, x22, r33, x33, r12, x12, r13, x13, r23, x23

where indices follow the canonical order of the shared phases. A generator on
the slack bus uses ``-`` for p_set_mw.
"""

from __future__ import annotations

from gridfed.grid.model import (
    Branch,
    Bus,
    Generator,
    GridFileError,
    GridModel,
    ModelError,
    Shunt,
    SolarFarm,
    ZipLoad,
)

SECTIONS = ("buses", "branches", "loads", "shunts", "generators", "solar")

# field counts for branch impedance blocks, by phase count
_Z_FIELDS = {1: 2, 2: 6, 3: 12}


def _num(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise GridFileError(f"expected a decimal number, got {token!r}", line) from None


def _int(token: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GridFileError(f"expected an integer, got {token!r}", line) from None


def _z_matrix(fields: list[str], n: int, line: int) -> tuple:
    vals = [_num(f, line) for f in fields]
    z = [[0j] * n for _ in range(n)]
    pairs = [(i, i) for i in range(n)]
    pairs += [(i, j) for i in range(n) for j in range(i + 1, n)]
    for (i, j), idx in zip(pairs, range(0, len(vals), 2)):
        zij = complex(vals[idx], vals[idx + 1])
        z[i][j] = zij
        z[j][i] = zij
    return tuple(tuple(row) for row in z)


def parse_grid_file(
    text: str, base_mva: float = 1.0, require_radial: bool = False
) -> GridModel:
    """Parse a network document into a validated GridModel.

    Rejects on the first violation: syntax errors carry the line number;
    semantic problems (dangling references, multiple slacks, non-radial
    topology under require_radial) raise ModelError.
    """
    model = GridModel(base_mva=base_mva)
    bus_phases: dict[str, str] = {}
    section = None
    # branches are checked against declared buses as they are read, so the
    # z-field count is known immediately
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise GridFileError("unterminated section header", line_no)
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise GridFileError(f"unknown section {name!r}", line_no)
            section = name
            continue
        if section is None:
            raise GridFileError("record before any section header", line_no)
        fields = [f.strip() for f in line.split(",")]
        try:
            if section == "buses":
                _expect(fields, 4, line_no)
                bus = Bus(fields[0], fields[1], _num(fields[2], line_no), fields[3])
                model.buses.append(bus)
                bus_phases[bus.id] = bus.phases
            elif section == "branches":
                if len(fields) < 4:
                    raise GridFileError("branch needs from, to, r, x", line_no)
                f_bus, t_bus = fields[0], fields[1]
                for end in (f_bus, t_bus):
                    if end not in bus_phases:
                        raise ModelError(f"branch references undeclared bus {end!r}")
                shared = [p for p in "abc" if p in bus_phases[f_bus] and p in bus_phases[t_bus]]
                n = len(shared)
                if n == 0:
                    raise ModelError(f"branch {f_bus}-{t_bus}: endpoints share no phase")
                want = _Z_FIELDS[n]
                if len(fields) - 2 != want:
                    raise GridFileError(
                        f"branch on {n} phase(s) needs {want} impedance fields, "
                        f"got {len(fields) - 2}",
                        line_no,
                    )
                model.branches.append(
                    Branch(f_bus, t_bus, _z_matrix(fields[2:], n, line_no))
                )
            elif section == "loads":
                _expect(fields, 5, line_no)
                model.loads.append(
                    ZipLoad(
                        fields[0],
                        fields[1],
                        fields[2],
                        _num(fields[3], line_no),
                        _num(fields[4], line_no),
                    )
                )
            elif section == "shunts":
                _expect(fields, 6, line_no)
                model.shunts.append(
                    Shunt(
                        fields[0],
                        fields[1],
                        fields[2],
                        _num(fields[3], line_no),
                        _int(fields[4], line_no),
                        _int(fields[5], line_no),
                    )
                )
            elif section == "generators":
                _expect(fields, 5, line_no)
                p_set = None if fields[1] == "-" else _num(fields[1], line_no)
                model.generators.append(
                    Generator(
                        fields[0],
                        p_set,
                        _num(fields[2], line_no),
                        _num(fields[3], line_no),
                        _num(fields[4], line_no),
                    )
                )
            elif section == "solar":
                _expect(fields, 4, line_no)
                model.solar.append(
                    SolarFarm(fields[0], fields[1], _num(fields[2], line_no), fields[3])
                )
        except ModelError:
            raise
    model.validate(require_radial=require_radial)
    return model


def _expect(fields: list[str], count: int, line: int) -> None:
    if len(fields) != count:
        raise GridFileError(f"expected {count} fields, got {len(fields)}", line)


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_grid(model: GridModel) -> str:
    """Render a GridModel back to the text format.

    parse_grid_file(serialize_grid(m), m.base_mva) reproduces m exactly.
    """
    out: list[str] = []
    out.append("[buses]")
    for b in model.buses:
        out.append(f"{b.id}, {b.phases}, {_fmt(b.base_kv)}, {b.kind}")
    out.append("[branches]")
    for br in model.branches:
        n = len(br.z_matrix)
        pairs = [(i, i) for i in range(n)]
        pairs += [(i, j) for i in range(n) for j in range(i + 1, n)]
        nums: list[str] = []
        for i, j in pairs:
            z = br.z_matrix[i][j]
            nums.append(_fmt(z.real))
            nums.append(_fmt(z.imag))
        out.append(f"{br.from_bus}, {br.to_bus}, " + ", ".join(nums))
    out.append("[loads]")
    for ld in model.loads:
        out.append(
            f"{ld.bus}, {ld.phases}, {ld.kind}, {_fmt(ld.rated_p)}, {_fmt(ld.rated_q)}"
        )
    out.append("[shunts]")
    for sh in model.shunts:
        out.append(
            f"{sh.id}, {sh.bus}, {sh.phases}, {_fmt(sh.kvar_per_block)}, "
            f"{sh.n_blocks}, {sh.n_on}"
        )
    out.append("[generators]")
    for g in model.generators:
        p = "-" if g.p_set is None else _fmt(g.p_set)
        out.append(
            f"{g.bus}, {p}, {_fmt(g.v_set)}, {_fmt(g.q_min)}, {_fmt(g.q_max)}"
        )
    out.append("[solar]")
    for pv in model.solar:
        out.append(f"{pv.id}, {pv.bus}, {_fmt(pv.s_rating)}, {pv.profile_id}")
    return "\n".join(out) + "\n"
