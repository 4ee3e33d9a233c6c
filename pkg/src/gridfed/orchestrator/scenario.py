"""Scenario files: what to simulate, over which links, with which faults.

A scenario document uses the same lexical rules as network files
(sections, comma-separated records, ``#`` comments).  Sections:

  [scenario]     key, value rows: duration_hours, seed, mode (sim|realtime),
                 boundary_bus
  [federates]    one record per federate:
                   transmission, <name>, <grid-path>[, key=value...]
                   feeder, <name>, <grid-path>[, key=value...]
                   inverter, <name>[, key=value...]
                 transmission/feeder keys: base_mva, load_profile,
                 solar_profile, vvc_farm, dr_p_max, dr_p_min
                 inverter keys: feeder, bus, phase, s_kva, k, settle_tau,
                 profile
  [profiles]     <id>, <csv-path>
  [links]        <sender>, <receiver>, <frame-tag>, <latency-spec>, <drop>
  [controllers]  key, value rows overriding ControllerSettings defaults
  [faults]       sever, <sender>, <receiver>, <t0_s>, <t1_s>

Paths are relative to the scenario file's directory.  The distribution
HIL federate is implicit and always named ``hil_dist``; the controller
federates are ``ctl_trans`` and ``ctl_dist``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from gridfed.federation.frames import FRAME_TYPES
from gridfed.federation.links import LatencySpec, parse_latency
from gridfed.grid.model import GridFileError, GridModel, ModelError
from gridfed.grid.netfile import parse_grid_file
from gridfed.grid.profiles import Profile, parse_profile_csv

DIST_HIL = "hil_dist"
CTL_TRANS = "ctl_trans"
CTL_DIST = "ctl_dist"

_SECTIONS = ("scenario", "federates", "profiles", "links", "controllers", "faults")


class ScenarioError(Exception):
    """Raised for malformed or inconsistent scenario documents."""


@dataclass(frozen=True)
class TransmissionSpec:
    name: str
    grid_path: str
    base_mva: float = 100.0
    load_profile: str | None = None


@dataclass(frozen=True)
class FeederSpec:
    name: str
    grid_path: str
    base_mva: float = 1.0
    load_profile: str | None = None
    solar_profile: str | None = None
    vvc_farm: str | None = None
    dr_p_max: float = 0.0
    dr_p_min: float = 0.0


@dataclass(frozen=True)
class InverterSpec:
    name: str
    feeder: str
    bus: str
    phase: str
    s_kva: float
    k: float = 1.1
    settle_tau: float = 10.0
    profile: str | None = None


@dataclass(frozen=True)
class LinkSpec:
    sender: str
    receiver: str
    frame_tag: str
    latency: LatencySpec
    drop_prob: float


@dataclass(frozen=True)
class SeverSpec:
    sender: str
    receiver: str
    t0_s: float
    t1_s: float


@dataclass(frozen=True)
class ControllerSettings:
    interval_s: float = 300.0
    boundary_period_s: float = 0.1
    response_period_s: float = 60.0
    dist_compute_s: float = 10.0
    trans_compute_s: float = 10.0
    v_target: float = 1.0
    v_lower: float = 0.95
    v_upper: float = 1.05
    gen_v_step: float = 0.002
    pv_k: float = 1.1
    trans_deadline_s: float = 150.0
    dist_deadline_s: float = 240.0
    hold_max_intervals: int = 2
    vsm_delta_pu: float = 0.01


@dataclass
class ScenarioSpec:
    duration_hours: float
    seed: int
    mode: str
    boundary_bus: str
    transmission: TransmissionSpec
    feeders: list[FeederSpec]
    inverters: list[InverterSpec]
    profile_paths: dict[str, str]
    links: list[LinkSpec]
    severs: list[SeverSpec]
    controls: ControllerSettings
    base_dir: Path

    @property
    def duration_s(self) -> float:
        return self.duration_hours * 3600.0

    def federate_names(self) -> set[str]:
        names = {self.transmission.name, DIST_HIL, CTL_TRANS, CTL_DIST}
        names.update(inv.name for inv in self.inverters)
        return names


@dataclass
class LoadedScenario:
    """A ScenarioSpec with every referenced file parsed and cross-checked."""

    spec: ScenarioSpec
    trans_model: GridModel
    feeder_models: dict[str, GridModel]
    profiles: dict[str, Profile]


def _records(text: str):
    """Yield (lineno, section, fields) for each record line."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section [{section}]")
            continue
        if section is None:
            raise ScenarioError(f"line {lineno}: record before any section header")
        fields = [f.strip() for f in line.split(",")]
        yield lineno, section, fields


def _split_attrs(lineno: str | int, fields: list[str], n_fixed: int, what: str):
    """Fixed leading fields plus trailing key=value attributes."""
    if len(fields) < n_fixed:
        raise ScenarioError(f"line {lineno}: {what} needs at least {n_fixed} fields")
    fixed = fields[:n_fixed]
    attrs = {}
    for tok in fields[n_fixed:]:
        key, eq, value = tok.partition("=")
        if not eq or not key:
            raise ScenarioError(f"line {lineno}: expected key=value, got {tok!r}")
        if key in attrs:
            raise ScenarioError(f"line {lineno}: duplicate attribute {key!r}")
        attrs[key] = value
    return fixed, attrs


def _number(lineno, name, raw):
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"line {lineno}: {name} is not a number: {raw!r}") from None


def parse_scenario(text: str, base_dir: Path | str = ".") -> ScenarioSpec:
    """Parse a scenario document; referenced files are not opened here."""
    base_dir = Path(base_dir)
    scenario_kv: dict[str, str] = {}
    transmission: TransmissionSpec | None = None
    feeders: list[FeederSpec] = []
    inverters: list[InverterSpec] = []
    profile_paths: dict[str, str] = {}
    links: list[LinkSpec] = []
    severs: list[SeverSpec] = []
    control_kv: dict[str, tuple[int, str]] = {}

    for lineno, section, fields in _records(text):
        if section == "scenario":
            if len(fields) != 2:
                raise ScenarioError(f"line {lineno}: [scenario] rows are key, value")
            key, value = fields
            if key in scenario_kv:
                raise ScenarioError(f"line {lineno}: duplicate [scenario] key {key!r}")
            scenario_kv[key] = value
        elif section == "federates":
            kind = fields[0] if fields else ""
            if kind == "transmission":
                fixed, attrs = _split_attrs(lineno, fields, 3, "transmission record")
                if transmission is not None:
                    raise ScenarioError(f"line {lineno}: more than one transmission federate")
                transmission = TransmissionSpec(
                    name=fixed[1],
                    grid_path=fixed[2],
                    base_mva=_number(lineno, "base_mva", attrs.pop("base_mva", "100")),
                    load_profile=attrs.pop("load_profile", None),
                )
                _reject_extras(lineno, attrs)
            elif kind == "feeder":
                fixed, attrs = _split_attrs(lineno, fields, 3, "feeder record")
                feeders.append(FeederSpec(
                    name=fixed[1],
                    grid_path=fixed[2],
                    base_mva=_number(lineno, "base_mva", attrs.pop("base_mva", "1")),
                    load_profile=attrs.pop("load_profile", None),
                    solar_profile=attrs.pop("solar_profile", None),
                    vvc_farm=attrs.pop("vvc_farm", None),
                    dr_p_max=_number(lineno, "dr_p_max", attrs.pop("dr_p_max", "0")),
                    dr_p_min=_number(lineno, "dr_p_min", attrs.pop("dr_p_min", "0")),
                ))
                _reject_extras(lineno, attrs)
            elif kind == "inverter":
                fixed, attrs = _split_attrs(lineno, fields, 2, "inverter record")
                for req in ("feeder", "bus", "phase", "s_kva"):
                    if req not in attrs:
                        raise ScenarioError(f"line {lineno}: inverter needs {req}=")
                phase = attrs.pop("phase")
                if phase not in ("a", "b", "c"):
                    raise ScenarioError(f"line {lineno}: inverter phase must be a, b, or c")
                inverters.append(InverterSpec(
                    name=fixed[1],
                    feeder=attrs.pop("feeder"),
                    bus=attrs.pop("bus"),
                    phase=phase,
                    s_kva=_number(lineno, "s_kva", attrs.pop("s_kva")),
                    k=_number(lineno, "k", attrs.pop("k", "1.1")),
                    settle_tau=_number(lineno, "settle_tau", attrs.pop("settle_tau", "10")),
                    profile=attrs.pop("profile", None),
                ))
                _reject_extras(lineno, attrs)
            else:
                raise ScenarioError(
                    f"line {lineno}: unknown federate kind {kind!r} "
                    "(expected transmission, feeder, or inverter)"
                )
        elif section == "profiles":
            if len(fields) != 2:
                raise ScenarioError(f"line {lineno}: [profiles] rows are id, path")
            pid, path = fields
            if pid in profile_paths:
                raise ScenarioError(f"line {lineno}: duplicate profile id {pid!r}")
            profile_paths[pid] = path
        elif section == "links":
            if len(fields) != 5:
                raise ScenarioError(
                    f"line {lineno}: [links] rows are sender, receiver, frame, latency, drop"
                )
            sender, receiver, tag, lat_text, drop_text = fields
            if tag not in FRAME_TYPES:
                raise ScenarioError(f"line {lineno}: unknown frame tag {tag!r}")
            try:
                latency = parse_latency(lat_text)
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: {exc}") from None
            drop = _number(lineno, "drop", drop_text)
            if not 0.0 <= drop < 1.0:
                raise ScenarioError(f"line {lineno}: drop must be in [0, 1)")
            links.append(LinkSpec(sender, receiver, tag, latency, drop))
        elif section == "controllers":
            if len(fields) != 2:
                raise ScenarioError(f"line {lineno}: [controllers] rows are key, value")
            key, value = fields
            if key in control_kv:
                raise ScenarioError(f"line {lineno}: duplicate controller key {key!r}")
            control_kv[key] = (lineno, value)
        elif section == "faults":
            if len(fields) != 5 or fields[0] != "sever":
                raise ScenarioError(
                    f"line {lineno}: [faults] rows are sever, sender, receiver, t0_s, t1_s"
                )
            t0 = _number(lineno, "t0_s", fields[3])
            t1 = _number(lineno, "t1_s", fields[4])
            if t1 <= t0:
                raise ScenarioError(f"line {lineno}: sever window [{t0}, {t1}) is empty")
            severs.append(SeverSpec(fields[1], fields[2], t0, t1))

    for req in ("duration_hours", "boundary_bus"):
        if req not in scenario_kv:
            raise ScenarioError(f"[scenario] section must set {req}")
    duration = _number("[scenario]", "duration_hours", scenario_kv["duration_hours"])
    if duration < 0.0:
        raise ScenarioError("duration_hours must be non-negative")
    try:
        seed = int(scenario_kv.get("seed", "0"))
    except ValueError:
        raise ScenarioError("seed must be an integer") from None
    mode = scenario_kv.get("mode", "sim")
    if mode not in ("sim", "realtime"):
        raise ScenarioError(f"mode must be sim or realtime, got {mode!r}")
    if transmission is None:
        raise ScenarioError("scenario needs a transmission federate")
    if not feeders:
        raise ScenarioError("scenario needs at least one feeder federate")

    controls = ControllerSettings()
    for key, (lineno, value) in control_kv.items():
        if not hasattr(controls, key):
            raise ScenarioError(f"line {lineno}: unknown controller key {key!r}")
        current = getattr(controls, key)
        if isinstance(current, int) and not isinstance(current, bool):
            try:
                controls = replace(controls, **{key: int(value)})
            except ValueError:
                raise ScenarioError(f"line {lineno}: {key} must be an integer") from None
        else:
            controls = replace(controls, **{key: _number(lineno, key, value)})

    spec = ScenarioSpec(
        duration_hours=duration,
        seed=seed,
        mode=mode,
        boundary_bus=scenario_kv["boundary_bus"],
        transmission=transmission,
        feeders=feeders,
        inverters=inverters,
        profile_paths=profile_paths,
        links=links,
        severs=severs,
        controls=controls,
        base_dir=base_dir,
    )
    _check_spec(spec)
    return spec


def _reject_extras(lineno, attrs):
    if attrs:
        key = sorted(attrs)[0]
        raise ScenarioError(f"line {lineno}: unknown attribute {key!r}")


def _check_spec(spec: ScenarioSpec) -> None:
    names = [spec.transmission.name] + [f.name for f in spec.feeders] + [
        inv.name for inv in spec.inverters
    ]
    reserved = {DIST_HIL, CTL_TRANS, CTL_DIST}
    seen = set()
    for name in names:
        if name in reserved:
            raise ScenarioError(f"federate name {name!r} is reserved")
        if name in seen:
            raise ScenarioError(f"duplicate federate name {name!r}")
        seen.add(name)

    feeder_names = {f.name for f in spec.feeders}
    for inv in spec.inverters:
        if inv.feeder not in feeder_names:
            raise ScenarioError(f"inverter {inv.name}: unknown feeder {inv.feeder!r}")
        if inv.s_kva <= 0.0:
            raise ScenarioError(f"inverter {inv.name}: s_kva must be positive")
        if inv.k < 1.0:
            raise ScenarioError(f"inverter {inv.name}: k must be at least 1")
        if inv.settle_tau < 0.0:
            raise ScenarioError(f"inverter {inv.name}: settle_tau must be non-negative")

    known = spec.federate_names()
    for link in spec.links:
        for end in (link.sender, link.receiver):
            if end not in known:
                raise ScenarioError(
                    f"link {link.sender}>{link.receiver}:{link.frame_tag}: "
                    f"unknown federate {end!r}"
                )
    for sev in spec.severs:
        for end in (sev.sender, sev.receiver):
            if end not in known:
                raise ScenarioError(f"sever fault references unknown federate {end!r}")
        if sev.t1_s > spec.duration_s and spec.duration_s > 0.0:
            raise ScenarioError(
                f"sever window [{sev.t0_s}, {sev.t1_s}) extends past the "
                f"{spec.duration_s:.0f} s duration"
            )

    for fed in spec.feeders:
        for pid in (fed.load_profile, fed.solar_profile):
            if pid is not None and pid not in spec.profile_paths:
                raise ScenarioError(f"feeder {fed.name}: unknown profile id {pid!r}")
        if fed.dr_p_min > fed.dr_p_max:
            raise ScenarioError(f"feeder {fed.name}: dr_p_min exceeds dr_p_max")
    if spec.transmission.load_profile is not None \
            and spec.transmission.load_profile not in spec.profile_paths:
        raise ScenarioError(
            f"transmission: unknown profile id {spec.transmission.load_profile!r}"
        )
    for inv in spec.inverters:
        if inv.profile is not None and inv.profile not in spec.profile_paths:
            raise ScenarioError(f"inverter {inv.name}: unknown profile id {inv.profile!r}")


def required_channels(spec: ScenarioSpec) -> list[tuple[str, str, str]]:
    """The directed (sender, receiver, frame) channels this scenario uses."""
    trans = spec.transmission.name
    chans = [
        (trans, DIST_HIL, "TD_BOUNDARY"),
        (DIST_HIL, trans, "DT_BOUNDARY"),
        (CTL_DIST, CTL_TRANS, "DT_CONSTRAINTS"),
        (CTL_TRANS, CTL_DIST, "TD_REQUEST"),
    ]
    for inv in spec.inverters:
        chans.append((CTL_DIST, inv.name, "DPV_COMMAND"))
        chans.append((inv.name, CTL_DIST, "PVD_RESPONSE"))
    return chans


def load_scenario(path: str | Path) -> LoadedScenario:
    """Parse a scenario file and everything it references, cross-checking ids."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    spec = parse_scenario(text, base_dir=path.parent)

    def read(rel: str, what: str) -> str:
        p = spec.base_dir / rel
        try:
            return p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"{what}: cannot read {p}: {exc}") from None

    try:
        trans_model = parse_grid_file(
            read(spec.transmission.grid_path, "transmission grid"),
            base_mva=spec.transmission.base_mva,
        )
    except (GridFileError, ModelError) as exc:
        raise ScenarioError(f"transmission grid {spec.transmission.grid_path}: {exc}") from None
    if spec.boundary_bus not in {b.id for b in trans_model.buses}:
        raise ScenarioError(
            f"boundary bus {spec.boundary_bus!r} not in the transmission model"
        )

    feeder_models: dict[str, GridModel] = {}
    for fed in spec.feeders:
        try:
            model = parse_grid_file(
                read(fed.grid_path, f"feeder {fed.name} grid"),
                base_mva=fed.base_mva,
                require_radial=True,
            )
        except (GridFileError, ModelError) as exc:
            raise ScenarioError(f"feeder {fed.name} grid {fed.grid_path}: {exc}") from None
        if fed.vvc_farm is not None:
            farm_ids = {farm.id for farm in model.solar}
            if fed.vvc_farm not in farm_ids:
                raise ScenarioError(
                    f"feeder {fed.name}: vvc_farm {fed.vvc_farm!r} is not a solar farm id"
                )
        feeder_models[fed.name] = model

    for inv in spec.inverters:
        model = feeder_models[inv.feeder]
        bus = next((b for b in model.buses if b.id == inv.bus), None)
        if bus is None:
            raise ScenarioError(f"inverter {inv.name}: bus {inv.bus!r} not in feeder {inv.feeder}")
        if inv.phase not in bus.phases:
            raise ScenarioError(
                f"inverter {inv.name}: phase {inv.phase} absent at bus {inv.bus}"
            )

    profiles: dict[str, Profile] = {}
    for pid, rel in spec.profile_paths.items():
        try:
            profiles[pid] = parse_profile_csv(read(rel, f"profile {pid}"))
        except (GridFileError, ValueError) as exc:
            raise ScenarioError(f"profile {pid} ({rel}): {exc}") from None

    have = {(l.sender, l.receiver, l.frame_tag) for l in spec.links}
    for chan in required_channels(spec):
        if chan not in have:
            raise ScenarioError(
                f"missing [links] row for channel {chan[0]}>{chan[1]}:{chan[2]}"
            )

    return LoadedScenario(
        spec=spec,
        trans_model=trans_model,
        feeder_models=feeder_models,
        profiles=profiles,
    )
