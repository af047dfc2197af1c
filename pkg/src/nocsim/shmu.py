"""Fault management: classify checker events, decide severity, predict
locations about to fail for good, and keep precomputed mappings ready.

The manager is the single writer of the health map.  A permanent fault
is recorded there and triggers a remap when the broken element carries
current work.  Intermittent faults trigger precomputation: the top
predicted locations are each applied hypothetically, mapped, and the
result is stored in a fixed-capacity memory keyed by a 64-bit tag of
the health-map serialization (verified against the stored full
configuration on lookup, so hash collisions cannot deploy a wrong
mapping).  When the predicted fault later turns permanent the stored
assignment is fetched and only rescheduled, which is much cheaper than
running the mapping heuristic again.

Reconfiguration latency is accounted in virtual cycles:
  miss: t_rl = t_map_alg + t_par_ext + t_par_map
  hit:  t_rl = t_fetch + t_schd + t_par_ext + t_par_map
with t_map_alg = candidate evaluations x cycles_per_eval and
t_schd = task count x cycles_per_task.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

from .errors import EmptyHistory, LengthMismatch, RangeError, UnknownTarget
from .errors import InfeasibilityError
from .health import shm_tag
from .mapsched import CommModel, RouteProvider, SaParams, asap_schedule, run_heuristic
from .rng import derive_seed
from .routing import build_routing_graph, turn_slots

TRANSIENT = "transient"
INTERMITTENT = "intermittent"
PERMANENT = "permanent"

IGNORE = "ignore"
REMAP = "remap"
REMAP_AND_STORE = "remap_and_store"

STUCK_AT_0 = "SA0"
STUCK_AT_1 = "SA1"

CHECKER_UNITS = ("routing_logic", "arbiter", "fifo_control", "datapath_parity")
_CONTROL_UNITS = ("routing_logic", "arbiter", "fifo_control")


@dataclass(frozen=True)
class FaultEvent:
    """One checker report.  `retest_persistent` marks a location that
    keeps failing its retest, the immediate permanent signature."""

    time: int
    location: tuple
    stuck: str = STUCK_AT_0
    retest_persistent: bool = False


@dataclass(frozen=True)
class ClassifierConfig:
    window: int = 10000
    intermittent_threshold: int = 3
    permanent_threshold: int = 8

    def validate(self):
        if self.window <= 0:
            raise RangeError(f"window must be positive, got {self.window}")
        if not self.permanent_threshold >= self.intermittent_threshold >= 2:
            raise RangeError(
                "thresholds must satisfy permanent >= intermittent >= 2, got "
                f"{self.permanent_threshold} and {self.intermittent_threshold}"
            )
        return self


def classify(history, config):
    """Transient, intermittent, or permanent from one location's event
    history: permanent on a persistent retest failure or at least
    permanent_threshold events inside the trailing window, intermittent
    at intermittent_threshold, transient otherwise."""
    if not history:
        raise EmptyHistory("no events recorded for this location")
    config.validate()
    events = sorted(history, key=lambda e: e.time)
    if events[-1].retest_persistent:
        return PERMANENT
    latest = events[-1].time
    recent = sum(1 for e in events if e.time >= latest - config.window)
    if recent >= config.permanent_threshold:
        return PERMANENT
    if recent >= config.intermittent_threshold:
        return INTERMITTENT
    return TRANSIENT


def degrade_targets(location, ag):
    """Health-map elements broken when `location` fails permanently.

    PE, turn, and link locations map to themselves.  Checker units have
    no individual health slot: a broken control unit (routing logic,
    arbiter, fifo control) takes out every turn of its router; a broken
    datapath takes out every link touching the tile.
    """
    kind = location[0]
    if kind == "pe" and len(location) == 2:
        ag.check_tile(location[1])
        return [("pe", location[1])]
    if kind == "turn" and len(location) == 3:
        ag.check_tile(location[1])
        return [("turn", location[1], location[2])]
    if kind == "link" and len(location) == 2:
        return [("link", location[1])]
    if kind == "checker" and len(location) == 3:
        tile, unit = location[1], location[2]
        ag.check_tile(tile)
        if unit in _CONTROL_UNITS:
            return [("turn", tile, s) for s in range(len(turn_slots(ag.is_3d)))]
        if unit == "datapath_parity":
            return [
                ("link", l.id) for l in ag.links if l.src == tile or l.dst == tile
            ]
        raise UnknownTarget(f"unknown checker unit {unit!r}")
    raise UnknownTarget(f"not a fault location: {location!r}")


def location_used(location, cmm, ag):
    """Does the current deployment run anything over this location?"""
    if cmm.mapping is None:
        return False
    for fault in degrade_targets(location, ag):
        kind = fault[0]
        if kind == "pe":
            if fault[1] in cmm.mapping:
                return True
        elif kind == "link":
            if any(fault[1] in f.links for f in cmm.schedule.flows):
                return True
        else:
            tile, slot = fault[1], fault[2]
            a, b = turn_slots(ag.is_3d)[slot]
            for f in cmm.schedule.flows:
                ports = f.ports
                for i in range(len(ports) - 1):
                    if (
                        ports[i].tile == tile
                        and ports[i].direction == a
                        and ports[i].kind == "in"
                        and ports[i + 1].tile == tile
                        and ports[i + 1].direction == b
                        and ports[i + 1].kind == "out"
                    ):
                        return True
    return False


def severity(location, fault_class, cmm, ag):
    """Action for a classified fault: transients are ignored, a
    permanent fault forces a remap only when the element carries
    current work, an intermittent one triggers precomputation."""
    if fault_class == TRANSIENT:
        return IGNORE
    if fault_class == INTERMITTENT:
        return REMAP_AND_STORE
    if fault_class == PERMANENT:
        return REMAP if location_used(location, cmm, ag) else IGNORE
    raise RangeError(f"unknown fault class {fault_class!r}")


def fault_tag(shm):
    """64-bit tag of the health map's canonical serialization."""
    return shm_tag(shm)


def predict_mpfs(histories, k, config):
    """Most-probable-fault set: locations currently classified as
    intermittent, ranked by event rate in the trailing window
    (descending, ties by location id), truncated to k."""
    if k < 0:
        raise RangeError(f"prediction size must be >= 0, got {k}")
    ranked = []
    for location in sorted(histories):
        history = histories[location]
        if not history:
            continue
        if classify(history, config) != INTERMITTENT:
            continue
        latest = max(e.time for e in history)
        rate = sum(1 for e in history if e.time >= latest - config.window)
        ranked.append((-rate, location))
    ranked.sort()
    return [loc for _, loc in ranked[:k]]


# ---------------------------------------------------------------------------
# Precomputed-mapping memory


@dataclass(frozen=True)
class MpmEntry:
    tag: int
    full_config: str                        # serialized health map
    assignment: tuple                       # tile per task id


class MpmMemory:
    """Fixed-capacity store of precomputed mappings, evicting the least
    recently stored entry; one entry per tag, newer overwrites."""

    def __init__(self, capacity=16):
        if capacity < 1:
            raise RangeError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def store(self, entry):
        if entry.tag in self._entries:
            del self._entries[entry.tag]
        elif len(self._entries) >= self.capacity:
            self._entries.popitem(last=False)
        self._entries[entry.tag] = entry

    def lookup(self, tag, full_config):
        """The entry for `tag`, or None; a tag collision (stored
        configuration differs) is a miss, never a wrong hit."""
        entry = self._entries.get(tag)
        if entry is None or entry.full_config != full_config:
            return None
        return entry

    def dump(self):
        lines = [f"capacity {self.capacity} entries {len(self._entries)}"]
        for tag, entry in self._entries.items():
            assign = " ".join(str(t) for t in entry.assignment)
            broken = sum(
                1 for line in entry.full_config.splitlines() if line.endswith(" B")
            )
            lines.append(f"{tag:016x} broken={broken} assignment {assign}")
        return "\n".join(lines) + "\n"


@dataclass
class CurrentMappingMemory:
    """The deployed mapping and schedule plus the health tag they were
    computed under."""

    mapping: list = None
    schedule: object = None
    shm_tag: int = None


@dataclass(frozen=True)
class CostModel:
    """Virtual-cycle constants of the reconfiguration latency model."""

    cycles_per_eval: int = 10
    cycles_per_task: int = 1
    t_fetch: int = 2
    t_par_ext: int = 5
    par_map_per_move: int = 2
    detection_latency: int = 1


@dataclass(frozen=True)
class LatencyReport:
    hit: bool
    t_map_alg: int
    t_fetch: int
    t_schd: int
    t_par_ext: int
    t_par_map: int
    t_rl: int


def extract_partial_mapping(old, new):
    """Assignments that changed, as sorted (task, new tile) pairs."""
    if len(old) != len(new):
        raise LengthMismatch(
            f"mappings differ in length: {len(old)} vs {len(new)}"
        )
    return tuple((t, new[t]) for t in range(len(new)) if old[t] != new[t])


@dataclass
class Msu:
    """Mapping/scheduling context: the application, platform policy and
    heuristic configuration the fault manager calls into."""

    tg: object
    turn_model: object
    ctg: object = None
    regions: object = None
    heuristic: str = "greedy"
    cost: str = "schedule_length"
    comm: CommModel = field(default_factory=CommModel)
    cost_model: CostModel = field(default_factory=CostModel)
    iterations: int = 10
    sa_params: SaParams = field(default_factory=SaParams)
    initial_policy: str = "first_fit"
    seed: int = 0

    def build_rg(self, shm):
        return build_routing_graph(shm.ag, self.turn_model, shm, self.regions)

    def routes_for(self, rg):
        return RouteProvider(rg, seed=derive_seed(self.seed, "routing"))

    def compute(self, shm, rg=None):
        """Run the configured heuristic for the given health state.

        The heuristic sub-stream is derived from the health tag, so the
        same fault configuration always yields the same mapping no
        matter when it is computed (precomputation or live)."""
        rg = rg or self.build_rg(shm)
        return run_heuristic(
            self.heuristic,
            self.tg,
            shm,
            rg,
            cost=self.cost,
            ctg=self.ctg,
            comm=self.comm,
            routes=self.routes_for(rg),
            seed=derive_seed(self.seed, f"mapsched:{shm_tag(shm):016x}"),
            initial_policy=self.initial_policy,
            iterations=self.iterations,
            sa_params=self.sa_params,
        )


def map_and_store(shm, location, msu, mpm):
    """Precompute for `location` failing permanently: apply the fault
    hypothetically, map, store, and restore the health map bit for bit.

    Returns the stored MpmEntry, or None when the hypothetical state
    admits no feasible mapping (a warning case, nothing stored)."""
    snap = shm.snapshot()
    try:
        for fault in degrade_targets(location, shm.ag):
            shm.apply_fault(fault)
        tag = shm_tag(shm)
        full_config = shm.serialize()
        try:
            result = msu.compute(shm)
        except InfeasibilityError:
            return None
        entry = MpmEntry(tag, full_config, tuple(result.mapping))
        mpm.store(entry)
        return entry
    finally:
        shm.restore(snap)


def map_and_deploy(shm, msu, mpm, cmm, rg=None):
    """Mapping for the current health state, from the precomputed
    memory when possible, plus its reconfiguration latency report.

    Updates the current-mapping memory.  Raises InfeasibilityError
    when no feasible mapping exists (caller decides the policy)."""
    tag = shm_tag(shm)
    full_config = shm.serialize()
    rg = rg or msu.build_rg(shm)
    cm = msu.cost_model
    m = len(msu.tg)

    entry = mpm.lookup(tag, full_config)
    if entry is not None:
        mapping = list(entry.assignment)
        schedule = asap_schedule(
            msu.tg, mapping, shm, rg, comm=msu.comm, routes=msu.routes_for(rg)
        )
        t_map_alg = 0
        t_fetch = cm.t_fetch
        t_schd = m * cm.cycles_per_task
    else:
        result = msu.compute(shm, rg)
        mapping, schedule = result.mapping, result.schedule
        t_map_alg = result.evaluations * cm.cycles_per_eval
        t_fetch = 0
        t_schd = 0

    old = cmm.mapping if cmm.mapping is not None else [None] * m
    moves = extract_partial_mapping(old, mapping)
    t_par_ext = cm.t_par_ext
    t_par_map = cm.par_map_per_move * len(moves)
    if entry is not None:
        t_rl = t_fetch + t_schd + t_par_ext + t_par_map
    else:
        t_rl = t_map_alg + t_par_ext + t_par_map

    report = LatencyReport(
        hit=entry is not None,
        t_map_alg=t_map_alg,
        t_fetch=t_fetch,
        t_schd=t_schd,
        t_par_ext=t_par_ext,
        t_par_map=t_par_map,
        t_rl=t_rl,
    )
    cmm.mapping = list(mapping)
    cmm.schedule = schedule
    cmm.shm_tag = tag
    return mapping, schedule, report
