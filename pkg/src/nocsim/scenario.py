"""Scenario files: JSON in, validated ScenarioScript out.

A scenario bundles the application, the platform, the algorithm knobs,
and the scripted fault/aging timeline.  Parsing is strict: malformed
JSON raises ParseError with the line/column, a well-formed document
with a bad field raises SemanticError naming the offending path.
"""

import json

from .errors import ParseError, SemanticError
from .graphs import (
    Task,
    build_mesh,
    build_task_graph,
    cluster_tasks,
    random_task_graph,
    CRITICAL,
    NON_CRITICAL,
)
from .health import SystemHealthMap
from .mapsched import (
    CommModel,
    SaParams,
    COST_KINDS,
    SCHEDULE_LENGTH,
    TRAFFIC_BALANCE,
    UTILIZATION_BALANCE,
)
from .reachability import partition
from .rng import derive_seed
from .routing import (
    build_routing_graph,
    custom_turn_model,
    is_deadlock_free,
    turn_model_by_name,
    turn_slots,
    turn_index,
)
from .shmu import ClassifierConfig, CostModel, degrade_targets, CHECKER_UNITS
from .simkernel import AgingUpdate, DROP, Injection, REQUEUE, ScenarioScript

COST_ALIASES = {
    "makespan": SCHEDULE_LENGTH,
    "traffic": TRAFFIC_BALANCE,
    "util": UTILIZATION_BALANCE,
}

HEURISTICS = ("greedy", "ils", "sa")


def load_scenario(path, seed=None, heuristic=None, cost=None, budget=None):
    """Read, parse, and validate a scenario file.  The keyword
    arguments override the corresponding document fields."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(data, seed=seed, heuristic=heuristic, cost=cost,
                          budget=budget)


def parse_scenario(data, seed=None, heuristic=None, cost=None, budget=None):
    if not isinstance(data, dict):
        raise SemanticError("scenario: document must be an object")

    _known(data, "scenario", (
        "seed", "application", "platform", "heuristic", "classifier",
        "cost_model", "reachability", "prediction", "policies",
        "injections", "aging",
    ))

    master_seed = seed if seed is not None else _int(data.get("seed", 0), "seed", lo=0)
    ag, turn_model, regions = _parse_platform(_req(data, "platform"))
    tg, ctg = _parse_application(_req(data, "application"), master_seed)

    heur_cfg = data.get("heuristic", {})
    _known(heur_cfg, "heuristic", ("name", "cost", "initial", "iterations", "sa"))
    heur_name = heuristic if heuristic is not None else heur_cfg.get("name", "greedy")
    if heur_name not in HEURISTICS:
        raise SemanticError(
            f"heuristic.name: {heur_name!r} not one of {HEURISTICS}")
    cost_name = cost if cost is not None else heur_cfg.get("cost", SCHEDULE_LENGTH)
    cost_kind = COST_ALIASES.get(cost_name, cost_name)
    if cost_kind not in COST_KINDS:
        raise SemanticError(
            f"heuristic.cost: {cost_name!r} not one of "
            f"{COST_KINDS + tuple(COST_ALIASES)}")
    initial_policy = heur_cfg.get("initial", "first_fit")
    if initial_policy not in ("first_fit", "random"):
        raise SemanticError(
            f"heuristic.initial: {initial_policy!r} not one of "
            "('first_fit', 'random')")
    iterations = _int(heur_cfg.get("iterations", 10), "heuristic.iterations", lo=1)
    sa_params = _parse_sa(heur_cfg.get("sa", {}))

    classifier = _parse_classifier(data.get("classifier", {}))
    comm, cost_model = _parse_cost_model(data.get("cost_model", {}))

    reach_cfg = data.get("reachability", {})
    _known(reach_cfg, "reachability", ("budget",))
    budget_val = budget if budget is not None else reach_cfg.get("budget", 4)
    budget_val = _int(budget_val, "reachability.budget", lo=1)

    pred_cfg = data.get("prediction", {})
    _known(pred_cfg, "prediction", ("k", "mpm_capacity"))
    prediction_k = _int(pred_cfg.get("k", 2), "prediction.k", lo=0)
    mpm_capacity = _int(pred_cfg.get("mpm_capacity", 16),
                        "prediction.mpm_capacity", lo=1)

    policies = data.get("policies", {})
    _known(policies, "policies", ("severed_flows",))
    severed = policies.get("severed_flows", DROP)
    if severed not in (DROP, REQUEUE):
        raise SemanticError(
            f"policies.severed_flows: {severed!r} not one of "
            f"({DROP!r}, {REQUEUE!r})")

    injections = _parse_injections(data.get("injections", []), ag)
    aging = _parse_aging(data.get("aging", []), ag)

    _check_deadlock_free(ag, turn_model, regions)

    return ScenarioScript(
        seed=master_seed,
        tg=tg,
        ag=ag,
        turn_model=turn_model,
        ctg=ctg,
        regions=regions,
        heuristic=heur_name,
        cost=cost_kind,
        initial_policy=initial_policy,
        iterations=iterations,
        sa_params=sa_params,
        classifier=classifier,
        comm=comm,
        cost_model=cost_model,
        budget=budget_val,
        prediction_k=prediction_k,
        mpm_capacity=mpm_capacity,
        severed_policy=severed,
        injections=injections,
        aging=aging,
    )


# -- sections ------------------------------------------------------------


def _parse_platform(cfg):
    _known(cfg, "platform", ("mesh", "turn_model", "custom_turns", "regions"))
    mesh = _req(cfg, "mesh", "platform")
    if (not isinstance(mesh, list) or len(mesh) not in (2, 3)
            or not all(isinstance(v, int) for v in mesh)):
        raise SemanticError(
            "platform.mesh: expected [width, height] or [width, height, depth]")
    for v in mesh:
        if v < 1:
            raise SemanticError("platform.mesh: dimensions must be >= 1")
    ag = build_mesh(*mesh)
    is_3d = len(mesh) == 3

    name = cfg.get("turn_model", "xyz" if is_3d else "xy")
    if name == "custom":
        raw = _req(cfg, "custom_turns", "platform")
        pairs = []
        valid = {d for pair in turn_slots(is_3d) for d in pair}
        for i, item in enumerate(raw):
            if (not isinstance(item, list) or len(item) != 2
                    or not all(isinstance(d, str) and d in valid for d in item)):
                raise SemanticError(
                    f"platform.custom_turns[{i}]: expected a [from, to] "
                    f"direction pair")
            pairs.append((item[0], item[1]))
        try:
            model = custom_turn_model(pairs, is_3d=is_3d)
        except Exception as exc:
            raise SemanticError(f"platform.custom_turns: {exc}") from None
    else:
        try:
            model = turn_model_by_name(name, is_3d=is_3d)
        except Exception as exc:
            raise SemanticError(f"platform.turn_model: {exc}") from None

    regions = None
    if "regions" in cfg:
        rcfg = cfg["regions"]
        _known(rcfg, "platform.regions", ("labels", "turn_models"))
        raw_labels = rcfg.get("labels", {})
        labels = {}
        for key, label in raw_labels.items():
            try:
                tile = int(key)
            except ValueError:
                raise SemanticError(
                    f"platform.regions.labels: key {key!r} is not a tile id"
                ) from None
            if not 0 <= tile < len(ag.tiles):
                raise SemanticError(
                    f"platform.regions.labels: tile {tile} out of range")
            if not isinstance(label, str):
                raise SemanticError(
                    f"platform.regions.labels.{key}: label must be a string")
            labels[tile] = label
        models = {}
        for label, mname in rcfg.get("turn_models", {}).items():
            try:
                models[label] = turn_model_by_name(mname, is_3d=is_3d)
            except Exception as exc:
                raise SemanticError(
                    f"platform.regions.turn_models.{label}: {exc}") from None
        try:
            regions = partition(ag, labels, models or None)
        except Exception as exc:
            raise SemanticError(f"platform.regions: {exc}") from None

    return ag, model, regions


def _parse_application(cfg, master_seed):
    _known(cfg, "application", (
        "type", "tasks", "density", "wcet_range", "weight_range",
        "edges", "cluster",
    ))
    kind = cfg.get("type", "random")
    if kind == "random":
        n = _int(_req(cfg, "tasks", "application"), "application.tasks", lo=1)
        density = cfg.get("density", 0.3)
        if not isinstance(density, (int, float)) or not 0 <= density <= 1:
            raise SemanticError("application.density: expected a number in [0, 1]")
        wcet_range = _range_pair(cfg.get("wcet_range", [1, 20]),
                                 "application.wcet_range")
        weight_range = _range_pair(cfg.get("weight_range", [1, 10]),
                                   "application.weight_range")
        tg = random_task_graph(
            n, density, derive_seed(master_seed, "taskgen"),
            wcet_range=wcet_range, weight_range=weight_range,
        )
    elif kind == "explicit":
        raw_tasks = _req(cfg, "tasks", "application")
        if not isinstance(raw_tasks, list) or not raw_tasks:
            raise SemanticError("application.tasks: expected a non-empty list")
        tasks = []
        for i, item in enumerate(raw_tasks):
            path = f"application.tasks[{i}]"
            _known(item, path, ("id", "wcet", "release", "criticality", "slack"))
            crit = item.get("criticality", NON_CRITICAL)
            if crit not in (CRITICAL, NON_CRITICAL):
                raise SemanticError(
                    f"{path}.criticality: {crit!r} not one of "
                    f"({CRITICAL!r}, {NON_CRITICAL!r})")
            slack = item.get("slack")
            if slack is not None:
                slack = _int(slack, f"{path}.slack", lo=0)
            tasks.append(Task(
                id=_int(_req(item, "id", path), f"{path}.id", lo=0),
                wcet=_int(_req(item, "wcet", path), f"{path}.wcet", lo=1),
                release=_int(item.get("release", 0), f"{path}.release", lo=0),
                criticality=crit,
                slack=slack,
            ))
        edges = {}
        for i, item in enumerate(cfg.get("edges", [])):
            path = f"application.edges[{i}]"
            if not isinstance(item, list) or len(item) != 3:
                raise SemanticError(f"{path}: expected [src, dst, weight]")
            src = _int(item[0], f"{path}[0]", lo=0)
            dst = _int(item[1], f"{path}[1]", lo=0)
            weight = _int(item[2], f"{path}[2]", lo=1)
            if (src, dst) in edges:
                raise SemanticError(f"{path}: duplicate edge ({src}, {dst})")
            edges[(src, dst)] = weight
        tg = build_task_graph(tasks, edges)
    else:
        raise SemanticError(
            f"application.type: {kind!r} not one of ('random', 'explicit')")

    ctg = None
    if "cluster" in cfg:
        ccfg = cfg["cluster"]
        _known(ccfg, "application.cluster", ("k", "heuristic"))
        k = _int(_req(ccfg, "k", "application.cluster"),
                 "application.cluster.k", lo=1)
        ch = ccfg.get("heuristic", "greedy-merge")
        try:
            ctg = cluster_tasks(tg, k, heuristic=ch,
                                seed=derive_seed(master_seed, "cluster"))
        except Exception as exc:
            raise SemanticError(f"application.cluster: {exc}") from None

    return tg, ctg


def _parse_sa(cfg):
    _known(cfg, "heuristic.sa", ("t0", "alpha", "moves_per_temp", "tmin_ratio"))
    t0 = cfg.get("t0")
    if t0 is not None and (not isinstance(t0, (int, float)) or t0 <= 0):
        raise SemanticError("heuristic.sa.t0: expected a positive number")
    alpha = cfg.get("alpha", 0.97)
    if not isinstance(alpha, (int, float)) or not 0 < alpha < 1:
        raise SemanticError("heuristic.sa.alpha: expected a number in (0, 1)")
    moves = _int(cfg.get("moves_per_temp", 100), "heuristic.sa.moves_per_temp",
                 lo=1)
    tmin_ratio = cfg.get("tmin_ratio", 1e-3)
    if not isinstance(tmin_ratio, (int, float)) or not 0 < tmin_ratio < 1:
        raise SemanticError("heuristic.sa.tmin_ratio: expected a number in (0, 1)")
    return SaParams(t0=t0, alpha=alpha, moves_per_temp=moves,
                    tmin_ratio=tmin_ratio)


def _parse_classifier(cfg):
    _known(cfg, "classifier",
           ("window", "intermittent_threshold", "permanent_threshold"))
    config = ClassifierConfig(
        window=_int(cfg.get("window", 10000), "classifier.window", lo=1),
        intermittent_threshold=_int(cfg.get("intermittent_threshold", 3),
                                    "classifier.intermittent_threshold", lo=2),
        permanent_threshold=_int(cfg.get("permanent_threshold", 8),
                                 "classifier.permanent_threshold", lo=2),
    )
    try:
        config.validate()
    except Exception as exc:
        raise SemanticError(f"classifier: {exc}") from None
    return config


def _parse_cost_model(cfg):
    _known(cfg, "cost_model", (
        "unit_link_cycles", "router_delay", "cycles_per_eval",
        "cycles_per_task", "t_fetch", "t_par_ext", "par_map_per_move",
        "detection_latency",
    ))
    comm = CommModel(
        unit_link_cycles=_int(cfg.get("unit_link_cycles", 1),
                              "cost_model.unit_link_cycles", lo=1),
        router_delay=_int(cfg.get("router_delay", 1),
                          "cost_model.router_delay", lo=0),
    )
    cm = CostModel(
        cycles_per_eval=_int(cfg.get("cycles_per_eval", 10),
                             "cost_model.cycles_per_eval", lo=1),
        cycles_per_task=_int(cfg.get("cycles_per_task", 1),
                             "cost_model.cycles_per_task", lo=1),
        t_fetch=_int(cfg.get("t_fetch", 2), "cost_model.t_fetch", lo=0),
        t_par_ext=_int(cfg.get("t_par_ext", 5), "cost_model.t_par_ext", lo=0),
        par_map_per_move=_int(cfg.get("par_map_per_move", 2),
                              "cost_model.par_map_per_move", lo=0),
        detection_latency=_int(cfg.get("detection_latency", 1),
                               "cost_model.detection_latency", lo=0),
    )
    return comm, cm


def _parse_injections(raw, ag):
    if not isinstance(raw, list):
        raise SemanticError("injections: expected a list")
    out = []
    last_time = 0
    for i, item in enumerate(raw):
        path = f"injections[{i}]"
        _known(item, path, ("time", "target", "persistence", "stuck"))
        time = _int(_req(item, "time", path), f"{path}.time", lo=0)
        if time < last_time:
            raise SemanticError(f"{path}.time: times must be non-decreasing")
        last_time = time
        location = _parse_target(_req(item, "target", path), ag, f"{path}.target")
        persistence = _parse_persistence(item.get("persistence", "transient"),
                                         f"{path}.persistence")
        stuck = item.get("stuck", "SA0")
        if stuck not in ("SA0", "SA1"):
            raise SemanticError(f"{path}.stuck: {stuck!r} not one of "
                                "('SA0', 'SA1')")
        out.append(Injection(time=time, location=location,
                             persistence=persistence, stuck=stuck))
    return tuple(out)


def _parse_target(cfg, ag, path):
    _known(cfg, path, ("kind", "tile", "slot", "link", "direction", "unit"))
    kind = _req(cfg, "kind", path)
    if kind == "pe":
        tile = _int(_req(cfg, "tile", path), f"{path}.tile", lo=0)
        location = ("pe", tile)
    elif kind == "turn":
        tile = _int(_req(cfg, "tile", path), f"{path}.tile", lo=0)
        slot = _req(cfg, "slot", path)
        if isinstance(slot, list) and len(slot) == 2:
            try:
                slot = turn_index((slot[0], slot[1]), ag.is_3d)
            except Exception:
                raise SemanticError(
                    f"{path}.slot: {slot!r} is not a turn of this mesh"
                ) from None
        else:
            slot = _int(slot, f"{path}.slot", lo=0,
                        hi=len(turn_slots(ag.is_3d)) - 1)
        location = ("turn", tile, slot)
    elif kind == "link":
        if "link" in cfg:
            location = ("link", _int(cfg["link"], f"{path}.link", lo=0,
                                     hi=len(ag.links) - 1))
        else:
            tile = _int(_req(cfg, "tile", path), f"{path}.tile", lo=0)
            direction = _req(cfg, "direction", path)
            if not 0 <= tile < len(ag.tiles):
                raise SemanticError(f"{path}.tile: tile {tile} out of range")
            link = ag.link(tile, direction) if direction in ag.directions() else None
            if link is None:
                raise SemanticError(
                    f"{path}: tile {tile} has no {direction!r} link")
            location = ("link", link.id)
    elif kind == "checker":
        tile = _int(_req(cfg, "tile", path), f"{path}.tile", lo=0)
        unit = _req(cfg, "unit", path)
        if unit not in CHECKER_UNITS:
            raise SemanticError(
                f"{path}.unit: {unit!r} not one of {CHECKER_UNITS}")
        location = ("checker", tile, unit)
    else:
        raise SemanticError(
            f"{path}.kind: {kind!r} not one of ('pe', 'turn', 'link', 'checker')")
    try:
        degrade_targets(location, ag)
    except Exception as exc:
        raise SemanticError(f"{path}: {exc}") from None
    return location


def _parse_persistence(cfg, path):
    if cfg in ("transient", "permanent"):
        return cfg
    if isinstance(cfg, dict):
        _known(cfg, path, ("kind", "count", "spacing"))
        if cfg.get("kind") != "intermittent":
            raise SemanticError(f"{path}.kind: expected 'intermittent'")
        count = _int(_req(cfg, "count", path), f"{path}.count", lo=1)
        spacing = _int(_req(cfg, "spacing", path), f"{path}.spacing", lo=1)
        return ("intermittent", count, spacing)
    raise SemanticError(
        f"{path}: expected 'transient', 'permanent', or an intermittent object")


def _parse_aging(raw, ag):
    if not isinstance(raw, list):
        raise SemanticError("aging: expected a list")
    out = []
    for i, item in enumerate(raw):
        path = f"aging[{i}]"
        _known(item, path, ("time", "tile", "percent"))
        tile = _int(_req(item, "tile", path), f"{path}.tile", lo=0)
        if not 0 <= tile < len(ag.tiles):
            raise SemanticError(f"{path}.tile: tile {tile} out of range")
        out.append(AgingUpdate(
            time=_int(_req(item, "time", path), f"{path}.time", lo=0),
            tile=tile,
            percent=_int(_req(item, "percent", path), f"{path}.percent",
                         lo=0, hi=100),
        ))
    return tuple(out)


def _check_deadlock_free(ag, turn_model, regions):
    """The routing graph induced on the healthy mesh must be acyclic;
    scripted scenarios are rejected otherwise."""
    shm = SystemHealthMap(ag)
    rg = build_routing_graph(ag, turn_model, shm, regions=regions)
    if not is_deadlock_free(rg):
        raise SemanticError(
            "platform: turn model admits a routing cycle on the healthy mesh")


# -- small checked accessors ----------------------------------------------


def _req(obj, key, path=None):
    if not isinstance(obj, dict) or key not in obj:
        where = f"{path}.{key}" if path else key
        raise SemanticError(f"{where}: required field missing")
    return obj[key]


def _known(obj, path, allowed):
    if not isinstance(obj, dict):
        raise SemanticError(f"{path}: expected an object")
    for key in obj:
        if key not in allowed:
            raise SemanticError(f"{path}.{key}: unknown field")


def _int(value, path, lo=None, hi=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise SemanticError(f"{path}: expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise SemanticError(f"{path}: must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise SemanticError(f"{path}: must be <= {hi}, got {value}")
    return value


def _range_pair(value, path):
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) for v in value)
            or not 1 <= value[0] <= value[1]):
        raise SemanticError(f"{path}: expected [lo, hi] with 1 <= lo <= hi")
    return (value[0], value[1])
