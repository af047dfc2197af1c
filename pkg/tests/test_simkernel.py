import pytest

import nocsim as ns

from conftest import chain_tg


def script(tg, ag, **kw):
    kw.setdefault("seed", 1)
    kw.setdefault("turn_model", ns.XY)
    return ns.ScenarioScript(tg=tg, ag=ag, **kw)


# -- injection expansion -------------------------------------------------------


def test_expand_transient_single_event():
    events = ns.expand_injection(
        ns.Injection(time=5, location=("pe", 1), persistence="transient"))
    assert len(events) == 1
    assert events[0].time == 5
    assert events[0].location == ("pe", 1)
    assert not events[0].retest_persistent


def test_expand_intermittent_burst():
    events = ns.expand_injection(
        ns.Injection(time=500, location=("link", 2),
                     persistence=("intermittent", 3, 100)))
    assert [e.time for e in events] == [500, 600, 700]
    assert all(e.location == ("link", 2) for e in events)
    assert not any(e.retest_persistent for e in events)


def test_expand_permanent_sets_retest():
    events = ns.expand_injection(
        ns.Injection(time=9, location=("turn", 4, 6), persistence="permanent"))
    assert len(events) == 1
    assert events[0].retest_persistent


# -- fault-free baseline ---------------------------------------------------------


def test_fault_free_matches_static_schedule(mesh33):
    tg = chain_tg([5, 5, 5], [2, 1])
    res = ns.run(script(tg, mesh33))
    m = res.metrics
    assert m.makespan == 15
    assert (m.remaps, m.flows_dropped, m.flows_requeued) == (0, 0, 0)
    assert m.tasks_completed == 3 and m.tasks_unfinished == 0

    shm = ns.SystemHealthMap(mesh33)
    msu = ns.Msu(tg=tg, turn_model=ns.XY, seed=1)
    mapping, sched, report = ns.map_and_deploy(
        shm, msu, ns.MpmMemory(16), ns.CurrentMappingMemory())
    assert sched.makespan == m.makespan
    assert res.cmm.mapping == mapping
    assert res.initial_report == report
    assert report.t_rl == 741


def test_run_function_equals_kernel_class(mesh33):
    tg = chain_tg([5, 5, 5], [2, 1])
    a = ns.run(script(tg, mesh33))
    b = ns.Kernel(script(tg, mesh33)).run()
    assert a.trace == b.trace
    assert a.metrics.to_text() == b.metrics.to_text()


def test_flow_timing_and_link_busy(mesh22):
    # Spread mapping [0, 1, 2]: flow 0->1 over the east link, 1->2 west+north.
    tg = chain_tg([5, 5, 5], [2, 1])
    res = ns.run(script(tg, mesh22, seed=2, cost="utilization_balance"))
    assert res.cmm.mapping == [0, 1, 2]
    assert "5 flow_inject 0->1 links=1" in res.trace
    assert "9 flow_deliver 0->1" in res.trace
    assert "18 flow_deliver 1->2" in res.trace
    assert res.metrics.makespan == 23
    assert res.metrics.flows_delivered == 2
    assert res.metrics.link_busy == {1: 2, 3: 1, 0: 1}
    text = res.metrics.to_text()
    assert "link_busy 0 1\nlink_busy 1 2\nlink_busy 3 1" in text
    assert text.startswith("makespan 23\ntasks_completed 3\n")


# -- permanent fault on a hosting tile ----------------------------------------------


def hosting_fault_run(mesh33, **kw):
    tg = chain_tg([5, 5, 5], [2, 1])
    inj = ns.Injection(time=7, location=("pe", 1), persistence="permanent")
    return ns.run(script(tg, mesh33, injections=(inj,), **kw))


def test_permanent_fault_triggers_single_remap(mesh33):
    res = hosting_fault_run(mesh33)
    m = res.metrics
    assert m.remaps == 1 and m.mpm_misses == 1 and m.mpm_hits == 0
    remap_lines = [d for d in res.decisions if "action=remap" in d]
    assert remap_lines == [
        "8 event pe:1 class=permanent severity=remap "
        "action=remap hit=0 t_rl=651 deploy_at=659"]
    assert m.recovery_walls == (651,)
    assert m.latency_reports[0].hit is False
    # Results computed on the broken tile are discarded and redone.
    assert "8 results_lost task=0 tile=1" in res.trace
    assert m.makespan == 659 + 15
    assert m.tasks_completed == 3 and m.tasks_unfinished == 0
    assert 1 not in res.cmm.mapping


def test_unused_element_rebuilds_tables_without_remap(mesh33):
    tg = chain_tg([5, 5, 5], [2, 1])
    lid = next(l.id for l in mesh33.links if l.src == 7 and l.dst == 8)
    injections = (
        ns.Injection(time=7, location=("link", lid), persistence="permanent"),
        ns.Injection(time=30, location=("link", lid), persistence="permanent"),
    )
    res = ns.run(script(tg, mesh33, injections=injections))
    assert res.metrics.remaps == 0
    assert res.metrics.makespan == 15            # undisturbed
    assert f"8 event link:{lid} class=permanent severity=ignore " \
           f"action=tables-rebuilt" in res.decisions
    assert f"31 event link:{lid} class=permanent severity=ignore " \
           f"action=already-recorded" in res.decisions
    assert not res.shm.link_healthy(lid)


# -- prediction pays off ----------------------------------------------------------


def test_intermittent_burst_then_permanent_hits_mpm(mesh33):
    tg = chain_tg([5, 5, 5], [2, 1])
    burst = ns.Injection(time=20, location=("pe", 1),
                         persistence=("intermittent", 3, 5))
    perm = ns.Injection(time=60, location=("pe", 1), persistence="permanent")
    hit_run = ns.run(script(tg, mesh33, injections=(burst, perm)))
    hm = hit_run.metrics
    assert hm.stores == 1 and hm.mpm_hits == 1 and hm.mpm_misses == 0
    assert "21 event pe:1 class=transient severity=ignore action=none" \
        in hit_run.decisions
    assert "31 event pe:1 class=intermittent severity=remap_and_store " \
           "action=stored:1" in hit_run.decisions
    assert hm.latency_reports[0].hit is True
    assert hm.latency_reports[0].t_rl == 16

    miss_run = ns.run(script(tg, mesh33, injections=(perm,)))
    mm = miss_run.metrics
    assert mm.mpm_hits == 0 and mm.mpm_misses == 1
    assert mm.latency_reports[0].t_rl == 651
    assert hm.latency_reports[0].t_rl < mm.latency_reports[0].t_rl
    # Both runs settle on the same repaired placement.
    assert hit_run.cmm.mapping == miss_run.cmm.mapping


# -- injection-time drop and starvation -----------------------------------------------


def test_coarse_tables_drop_flow_and_starve_dependents(mesh33):
    # Budget 1 covers each port's unreachable set with one bounding box,
    # which on a column flow swallows the destination: the packet is
    # dropped at injection and everything downstream starves.
    tg = chain_tg([5, 5, 5], [2, 1])
    aging = tuple(ns.AgingUpdate(time=0, tile=t, percent=100)
                  for t in range(9) if t not in (1, 4, 7))
    res = ns.run(script(tg, mesh33, cost="utilization_balance",
                        budget=1, aging=aging))
    m = res.metrics
    assert res.cmm.mapping == [1, 4, 7]
    assert m.flows_dropped == 1
    assert m.tasks_completed == 1 and m.tasks_unfinished == 2
    assert m.makespan == 5
    assert "5 flow_drop 0->1 src_tile=1 dst_tile=4" in res.trace
    assert "5 task_cancelled task=1" in res.trace
    assert "5 task_cancelled task=2" in res.trace


def test_generous_budget_delivers_same_column_flow(mesh33):
    tg = chain_tg([5, 5, 5], [2, 1])
    aging = tuple(ns.AgingUpdate(time=0, tile=t, percent=100)
                  for t in range(9) if t not in (1, 4, 7))
    res = ns.run(script(tg, mesh33, cost="utilization_balance",
                        budget=4, aging=aging))
    assert res.metrics.flows_dropped == 0
    assert res.metrics.tasks_completed == 3


# -- severed in-flight flows -----------------------------------------------------------


def severed_run(mesh22, policy):
    tg = chain_tg([5, 5, 5], [2, 1])
    inj = ns.Injection(time=6, location=("link", 1), persistence="permanent")
    return ns.run(script(tg, mesh22, seed=2, cost="utilization_balance",
                         injections=(inj,), severed_policy=policy))


def test_severed_flow_drop_policy(mesh22):
    res = severed_run(mesh22, ns.DROP)
    assert res.metrics.flows_dropped == 1
    assert res.metrics.flows_requeued == 0
    assert res.metrics.remaps == 1
    assert "7 flow_severed 0->1" in res.trace
    assert res.metrics.tasks_completed == 3


def test_severed_flow_requeue_policy(mesh22):
    drop = severed_run(mesh22, ns.DROP)
    req = severed_run(mesh22, ns.REQUEUE)
    assert req.metrics.flows_dropped == 0
    assert req.metrics.flows_requeued == 1
    # The policy names the bookkeeping, not the recovery path.
    assert req.metrics.makespan == drop.metrics.makespan == 136


# -- aging ------------------------------------------------------------------------------


def test_midrun_aging_slows_later_plans(mesh22):
    tg = chain_tg([10, 10], [1])
    base = ns.run(script(tg, mesh22, seed=3))
    tile = base.cmm.mapping[0]
    assert base.metrics.makespan == 20

    aging = tuple(ns.AgingUpdate(time=2, tile=t, percent=50)
                  for t in range(4) if t != tile)
    inj = ns.Injection(time=3, location=("pe", tile), persistence="permanent")
    res = ns.run(script(tg, mesh22, seed=3, aging=aging, injections=(inj,)))
    assert f"2 aging tile={res.cmm.mapping[0]} percent=50" in res.trace
    # wcet 10 at 50 percent speed takes 20 cycles on the new plan
    finishes = [line for line in res.trace if "task_finish task=0" in line]
    assert finishes[-1].endswith("start=103 finish=123")
    assert res.metrics.makespan == 143


def test_preload_aging_applied_before_initial_mapping(mesh22):
    tg = chain_tg([10, 10], [1])
    aging = (ns.AgingUpdate(time=0, tile=1, percent=100),)
    res = ns.run(script(tg, mesh22, seed=3, aging=aging))
    assert 1 not in res.cmm.mapping
    assert res.metrics.tasks_completed == 2


# -- determinism ---------------------------------------------------------------------


def test_rerun_is_byte_identical(mesh33):
    a = hosting_fault_run(mesh33)
    b = hosting_fault_run(mesh33)
    assert a.trace == b.trace
    assert a.decisions == b.decisions
    assert a.metrics.to_text() == b.metrics.to_text()
    assert a.cmm.mapping == b.cmm.mapping
    assert a.shm.serialize() == b.shm.serialize()


def test_metrics_text_shape(mesh33):
    res = hosting_fault_run(mesh33)
    text = res.metrics.to_text()
    lines = text.splitlines()
    assert lines[0] == "makespan 674"
    assert "remaps 1" in lines
    assert "recovery_wall 0 651" in lines
    assert any(l.startswith("latency_report 0 hit=0") for l in lines)
