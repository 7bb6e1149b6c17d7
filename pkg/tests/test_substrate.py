import json

import numpy as np
import pytest

from gradmesh.core.exceptions import ConfigurationError, ContractError, KeyNotFound
from gradmesh.models.experiment import ClassLatency, LatencyModel
from gradmesh.models.traffic import MessageKind, QueueMessage, SubstrateClass
from gradmesh.services.substrate import (
    LogicalClock,
    SubstrateWorld,
    charge_latency,
    decode_vector,
    encode_vector,
    kv_barrier_add,
    kv_barrier_count,
    kv_delete,
    kv_exists,
    kv_get,
    kv_put,
    kv_server_average,
    object_get,
    object_list,
    object_put,
    queue_poll,
    queue_push,
    traffic_snapshot,
)
from gradmesh.utils.numeric import running_mean


@pytest.fixture
def world():
    return SubstrateWorld(4, event_log_limit=1000)


def test_fresh_world_has_zero_counters(world):
    snapshot = traffic_snapshot(world)
    for cls in SubstrateClass:
        assert snapshot[cls].bytes_written == 0
        assert snapshot[cls].bytes_read == 0
        assert snapshot[cls].op_count == 0


def test_world_needs_a_worker():
    with pytest.raises(ConfigurationError):
        SubstrateWorld(0)


def test_put_get_roundtrip_is_bitwise(world, rng):
    values = rng.normal(size=17)
    kv_put(world.shared_db, "g", encode_vector(values))
    assert decode_vector(kv_get(world.shared_db, "g")).tobytes() == values.tobytes()


def test_hundred_floats_count_800_payload_bytes(world):
    kv_put(world.shared_db, "g", encode_vector(np.ones(100)))
    kv_get(world.shared_db, "g")
    counters = traffic_snapshot(world)[SubstrateClass.SHARED_DB]
    assert counters.bytes_written == 800
    assert counters.bytes_read == 800
    assert counters.op_count == 2
    assert counters.envelope_bytes == 16


def test_counters_match_payload_sizes(world, rng):
    expected = 0
    for i in range(50):
        size = int(rng.integers(1, 64))
        kv_put(world.shared_db, f"k{i}", encode_vector(rng.normal(size=size)))
        expected += 8 * size
    assert traffic_snapshot(world)[SubstrateClass.SHARED_DB].bytes_written == expected


def test_last_writer_wins(world):
    kv_put(world.shared_db, "k", encode_vector(np.array([1.0])))
    kv_put(world.shared_db, "k", encode_vector(np.array([2.0])))
    np.testing.assert_array_equal(decode_vector(kv_get(world.shared_db, "k")), [2.0])


def test_missing_key_raises_key_not_found(world):
    with pytest.raises(KeyNotFound) as exc:
        kv_get(world.shared_db, "never-written")
    assert exc.value.key == "never-written"
    assert isinstance(exc.value, KeyError)
    with pytest.raises(KeyNotFound):
        object_get(world.bucket, "never-written")


def test_every_read_follows_a_write(world, rng):
    keys = [f"k{i}" for i in range(5)]
    for key in keys[:3]:
        kv_put(world.shared_db, key, encode_vector(rng.normal(size=4)))
    for key in keys:
        try:
            kv_get(world.shared_db, key)
        except KeyNotFound:
            pass
    written = set()
    for event in world.recorder.events():
        if event.op == "put":
            written.add(event.key)
        if event.op == "get":
            assert event.key in written


def test_malformed_frames_are_rejected(world):
    with pytest.raises(ContractError):
        kv_put(world.shared_db, "k", b"\x01")
    with pytest.raises(ContractError):
        kv_put(world.shared_db, "k", encode_vector(np.ones(2))[:-1])
    with pytest.raises(ContractError):
        kv_put(world.shared_db, "", encode_vector(np.ones(2)))


def test_server_average_examples(world):
    db = world.shared_db
    kv_put(db, "a", encode_vector(np.array([2.0, 4.0])))
    kv_put(db, "b", encode_vector(np.array([4.0, 8.0])))
    assert kv_server_average(db, ["a", "b"], "avg")
    np.testing.assert_array_equal(db.peek_vector("avg"), [3.0, 6.0])


def test_server_average_of_identical_inputs_is_bitwise_identity(world, rng):
    g = rng.normal(size=9)
    for key in ("x", "y", "z"):
        world.shared_db.put_vector(key, g)
    world.shared_db.server_average(["x", "y", "z"], "out")
    assert world.shared_db.peek_vector("out").tobytes() == g.tobytes()


def test_server_average_matches_client_side_mean(world, rng):
    vectors = [rng.normal(size=12) for _ in range(8)]
    keys = [f"v{i}" for i in range(8)]
    for key, vector in zip(keys, vectors):
        world.shared_db.put_vector(key, vector)
    world.shared_db.server_average(keys, "avg")
    stored = world.shared_db.peek_vector("avg")
    client_side = running_mean(vectors)
    np.testing.assert_allclose(stored, client_side, rtol=0, atol=1e-15)
    assert stored.tobytes() == client_side.tobytes()
    np.testing.assert_allclose(stored, np.mean(vectors, axis=0), rtol=1e-12, atol=1e-12)


def test_server_average_is_one_op_without_client_reads(world, rng):
    db = world.shared_db
    for key in ("a", "b", "c"):
        db.put_vector(key, rng.normal(size=10))
    before = traffic_snapshot(world)[SubstrateClass.SHARED_DB]
    db.server_average(["a", "b", "c"], "avg")
    delta = traffic_snapshot(world)[SubstrateClass.SHARED_DB].minus(before)
    assert delta.op_count == 1
    assert delta.bytes_written == 80
    assert delta.bytes_read == 0


def test_server_average_rejects_bad_inputs(world):
    db = world.shared_db
    db.put_vector("short", np.ones(2))
    db.put_vector("long", np.ones(3))
    with pytest.raises(ContractError):
        db.server_average(["short", "long"], "avg")
    with pytest.raises(ContractError):
        db.server_average([], "avg")
    with pytest.raises(KeyNotFound):
        db.server_average(["short", "missing"], "avg")


def test_server_sgd_step_updates_in_place(world):
    db = world.local_dbs[0]
    db.put_vector("params", np.array([1.0, 2.0]))
    db.put_vector("grad", np.array([10.0, -10.0]))
    before = traffic_snapshot(world)[SubstrateClass.LOCAL_DB]
    db.server_sgd_step("params", "grad", lr=0.1)
    np.testing.assert_allclose(db.peek_vector("params"), [0.0, 3.0], rtol=0, atol=1e-15)
    assert traffic_snapshot(world)[SubstrateClass.LOCAL_DB].minus(before).bytes_read == 0


def test_peer_reads_are_tracked(world):
    world.local_dbs[1].put_vector("avg", np.ones(4))
    world.local_dbs[1].get("avg", reader=1)
    assert traffic_snapshot(world)[SubstrateClass.LOCAL_DB].peer_read_bytes == 0
    world.local_dbs[1].get("avg", reader=0)
    assert traffic_snapshot(world)[SubstrateClass.LOCAL_DB].peer_read_bytes == 32


def test_barrier_add_is_idempotent_and_monotone(world):
    barrier = world.barrier
    assert kv_barrier_add(barrier, 0, 0) == 1
    assert kv_barrier_add(barrier, 0, 0) == 1
    counts = [kv_barrier_add(barrier, 0, w) for w in (1, 2, 3)]
    assert counts == [2, 3, 4]
    assert kv_barrier_count(barrier, 0) == 4
    assert kv_barrier_count(barrier, 1) == 0
    assert kv_barrier_count(barrier, 0, phase="other") == 0


def test_barrier_polls_carry_no_bytes(world):
    kv_barrier_count(world.barrier, 0)
    counters = traffic_snapshot(world)[SubstrateClass.QUEUE]
    assert counters.op_count == 1
    assert counters.bytes_written == counters.bytes_read == counters.envelope_bytes == 0


def test_queue_delivers_in_order(world):
    queue = world.worker_queues[0]
    for sender in (1, 2, 3):
        queue_push(queue, QueueMessage(sender=sender, round=0, kind=MessageKind.DONE))
    assert [queue_poll(queue).sender for _ in range(3)] == [1, 2, 3]


def test_queue_roundtrip_keeps_the_message(world):
    msg = QueueMessage(sender=2, round=5, kind=MessageKind.UPDATE_KEY, payload_key="MLLessPS:r5:w2:update")
    queue_push(world.supervisor_queue, msg)
    assert queue_poll(world.supervisor_queue) == msg
    counters = traffic_snapshot(world)[SubstrateClass.QUEUE]
    assert counters.bytes_written == counters.bytes_read == 0
    assert counters.envelope_bytes == 2 * (64 + len(msg.payload_key))


def test_empty_poll_returns_none_and_counts_an_op(world):
    assert queue_poll(world.worker_queues[1], max_wait=0.01) is None
    assert traffic_snapshot(world)[SubstrateClass.QUEUE].op_count == 1


def test_queue_message_validation():
    with pytest.raises(ValueError):
        QueueMessage(sender=0, round=0, kind=MessageKind.UPDATE_KEY)
    with pytest.raises(ValueError):
        QueueMessage(sender=-1, round=0, kind=MessageKind.PROCEED, payload_key="k")


def test_object_store_put_list_get(world, rng):
    values = [rng.normal(size=6) for _ in range(4)]
    for w, vector in enumerate(values):
        object_put(world.bucket, f"run/r0/w{w}", encode_vector(vector))
    object_put(world.bucket, "run/r1/w0", encode_vector(values[0]))
    assert object_list(world.bucket, "run/r0/") == [f"run/r0/w{w}" for w in range(4)]
    assert decode_vector(object_get(world.bucket, "run/r0/w2")).tobytes() == values[2].tobytes()
    counters = traffic_snapshot(world)[SubstrateClass.OBJECT_STORE]
    assert counters.bytes_written == 5 * 48
    assert counters.bytes_read == 48


def test_charge_latency_examples():
    latency = LatencyModel(shared_db=ClassLatency(fixed_latency=0.01, bandwidth=1e6))
    clock = LogicalClock(latency=latency)
    assert charge_latency(clock, SubstrateClass.SHARED_DB, 0) == pytest.approx(0.01)
    assert charge_latency(clock, SubstrateClass.SHARED_DB, 500_000) == pytest.approx(0.51)
    assert clock.now == pytest.approx(0.52)
    assert clock.transfer_s == pytest.approx(0.52)
    assert charge_latency(None, SubstrateClass.SHARED_DB, 100) == 0.0


def test_zero_latency_model_charges_nothing():
    clock = LogicalClock(latency=LatencyModel.zero())
    for cls in SubstrateClass:
        charge_latency(clock, cls, 10_000)
    assert clock.now == pytest.approx(0.0, abs=1e-20)


def test_operations_charge_the_callers_clock(world):
    clock = world.new_clock()
    world.shared_db.put_vector("k", np.ones(10), clock)
    expected = world.latency.charge(SubstrateClass.SHARED_DB, 80)
    assert clock.transfer_s == pytest.approx(expected)


def test_counter_dump_and_event_log(world):
    world.shared_db.put_vector("k", np.ones(3))
    dump = json.loads(world.dump_counters_json())
    assert dump["shared_db"]["bytes_written"] == 24
    assert set(dump) == {cls.value for cls in SubstrateClass}
    lines = world.events_jsonl().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["op"] == "put"


def test_event_log_is_off_by_default():
    world = SubstrateWorld(2, event_log_limit=0)
    world.shared_db.put_vector("k", np.ones(3))
    assert world.events_jsonl() == ""


def test_exists_and_delete_move_no_bytes(world):
    db = world.shared_db
    kv_put(db, "k", encode_vector(np.ones(4)))
    assert kv_exists(db, "k")
    assert kv_delete(db, "k")
    assert not kv_exists(db, "k")
    assert not kv_delete(db, "k")
    counters = world.snapshot()[SubstrateClass.SHARED_DB]
    assert counters.op_count == 5
    assert counters.bytes_written == 32
    assert counters.bytes_read == 0
    with pytest.raises(KeyNotFound):
        kv_get(db, "k")


def test_traffic_is_attributed_to_the_clock_owner(world):
    writer = world.new_clock(owner=2)
    world.shared_db.put_vector("k", np.ones(3), writer)
    world.local_dbs[0].put_vector("mine", np.ones(5), world.new_clock(owner=0))
    world.local_dbs[0].get_vector("mine", reader=1)

    assert world.worker_snapshot(2)[SubstrateClass.SHARED_DB].bytes_written == 24
    peer = world.worker_snapshot(1)[SubstrateClass.LOCAL_DB]
    assert peer.bytes_read == 40
    assert peer.peer_read_bytes == 40
    assert world.worker_snapshot(0)[SubstrateClass.LOCAL_DB].bytes_read == 0
    assert world.worker_snapshot(3).total_payload_bytes() == 0
    assert [event.worker for event in world.recorder.events()] == [2, 0, 1]


def test_ops_without_a_clock_count_only_in_the_totals(world):
    world.shared_db.put_vector("k", np.ones(3))
    assert world.snapshot()[SubstrateClass.SHARED_DB].bytes_written == 24
    for w in range(world.workers):
        assert world.worker_snapshot(w)[SubstrateClass.SHARED_DB].op_count == 0
    assert world.recorder.events()[0].worker is None


def test_queue_messages_are_mlless_control_only():
    assert {kind.value for kind in MessageKind} == {"update_key", "proceed", "done"}
