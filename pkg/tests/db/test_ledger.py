# filename: tests/db/test_ledger.py
import pytest

from db.connection import close_db, init_db, ledger_path
from db.repository import get_point_status, list_points, upsert_point
from state.manager import SweepStateManager
from state.models import PointStatus, SweepState

HASH = "ab" * 32


@pytest.fixture
def conn(tmp_path):
    connection = init_db(ledger_path(str(tmp_path / "runs")))
    yield connection
    close_db(connection)


def test_init_creates_tables(conn):
    names = {row[0] for row in conn.execute("SELECT name FROM sqlite_master WHERE type='table'")}
    assert {"sweep_sessions", "sweep_points"} <= names


def test_test_mode_wipes_ledger(tmp_path):
    path = ledger_path(str(tmp_path))
    first = init_db(path)
    upsert_point(first, HASH, 10, PointStatus.COMPLETED)
    close_db(first)
    second = init_db(path, test_mode=True)
    assert get_point_status(second, HASH, 10) is None
    close_db(second)


def test_point_lifecycle(conn):
    assert get_point_status(conn, HASH, 100) is None
    upsert_point(conn, HASH, 100, PointStatus.RUNNING)
    upsert_point(conn, HASH, 100, PointStatus.COMPLETED, result_path="points/n_00000100.json",
                 replicates_used=28, replicates_failed=1, replicates_divergent=1)
    assert get_point_status(conn, HASH, 100) is PointStatus.COMPLETED
    (row,) = list_points(conn, HASH)
    assert row["attempts"] == 1
    assert row["replicates_used"] == 28
    assert row["result_path"] == "points/n_00000100.json"


def test_rerun_counts_attempts_and_keeps_path(conn):
    upsert_point(conn, HASH, 5, PointStatus.RUNNING)
    upsert_point(conn, HASH, 5, PointStatus.COMPLETED, result_path="p.json")
    upsert_point(conn, HASH, 5, PointStatus.RUNNING)
    (row,) = list_points(conn, HASH)
    assert row["attempts"] == 2
    assert row["result_path"] == "p.json"


def test_points_are_listed_in_order(conn):
    for n in (400, 100, 200):
        upsert_point(conn, HASH, n, PointStatus.PENDING)
    upsert_point(conn, "cd" * 32, 50, PointStatus.PENDING)
    assert [row["n"] for row in list_points(conn, HASH)] == [100, 200, 400]


def test_unknown_status_reads_as_pending(conn):
    conn.execute("INSERT INTO sweep_points (config_hash, n, status) VALUES (?, ?, ?)", (HASH, 7, "lost"))
    assert get_point_status(conn, HASH, 7) is PointStatus.PENDING


def test_session_resumes_after_error(conn):
    manager = SweepStateManager(conn, HASH, dims_label="M2_N2_H1_H01", master_seed=3)
    manager.load_or_create_session()
    manager.record_point_done(replicates_failed=2)
    manager.finish_session(SweepState.ERROR, "interrupted")

    again = SweepStateManager(conn, HASH)
    again.load_or_create_session()
    assert again.resumed
    assert again.session_id == manager.session_id
    assert again.total_points_done == 1
    assert again.total_replicates_failed == 2


def test_finished_session_is_not_resumed(conn):
    manager = SweepStateManager(conn, HASH)
    manager.load_or_create_session()
    manager.finish_session(SweepState.FINISHED)

    again = SweepStateManager(conn, HASH)
    again.load_or_create_session()
    assert not again.resumed
    assert again.session_id != manager.session_id
    status = conn.execute("SELECT status FROM sweep_sessions WHERE session_id = ?",
                          (manager.session_id,)).fetchone()[0]
    assert status == "finished"


def test_other_command_starts_new_session(conn):
    sweep = SweepStateManager(conn, HASH, command="sweep")
    sweep.load_or_create_session()
    estimate = SweepStateManager(conn, HASH, command="estimate")
    estimate.load_or_create_session()
    assert not estimate.resumed
    assert estimate.session_id != sweep.session_id
