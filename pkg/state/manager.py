# filename: state/manager.py
import sqlite3
import time
from typing import Optional

from logger import get_logger
from .models import SweepState

logger = get_logger(__name__)

RESUMABLE_STATUSES = ("running", "error", "partial")


class SweepStateManager:
    """Keeps the ledger row of one sweep session in step with the run."""

    def __init__(self, conn: sqlite3.Connection, config_hash: str, command: str = "sweep",
                 dims_label: Optional[str] = None, master_seed: Optional[int] = None):
        self.conn = conn
        self.config_hash = config_hash
        self.command = command
        self.dims_label = dims_label
        self.master_seed = master_seed
        self.session_id: Optional[int] = None
        self.start_time: Optional[str] = None
        self.current_state: SweepState = SweepState.INITIALIZING
        self.total_points_done: int = 0
        self.total_replicates_failed: int = 0
        self.resumed: bool = False

    def _execute_query(self, query: str, params: tuple = ()) -> Optional[sqlite3.Cursor]:
        try:
            cursor = self.conn.cursor()
            cursor.execute(query, params)
            self.conn.commit()
            return cursor
        except sqlite3.Error as e:
            logger.error(f"Ledger error during query: {query} | PARAMS: {params} | ERROR: {e}")
            self.conn.rollback()
            return None

    def load_or_create_session(self):
        """Reopens an unfinished session with the same config hash, otherwise starts a new one."""
        placeholders = ", ".join("?" for _ in RESUMABLE_STATUSES)
        row = self.conn.execute(f"""
            SELECT session_id, start_time, total_points_done, total_replicates_failed
            FROM sweep_sessions
            WHERE config_hash = ? AND command = ? AND status IN ({placeholders})
            ORDER BY session_id DESC
            LIMIT 1
        """, (self.config_hash, self.command, *RESUMABLE_STATUSES)).fetchone()

        now = time.strftime("%Y-%m-%d %H:%M:%S")
        self.current_state = SweepState.RUNNING
        if row:
            self.session_id, self.start_time, self.total_points_done, self.total_replicates_failed = row
            self.resumed = True
            logger.info(f"Resuming {self.command} session {self.session_id} "
                        f"({self.total_points_done} point(s) already done)")
            self._execute_query("UPDATE sweep_sessions SET status = 'running', last_state = ? WHERE session_id = ?",
                                (self.current_state.name, self.session_id))
            return
        self.start_time = now
        cursor = self._execute_query(
            """INSERT INTO sweep_sessions (command, config_hash, dims_label, master_seed, start_time, status, last_state)
               VALUES (?, ?, ?, ?, ?, 'running', ?)""",
            (self.command, self.config_hash, self.dims_label, self.master_seed, self.start_time,
             self.current_state.name))
        if cursor is None:
            raise RuntimeError("Failed to initialize sweep session in the ledger.")
        self.session_id = cursor.lastrowid
        logger.info(f"Created {self.command} session {self.session_id} for config {self.config_hash[:12]}")

    def record_point_done(self, replicates_failed: int = 0):
        self.total_points_done += 1
        self.total_replicates_failed += replicates_failed
        if self.session_id is not None:
            self._execute_query(
                "UPDATE sweep_sessions SET total_points_done = ?, total_replicates_failed = ? WHERE session_id = ?",
                (self.total_points_done, self.total_replicates_failed, self.session_id))

    def finish_session(self, state: SweepState = SweepState.FINISHED, error_message: Optional[str] = None):
        self.current_state = state
        status = {SweepState.FINISHED: "finished", SweepState.PARTIAL: "partial"}.get(state, "error")
        if state is SweepState.ERROR:
            logger.error(f"Session {self.session_id} ended in error: {error_message or 'no message'}")
        if self.session_id is not None:
            self._execute_query(
                "UPDATE sweep_sessions SET end_time = ?, status = ?, last_state = ?, error_message = ? "
                "WHERE session_id = ?",
                (time.strftime("%Y-%m-%d %H:%M:%S"), status, state.name, error_message, self.session_id))
        logger.info(f"Session {self.session_id} finished with status: {status}. "
                    f"Points done: {self.total_points_done}, failed replicates: {self.total_replicates_failed}.")
