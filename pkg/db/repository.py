# filename: db/repository.py
import sqlite3
from typing import Dict, List, Optional

from logger import get_logger
from state.models import PointStatus

logger = get_logger(__name__)


def upsert_point(conn: sqlite3.Connection, config_hash: str, n: int, status: PointStatus,
                 result_path: Optional[str] = None,
                 replicates_used: int = 0, replicates_failed: int = 0, replicates_divergent: int = 0,
                 error_message: Optional[str] = None) -> None:
    sql = '''
        INSERT INTO sweep_points (config_hash, n, status, result_path, replicates_used, replicates_failed,
                                  replicates_divergent, attempts, last_updated, error_message)
        VALUES (?, ?, ?, ?, ?, ?, ?, ?, CURRENT_TIMESTAMP, ?)
        ON CONFLICT(config_hash, n) DO UPDATE SET
            status = excluded.status,
            result_path = COALESCE(excluded.result_path, sweep_points.result_path),
            replicates_used = excluded.replicates_used,
            replicates_failed = excluded.replicates_failed,
            replicates_divergent = excluded.replicates_divergent,
            attempts = sweep_points.attempts + CASE WHEN excluded.status = 'running' THEN 1 ELSE 0 END,
            last_updated = CURRENT_TIMESTAMP,
            error_message = excluded.error_message
    '''
    attempts = 1 if status is PointStatus.RUNNING else 0
    try:
        conn.execute(sql, (config_hash, n, status.value, result_path, replicates_used, replicates_failed,
                           replicates_divergent, attempts, error_message))
        conn.commit()
        logger.debug(f"Ledger: point n={n} of {config_hash[:12]} -> {status.value}")
    except sqlite3.Error as e:
        logger.error(f"Ledger error recording point n={n}: {e}")
        conn.rollback()
        raise


def get_point_status(conn: sqlite3.Connection, config_hash: str, n: int) -> Optional[PointStatus]:
    row = conn.execute("SELECT status FROM sweep_points WHERE config_hash = ? AND n = ?",
                       (config_hash, n)).fetchone()
    if not row:
        return None
    try:
        return PointStatus(row[0])
    except ValueError:
        logger.warning(f"Ledger: unknown point status '{row[0]}' for n={n}; treating as pending")
        return PointStatus.PENDING


def list_points(conn: sqlite3.Connection, config_hash: str) -> List[Dict]:
    cursor = conn.execute(
        """SELECT n, status, result_path, replicates_used, replicates_failed, replicates_divergent, attempts
           FROM sweep_points WHERE config_hash = ? ORDER BY n""", (config_hash,))
    columns = [c[0] for c in cursor.description]
    return [dict(zip(columns, row)) for row in cursor.fetchall()]
