# filename: db/connection.py
import os
import sqlite3
from typing import Optional

from config import LEDGER_DB_NAME, OUTPUT_DIR
from logger import get_logger
from .models import SWEEP_POINTS_TABLE_SCHEMA, SWEEP_SESSIONS_TABLE_SCHEMA

logger = get_logger(__name__)


def ledger_path(output_dir: str = OUTPUT_DIR) -> str:
    return os.path.join(output_dir, LEDGER_DB_NAME)


def _execute_schema(cursor: sqlite3.Cursor, schema: str, table_name: str):
    """Creates the table if it does not exist yet."""
    try:
        cursor.execute("SELECT name FROM sqlite_master WHERE type='table' AND name=?;", (table_name,))
        if not cursor.fetchone():
            logger.debug(f"Table '{table_name}' not found, creating now...")
            cursor.executescript(schema)
            logger.info(f"Table '{table_name}' created.")
        else:
            logger.debug(f"Table '{table_name}' already exists.")
    except sqlite3.Error as e:
        logger.error(f"Error handling table '{table_name}': {e}")
        raise


def init_db(db_path: str, test_mode: bool = False) -> sqlite3.Connection:
    """
    Opens (and creates if needed) the run ledger.

    Args:
        db_path: Path to the SQLite file; the parent directory is created.
        test_mode: If True, an existing ledger is deleted first.

    Returns:
        The open connection.
    """
    if test_mode and os.path.exists(db_path):
        logger.warning(f"TEST_MODE: Deleting existing ledger at {db_path}")
        os.remove(db_path)
    parent = os.path.dirname(db_path)
    if parent:
        os.makedirs(parent, exist_ok=True)

    conn = None
    try:
        conn = sqlite3.connect(db_path, check_same_thread=False)
        logger.debug(f"Ledger connection established to: {db_path}")
        try:
            conn.execute("PRAGMA journal_mode=WAL;")
        except sqlite3.Error as e:
            logger.warning(f"Could not enable WAL journal mode: {e}")
        cursor = conn.cursor()
        _execute_schema(cursor, SWEEP_SESSIONS_TABLE_SCHEMA, "sweep_sessions")
        _execute_schema(cursor, SWEEP_POINTS_TABLE_SCHEMA, "sweep_points")
        conn.commit()
        return conn
    except sqlite3.Error as e:
        logger.error(f"Ledger initialization error: {e}")
        if conn:
            conn.rollback()
            conn.close()
        raise


def close_db(conn: Optional[sqlite3.Connection]):
    if conn:
        try:
            conn.close()
            logger.debug("Ledger connection closed.")
        except sqlite3.Error as e:
            logger.error(f"Error closing ledger connection: {e}")
