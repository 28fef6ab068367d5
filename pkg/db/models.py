# filename: db/models.py

# One row per sweep or estimate run; timestamps live here and never in result JSON
SWEEP_SESSIONS_TABLE_SCHEMA = """
CREATE TABLE IF NOT EXISTS sweep_sessions (
    session_id INTEGER PRIMARY KEY AUTOINCREMENT,
    command TEXT NOT NULL,            -- sweep, estimate
    config_hash TEXT NOT NULL,
    dims_label TEXT,                  -- e.g. M3_N3_H2_H01
    master_seed INTEGER,
    start_time TEXT NOT NULL,
    end_time TEXT,
    status TEXT NOT NULL,             -- running, finished, partial, error
    last_state TEXT,
    total_points_done INTEGER DEFAULT 0,
    total_replicates_failed INTEGER DEFAULT 0,
    error_message TEXT
);
"""

# Processing status of each n of a learning-curve sweep
SWEEP_POINTS_TABLE_SCHEMA = """
CREATE TABLE IF NOT EXISTS sweep_points (
    config_hash TEXT NOT NULL,
    n INTEGER NOT NULL,
    status TEXT NOT NULL DEFAULT 'pending',  -- pending, running, completed, failed, skipped_existing
    result_path TEXT,
    replicates_used INTEGER DEFAULT 0,
    replicates_failed INTEGER DEFAULT 0,
    replicates_divergent INTEGER DEFAULT 0,
    attempts INTEGER DEFAULT 0,
    last_updated TEXT,
    error_message TEXT,
    PRIMARY KEY (config_hash, n)
);
"""
