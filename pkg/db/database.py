"""
Async result store for benchmark runs.
Keeps every report with its resolved config and the per-question outcomes behind it.
"""

import asyncio
import json
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import aiosqlite
import structlog

from bench.report import EvalReport
from bench.runner import QuestionOutcome
from errors import ConfigurationError

DEFAULT_DB_PATH = "bazi_results.db"
SCHEMA_PATH = Path(__file__).parent / "schema.sql"

logger = structlog.get_logger(__name__)


class ResultStore:
    """Async SQLite store for evaluation runs."""

    def __init__(self, path: str = DEFAULT_DB_PATH):
        self.path = path
        self._connection: Optional[aiosqlite.Connection] = None
        self._lock = asyncio.Lock()

    async def connect(self) -> None:
        """Open the database and create tables."""
        self._connection = await aiosqlite.connect(self.path)
        self._connection.row_factory = aiosqlite.Row
        await self._connection.execute("PRAGMA foreign_keys = ON")
        await self._connection.executescript(SCHEMA_PATH.read_text())
        await self._connection.commit()
        logger.debug("result_store_connected", path=self.path)

    async def close(self) -> None:
        if self._connection:
            await self._connection.close()
            self._connection = None

    async def __aenter__(self) -> "ResultStore":
        await self.connect()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.close()

    @property
    def conn(self) -> aiosqlite.Connection:
        if not self._connection:
            raise RuntimeError("ResultStore not connected. Call connect() first.")
        return self._connection

    # ==================== Runs ====================

    async def save_run(self, report: EvalReport, outcomes: Sequence[QuestionOutcome]) -> str:
        """Store a report and its outcomes in one transaction; returns the new run id."""
        run_id = uuid.uuid4().hex[:12]
        created_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        config = report.metadata.get("config", {})
        async with self._lock:
            await self.conn.execute(
                "INSERT INTO runs (run_id, created_at, valid, config_json, report_json) VALUES (?, ?, ?, ?, ?)",
                (run_id, created_at, int(report.valid),
                 json.dumps(config, ensure_ascii=False, sort_keys=True),
                 json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True)),
            )
            await self.conn.executemany("""
                INSERT INTO outcomes (run_id, model_id, setting, shuffled, person_id, question_id,
                                      dimension, predicted_index, gold_index, correct, status)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, [
                (run_id, o.model_id, o.setting.value, int(o.shuffled), o.person_id, o.question_id,
                 o.dimension, o.predicted_index, o.gold_index, int(o.correct), o.status)
                for o in outcomes
            ])
            await self.conn.commit()
        logger.info("run_saved", run_id=run_id, outcomes=len(outcomes))
        return run_id

    async def get_report(self, run_id: str) -> EvalReport:
        cursor = await self.conn.execute("SELECT report_json FROM runs WHERE run_id = ?", (run_id,))
        row = await cursor.fetchone()
        if row is None:
            raise ConfigurationError(f"no stored run with id {run_id!r}")
        return EvalReport.from_json(row["report_json"])

    async def list_runs(self) -> List[Dict[str, Any]]:
        cursor = await self.conn.execute("""
            SELECT r.run_id, r.created_at, r.valid, COUNT(o.question_id) AS outcomes
            FROM runs r LEFT JOIN outcomes o ON o.run_id = r.run_id
            GROUP BY r.run_id
            ORDER BY r.created_at, r.run_id
        """)
        rows = await cursor.fetchall()
        return [{**dict(row), "valid": bool(row["valid"])} for row in rows]

    async def get_outcomes(self, run_id: str) -> List[Dict[str, Any]]:
        cursor = await self.conn.execute("""
            SELECT * FROM outcomes WHERE run_id = ?
            ORDER BY model_id, setting, shuffled, person_id, question_id
        """, (run_id,))
        rows = await cursor.fetchall()
        result = []
        for row in rows:
            entry = dict(row)
            entry["shuffled"] = bool(entry["shuffled"])
            entry["correct"] = bool(entry["correct"])
            result.append(entry)
        return result
