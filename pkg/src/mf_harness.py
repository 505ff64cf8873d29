#!/usr/bin/env python3
"""
Parallel-run harness: execute legacy and modernized jobs as a dependency
graph, compare their record outputs and write an equivalence report.

A plan is a versioned YAML file (see docs/PLAN_AND_REPORT.md):

    version: 1
    name: billing-credit
    defaults: {timeout: 600, parallel: 2}
    schemas: {credit: credit.cpy}
    jobs:
      - id: legacy
        command: ["{python}", "legacy_credit.py", "input.dat", "out/legacy.dat"]
        inputs: [input.dat]
        outputs: [out/legacy.dat]
      - id: modern
        command: ["{python}", "modern_credit.py", "input.dat", "out/modern.dat"]
        outputs: [out/modern.dat]
    comparisons:
      - id: credit
        legacy: out/legacy.dat
        modern: out/modern.dat
        schema: credit
        match_by: key
        key: "0,10"

Plans are rejected before anything runs when the dependency graph has a
cycle or a missing job, or when two jobs that could run at the same time
declare the same output. Only declared outputs are checked; the harness
does not sandbox undeclared writes.
"""

import argparse
import hashlib
import json
import logging
import os
import subprocess  # nosec B404
import sys
import threading
import time
import uuid
from collections.abc import Mapping
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from datetime import UTC, datetime
from enum import StrEnum
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Any, NamedTuple

from mf_config import load_yaml, validate_dataset_config
from mf_copybook import load_copybook
from mf_errors import (
    ConfigError,
    CycleDetected,
    DanglingDependency,
    JobLaunchFailure,
    JobTimeout,
    MainframeDataError,
    OutputConflict,
    PlanChanged,
    PlanError,
)
from mf_recio import MatchBy, RecordFileSpec, compare_records, read_records

logger = logging.getLogger(__name__)

PLAN_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1
DEFAULT_TIMEOUT = 600
DEFAULT_PARALLEL = 1
PYTHON_TOKEN = "{python}"

PLAN_KEYS = {"version", "name", "defaults", "schemas", "jobs", "comparisons"}
DEFAULT_KEYS = {"timeout", "parallel"}
JOB_KEYS = {"id", "command", "external", "inputs", "outputs", "depends_on", "timeout", "env"}
COMPARISON_KEYS = {
    "id",
    "legacy",
    "modern",
    "schema",
    "format",
    "lrecl",
    "encoding",
    "codepage",
    "match_by",
    "key",
    "ignore",
    "discriminator",
}


class JobStatus(StrEnum):
    PASS = "PASS"
    FAILED = "FAILED"
    TIMEOUT = "TIMEOUT"
    LAUNCH_FAILED = "LAUNCH_FAILED"
    SKIPPED = "SKIPPED"


class Verdict(StrEnum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"
    ERROR = "ERROR"


class JobSpec(NamedTuple):
    id: str
    command: tuple[str, ...]
    external: bool
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    depends_on: tuple[str, ...]
    timeout: float
    env: dict[str, str]


class ComparisonSpec(NamedTuple):
    id: str
    legacy: str
    modern: str
    schema: str
    settings: dict[str, Any]
    match_by: MatchBy
    ignore: tuple[str, ...]


class Plan(NamedTuple):
    name: str
    path: Path
    base_dir: Path
    jobs: dict[str, JobSpec]
    comparisons: tuple[ComparisonSpec, ...]
    schemas: dict[str, Path]
    timeout: float
    parallel: int
    fingerprint: str

    def resolve(self, relative: str) -> Path:
        return (self.base_dir / relative).resolve()

    def file_spec(self, comparison: ComparisonSpec) -> RecordFileSpec:
        from mf_config import DatasetSettings

        settings = DatasetSettings(**comparison.settings)
        schema = load_copybook(self.schemas[comparison.schema], settings.discriminator)
        return RecordFileSpec.from_settings(settings, schema)

    def ancestors(self) -> dict[str, set[str]]:
        """Transitive dependencies of every job."""
        found: dict[str, set[str]] = {}
        for job_id in TopologicalSorter(
            {j.id: set(j.depends_on) for j in self.jobs.values()}
        ).static_order():
            job = self.jobs[job_id]
            found[job_id] = set(job.depends_on).union(*(found[d] for d in job.depends_on))
        return found


def _string_list(value: Any, where: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
        raise PlanError(f"{where} must be a list of strings")
    return tuple(value)


def _timeout(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float) or value <= 0:
        raise PlanError(f"{where} must be a positive number of seconds")
    return float(value)


def _parse_job(raw: Any, index: int, default_timeout: float) -> JobSpec:
    if not isinstance(raw, dict):
        raise PlanError(f"jobs[{index}] must be a mapping")
    unknown = set(raw) - JOB_KEYS
    if unknown:
        raise PlanError(f"jobs[{index}]: unknown option(s): {', '.join(sorted(unknown))}")
    job_id = raw.get("id")
    if not isinstance(job_id, str) or not job_id:
        raise PlanError(f"jobs[{index}] needs an id")
    external = raw.get("external", False)
    if not isinstance(external, bool):
        raise PlanError(f"job {job_id}: external must be true or false")
    command = _string_list(raw.get("command"), f"job {job_id}: command")
    if external == bool(command):
        raise PlanError(f"job {job_id} needs exactly one of command or external: true")
    env = raw.get("env") or {}
    if not isinstance(env, dict):
        raise PlanError(f"job {job_id}: env must be a mapping")
    return JobSpec(
        id=job_id,
        command=command,
        external=external,
        inputs=_string_list(raw.get("inputs"), f"job {job_id}: inputs"),
        outputs=_string_list(raw.get("outputs"), f"job {job_id}: outputs"),
        depends_on=_string_list(raw.get("depends_on"), f"job {job_id}: depends_on"),
        timeout=_timeout(raw.get("timeout", default_timeout), f"job {job_id}: timeout"),
        env={str(k): str(v) for k, v in env.items()},
    )


def _parse_comparison(raw: Any, index: int, schemas: Mapping[str, Path]) -> ComparisonSpec:
    if not isinstance(raw, dict):
        raise PlanError(f"comparisons[{index}] must be a mapping")
    unknown = set(raw) - COMPARISON_KEYS
    if unknown:
        raise PlanError(f"comparisons[{index}]: unknown option(s): {', '.join(sorted(unknown))}")
    comparison_id = raw.get("id") or f"comparison-{index + 1}"
    for field in ("legacy", "modern", "schema"):
        if not isinstance(raw.get(field), str):
            raise PlanError(f"comparison {comparison_id} needs {field}")
    if raw["schema"] not in schemas:
        raise DanglingDependency(
            f"comparison {comparison_id} uses undefined schema '{raw['schema']}'"
        )
    dataset_keys = ("format", "lrecl", "encoding", "codepage", "key", "discriminator")
    dataset = {k: raw[k] for k in dataset_keys if k in raw}
    try:
        settings = validate_dataset_config(dataset, f"comparison {comparison_id}")
        match_by = MatchBy(raw.get("match_by", "order"))
    except ValueError as e:
        raise PlanError(f"comparison {comparison_id}: match_by must be order or key") from e
    except ConfigError as e:
        raise PlanError(e.message) from e
    if match_by is MatchBy.KEY and "key" not in settings:
        raise PlanError(f"comparison {comparison_id}: match_by key needs a key")
    return ComparisonSpec(
        id=str(comparison_id),
        legacy=raw["legacy"],
        modern=raw["modern"],
        schema=raw["schema"],
        settings=settings,
        match_by=match_by,
        ignore=_string_list(raw.get("ignore"), f"comparison {comparison_id}: ignore"),
    )


def plan_fingerprint(config: Mapping[str, Any], schema_texts: Mapping[str, str]) -> str:
    """SHA-256 over the canonical JSON form of the plan and its copybook texts."""
    digest = hashlib.sha256()
    digest.update(json.dumps(config, sort_keys=True, separators=(",", ":"), default=str).encode())
    for name in sorted(schema_texts):
        digest.update(f"\n--schema {name}--\n".encode())
        digest.update(schema_texts[name].encode("utf-8"))
    return digest.hexdigest()


def validate_plan(config: Mapping[str, Any], path: str | Path = "plan.yaml") -> Plan:
    """
    Check a plan mapping and build the validated Plan.

    Raises PlanError (or its subclasses CycleDetected, OutputConflict and
    DanglingDependency) before any job can run.
    """
    plan_path = Path(path).resolve()
    base_dir = plan_path.parent
    unknown = set(config) - PLAN_KEYS
    if unknown:
        raise PlanError(f"unknown plan option(s): {', '.join(sorted(unknown))}")
    if config.get("version") != PLAN_FORMAT_VERSION:
        raise PlanError(f"plan version must be {PLAN_FORMAT_VERSION}, got {config.get('version')!r}")

    defaults = config.get("defaults") or {}
    if not isinstance(defaults, dict) or set(defaults) - DEFAULT_KEYS:
        raise PlanError("defaults may only set timeout and parallel")
    timeout = _timeout(defaults.get("timeout", DEFAULT_TIMEOUT), "defaults.timeout")
    parallel = defaults.get("parallel", DEFAULT_PARALLEL)
    if isinstance(parallel, bool) or not isinstance(parallel, int) or parallel < 1:
        raise PlanError("defaults.parallel must be a positive integer")

    raw_schemas = config.get("schemas") or {}
    if not isinstance(raw_schemas, dict):
        raise PlanError("schemas must map names to copybook paths")
    schemas = {str(name): (base_dir / str(p)).resolve() for name, p in raw_schemas.items()}
    schema_texts: dict[str, str] = {}
    for name, schema_path in schemas.items():
        if not schema_path.exists():
            raise DanglingDependency(f"schema '{name}' file not found: {schema_path}")
        schema_texts[name] = schema_path.read_text(encoding="ascii", errors="replace")

    raw_jobs = config.get("jobs")
    if not isinstance(raw_jobs, list) or not raw_jobs:
        raise PlanError("a plan needs a non-empty jobs list")
    jobs: dict[str, JobSpec] = {}
    for index, raw in enumerate(raw_jobs):
        job = _parse_job(raw, index, timeout)
        if job.id in jobs:
            raise PlanError(f"job id '{job.id}' is defined twice")
        jobs[job.id] = job

    for job in jobs.values():
        for dependency in job.depends_on:
            if dependency not in jobs:
                raise DanglingDependency(f"job {job.id} depends on undefined job '{dependency}'")

    try:
        TopologicalSorter({j.id: set(j.depends_on) for j in jobs.values()}).prepare()
    except CycleError as e:
        raise CycleDetected([str(node) for node in e.args[1]]) from e

    raw_comparisons = config.get("comparisons") or []
    if not isinstance(raw_comparisons, list):
        raise PlanError("comparisons must be a list")
    comparisons = tuple(
        _parse_comparison(raw, index, schemas) for index, raw in enumerate(raw_comparisons)
    )
    seen_ids = [c.id for c in comparisons]
    if len(set(seen_ids)) != len(seen_ids):
        raise PlanError("comparison ids must be unique")

    plan = Plan(
        name=str(config.get("name") or plan_path.stem),
        path=plan_path,
        base_dir=base_dir,
        jobs=jobs,
        comparisons=comparisons,
        schemas=schemas,
        timeout=timeout,
        parallel=parallel,
        fingerprint=plan_fingerprint(config, schema_texts),
    )
    check_output_conflicts(plan)

    declared = {plan.resolve(p) for job in jobs.values() for p in (*job.inputs, *job.outputs)}
    for comparison in comparisons:
        plan.file_spec(comparison)
        for side in (comparison.legacy, comparison.modern):
            if plan.resolve(side) not in declared:
                raise DanglingDependency(
                    f"comparison {comparison.id} reads {side}, which no job declares"
                )
    return plan


def check_output_conflicts(plan: Plan) -> None:
    """Reject declared outputs shared by jobs with no ordering between them."""
    ancestors = plan.ancestors()
    writers: dict[Path, list[tuple[str, str]]] = {}
    for job in plan.jobs.values():
        for output in job.outputs:
            writers.setdefault(plan.resolve(output), []).append((job.id, output))
    for declared in writers.values():
        for i, (first, output) in enumerate(declared):
            for second, _ in declared[i + 1 :]:
                if first == second:
                    continue
                if first in ancestors[second] or second in ancestors[first]:
                    continue
                raise OutputConflict(first, second, output)


def load_plan(path: str | Path) -> Plan:
    return validate_plan(load_yaml(path), path)


# Execution


class JobResult(NamedTuple):
    id: str
    status: JobStatus
    exit_code: int | None = None
    message: str = ""
    started: float = 0.0
    finished: float = 0.0

    def body(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "status": self.status.value,
            "exit_code": self.exit_code,
            "message": self.message,
        }

    @classmethod
    def from_report(cls, body: Mapping[str, Any], timing: Mapping[str, Any]) -> "JobResult":
        return cls(
            id=body["id"],
            status=JobStatus(body["status"]),
            exit_code=body.get("exit_code"),
            message=body.get("message", ""),
            started=float(timing.get("started", 0.0)),
            finished=float(timing.get("finished", 0.0)),
        )


class ComparisonOutcome(NamedTuple):
    id: str
    verdict: Verdict
    legacy: str
    modern: str
    detail: dict[str, Any]
    message: str = ""

    def body(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "verdict": self.verdict.value,
            "legacy": self.legacy,
            "modern": self.modern,
            "message": self.message,
            "detail": self.detail,
        }

    @classmethod
    def from_report(cls, body: Mapping[str, Any]) -> "ComparisonOutcome":
        return cls(
            id=body["id"],
            verdict=Verdict(body["verdict"]),
            legacy=body["legacy"],
            modern=body["modern"],
            detail=dict(body.get("detail") or {}),
            message=body.get("message", ""),
        )


class EquivalenceReport(NamedTuple):
    run_id: str
    plan_name: str
    fingerprint: str
    started_at: str
    finished_at: str
    jobs: tuple[JobResult, ...]
    comparisons: tuple[ComparisonOutcome, ...]

    @property
    def verdict(self) -> Verdict:
        jobs_ok = all(job.status is JobStatus.PASS for job in self.jobs)
        compared_ok = all(c.verdict is Verdict.PASS for c in self.comparisons)
        return Verdict.PASS if jobs_ok and compared_ok else Verdict.FAIL

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def header(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "timings": {
                job.id: {
                    "started": round(job.started, 6),
                    "finished": round(job.finished, 6),
                    "seconds": round(job.finished - job.started, 6),
                }
                for job in self.jobs
            },
        }

    def body(self) -> dict[str, Any]:
        """Everything that must be identical across runs over identical outputs."""
        return {
            "plan": self.plan_name,
            "fingerprint": self.fingerprint,
            "verdict": self.verdict.value,
            "jobs": [job.body() for job in self.jobs],
            "comparisons": [c.body() for c in self.comparisons],
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "header": self.header(),
            "body": self.body(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EquivalenceReport":
        if data.get("format_version") != REPORT_FORMAT_VERSION:
            raise ConfigError(f"unsupported report format {data.get('format_version')!r}")
        header, body = data["header"], data["body"]
        timings = header.get("timings", {})
        return cls(
            run_id=header["run_id"],
            plan_name=body["plan"],
            fingerprint=body["fingerprint"],
            started_at=header["started_at"],
            finished_at=header["finished_at"],
            jobs=tuple(JobResult.from_report(j, timings.get(j["id"], {})) for j in body["jobs"]),
            comparisons=tuple(ComparisonOutcome.from_report(c) for c in body["comparisons"]),
        )


def format_report(report: EquivalenceReport) -> str:
    lines = [
        f"Plan: {report.plan_name}",
        f"Run: {report.run_id}",
        f"Started: {report.started_at}",
        f"Finished: {report.finished_at}",
        f"Fingerprint: {report.fingerprint}",
        "",
        "Jobs:",
    ]
    for job in report.jobs:
        exit_text = f" exit={job.exit_code}" if job.exit_code is not None else ""
        message = f" - {job.message}" if job.message else ""
        lines.append(f"  {job.status.value:<13} {job.id}{exit_text}{message}")
    lines.append("")
    lines.append("Comparisons:")
    for outcome in report.comparisons:
        lines.append(f"  {outcome.verdict.value:<13} {outcome.id}: {outcome.legacy} vs {outcome.modern}")
        if outcome.message:
            lines.append(f"    {outcome.message}")
        for entry in outcome.detail.get("entries", []):
            where = f"legacy#{entry['ordinal_a'] or '-'} modern#{entry['ordinal_b'] or '-'}"
            if entry.get("key_hex"):
                where += f" key={entry['key_hex']}"
            lines.append(f"    {entry['kind']} {where}")
            for field in entry["fields"]:
                lines.append(
                    f"      {field['field']}: legacy={field['legacy_value']} "
                    f"[{field['legacy_hex']}] modern={field['modern_value']} [{field['modern_hex']}]"
                )
    lines.append("")
    lines.append(f"Verdict: {report.verdict.value}")
    return "\n".join(lines) + "\n"


def write_report(report: EquivalenceReport, report_dir: str | Path) -> Path:
    """Write report.json and report.txt; returns the JSON path."""
    target = Path(report_dir)
    target.mkdir(parents=True, exist_ok=True)
    json_path = target / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    (target / "report.txt").write_text(format_report(report), encoding="utf-8")
    logger.info("wrote report to %s", target)
    return json_path


def read_report(path: str | Path) -> EquivalenceReport:
    report_path = Path(path)
    if report_path.is_dir():
        report_path = report_path / "report.json"
    try:
        data = json.loads(report_path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"report not found: {report_path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"could not parse report {report_path}: {e}") from e
    return EquivalenceReport.from_dict(data)


def expand_command(job: JobSpec) -> list[str]:
    return [part.replace(PYTHON_TOKEN, sys.executable) for part in job.command]


def execute_job(job: JobSpec, plan: Plan, log_dir: Path | None, clock_zero: float) -> JobResult:
    """Run one job and classify its outcome; never raises for job failures."""
    started = time.monotonic() - clock_zero

    def missing_outputs() -> list[str]:
        return [o for o in job.outputs if not plan.resolve(o).exists()]

    def finish(status: JobStatus, exit_code: int | None = None, message: str = "") -> JobResult:
        return JobResult(job.id, status, exit_code, message, started, time.monotonic() - clock_zero)

    if job.external:
        missing = missing_outputs()
        if missing:
            return finish(JobStatus.FAILED, message=f"external output missing: {', '.join(missing)}")
        return finish(JobStatus.PASS)

    for output in job.outputs:
        plan.resolve(output).parent.mkdir(parents=True, exist_ok=True)
    command = expand_command(job)
    log_lines = [f"$ {' '.join(command)}"]
    try:
        try:
            completed = subprocess.run(  # nosec B603 - argument list, no shell
                command,
                cwd=plan.base_dir,
                env={**os.environ, **job.env},
                capture_output=True,
                text=True,
                timeout=job.timeout,
                check=False,
            )
        except subprocess.TimeoutExpired as e:
            raise JobTimeout(f"timed out after {job.timeout:g}s", job=job.id) from e
        except OSError as e:
            raise JobLaunchFailure(f"could not start: {e.strerror or e}", job=job.id) from e
    except JobTimeout as e:
        log_lines.append(f"# {e.message}")
        result = finish(JobStatus.TIMEOUT, message=e.message)
    except JobLaunchFailure as e:
        log_lines.append(f"# {e.message}")
        result = finish(JobStatus.LAUNCH_FAILED, message=e.message)
    else:
        log_lines += ["# stdout", completed.stdout, "# stderr", completed.stderr]
        log_lines.append(f"# exit {completed.returncode}")
        if completed.returncode != 0:
            last = completed.stderr.strip().splitlines()[-1:] if completed.stderr else []
            result = finish(
                JobStatus.FAILED, completed.returncode, last[0] if last else "nonzero exit"
            )
        elif missing := missing_outputs():
            result = finish(JobStatus.FAILED, 0, f"declared output missing: {', '.join(missing)}")
        else:
            result = finish(JobStatus.PASS, 0)

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        (log_dir / f"{job.id}.log").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    logger.info("job %s: %s", job.id, result.status.value)
    return result


def run_comparison(plan: Plan, comparison: ComparisonSpec) -> ComparisonOutcome:
    """Compare one legacy/modern file pair; format errors become an ERROR verdict."""
    try:
        spec = plan.file_spec(comparison)
        result = compare_records(
            read_records(plan.resolve(comparison.legacy), spec),
            read_records(plan.resolve(comparison.modern), spec),
            spec,
            comparison.match_by,
            comparison.ignore,
            (comparison.legacy, comparison.modern),
        )
    except (MainframeDataError, OSError) as e:
        logger.debug("comparison %s failed", comparison.id, exc_info=True)
        return ComparisonOutcome(
            comparison.id,
            Verdict.ERROR,
            comparison.legacy,
            comparison.modern,
            {},
            f"{type(e).__name__}: {e}",
        )
    verdict = Verdict.PASS if result.passed else Verdict.FAIL
    return ComparisonOutcome(
        comparison.id, verdict, comparison.legacy, comparison.modern, result.to_dict()
    )


class _Scheduler:
    """Runs jobs in dependency order on a thread pool; results are recorded by one thread."""

    def __init__(self, plan: Plan, selected: set[str], log_dir: Path | None, parallel: int):
        self.plan = plan
        self.selected = selected
        self.log_dir = log_dir
        self.parallel = parallel
        self.results: dict[str, JobResult] = {}
        self.clock_zero = time.monotonic()
        self.running_outputs: dict[Path, str] = {}
        self.guard = threading.Lock()

    def _claim(self, job: JobSpec) -> None:
        with self.guard:
            for output in job.outputs:
                path = self.plan.resolve(output)
                holder = self.running_outputs.get(path)
                if holder is not None:
                    logger.error(
                        "output guard: %s starts while %s is still writing %s", job.id, holder, path
                    )
                self.running_outputs[path] = job.id

    def _release(self, job: JobSpec) -> None:
        with self.guard:
            for output in job.outputs:
                self.running_outputs.pop(self.plan.resolve(output), None)

    def _run(self, job: JobSpec) -> JobResult:
        self._claim(job)
        try:
            return execute_job(job, self.plan, self.log_dir, self.clock_zero)
        finally:
            self._release(job)

    def run(self, previous: Mapping[str, JobResult]) -> dict[str, JobResult]:
        sorter = TopologicalSorter({j.id: set(j.depends_on) for j in self.plan.jobs.values()})
        sorter.prepare()
        pending: dict[Future[JobResult], str] = {}
        with ThreadPoolExecutor(max_workers=self.parallel, thread_name_prefix="mfkit-job") as pool:
            while sorter.is_active():
                for job_id in sorter.get_ready():
                    job = self.plan.jobs[job_id]
                    failed = [d for d in job.depends_on if self.results[d].status is not JobStatus.PASS]
                    if job_id not in self.selected and job_id in previous:
                        self.results[job_id] = previous[job_id]
                        sorter.done(job_id)
                    elif failed:
                        self.results[job_id] = JobResult(
                            job_id, JobStatus.SKIPPED, message=f"dependency failed: {', '.join(failed)}"
                        )
                        sorter.done(job_id)
                    else:
                        pending[pool.submit(self._run, job)] = job_id
                if not pending:
                    continue
                finished, _ = wait(pending, return_when=FIRST_COMPLETED)
                for future in finished:
                    job_id = pending.pop(future)
                    self.results[job_id] = future.result()
                    sorter.done(job_id)
        return self.results


def _now() -> str:
    return datetime.now(UTC).isoformat(timespec="seconds")


def _execute(
    plan: Plan,
    parallel: int | None,
    report_dir: str | Path | None,
    selected: set[str],
    previous: EquivalenceReport | None,
) -> EquivalenceReport:
    started_at = _now()
    log_dir = Path(report_dir) / "logs" if report_dir is not None else None
    previous_jobs = {job.id: job for job in previous.jobs} if previous else {}
    previous_comparisons = {c.id: c for c in previous.comparisons} if previous else {}
    results = _Scheduler(plan, selected, log_dir, parallel or plan.parallel).run(previous_jobs)

    outcomes = []
    for comparison in plan.comparisons:
        producers = [
            job.id
            for job in plan.jobs.values()
            if {plan.resolve(o) for o in job.outputs}
            & {plan.resolve(comparison.legacy), plan.resolve(comparison.modern)}
        ]
        rerun = previous is None or any(p in selected for p in producers) or (
            previous_comparisons.get(comparison.id, None) is None
            or previous_comparisons[comparison.id].verdict is not Verdict.PASS
        )
        if not rerun:
            outcomes.append(previous_comparisons[comparison.id])
            continue
        blocked = [p for p in producers if results[p].status is not JobStatus.PASS]
        if blocked:
            outcomes.append(
                ComparisonOutcome(
                    comparison.id,
                    Verdict.SKIPPED,
                    comparison.legacy,
                    comparison.modern,
                    {},
                    f"producing job(s) did not pass: {', '.join(blocked)}",
                )
            )
        else:
            outcomes.append(run_comparison(plan, comparison))

    report = EquivalenceReport(
        run_id=str(uuid.uuid4()),
        plan_name=plan.name,
        fingerprint=plan.fingerprint,
        started_at=started_at,
        finished_at=_now(),
        jobs=tuple(results[job_id] for job_id in plan.jobs),
        comparisons=tuple(outcomes),
    )
    if report_dir is not None:
        write_report(report, report_dir)
    return report


def run_plan(
    plan: Plan, parallelism: int | None = None, report_dir: str | Path | None = None
) -> EquivalenceReport:
    """
    Execute every job in dependency order, then every comparison.

    A job that does not pass marks its dependents SKIPPED. The verdict is
    PASS only when all jobs and all comparisons pass.
    """
    if parallelism is not None and parallelism < 1:
        raise ConfigError("parallelism must be at least 1")
    logger.info("running plan %s with %d job(s)", plan.name, len(plan.jobs))
    return _execute(plan, parallelism, report_dir, set(plan.jobs), None)


def rerun_failed(
    previous: EquivalenceReport,
    plan: Plan,
    parallelism: int | None = None,
    report_dir: str | Path | None = None,
) -> EquivalenceReport:
    """
    Re-execute the jobs that did not pass and the comparisons they feed.

    Passing jobs keep their previous results. A previous all-PASS report is
    returned unchanged.
    """
    if previous.fingerprint != plan.fingerprint:
        raise PlanChanged(
            "plan or schemas changed since the previous run; run the full plan again",
            previous=previous.fingerprint[:12],
            current=plan.fingerprint[:12],
        )
    if previous.passed:
        logger.info("previous run passed; nothing to re-run")
        return previous
    selected = {job.id for job in previous.jobs if job.status is not JobStatus.PASS}
    logger.info("re-running %d job(s): %s", len(selected), ", ".join(sorted(selected)))
    return _execute(plan, parallelism, report_dir, selected, previous)


def _summarize(report: EquivalenceReport, report_dir: str | None) -> int:
    print(format_report(report), end="")
    if report_dir:
        print(f"📋 Report written to {report_dir}", file=sys.stderr)
    if report.passed:
        print("✅ PASS: legacy and modern outputs are equivalent", file=sys.stderr)
        return 0
    print("❌ FAIL: see the report for failing jobs and mismatches", file=sys.stderr)
    return 1


def _cmd_validate(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    print(f"plan={plan.name} jobs={len(plan.jobs)} comparisons={len(plan.comparisons)}")
    print(f"fingerprint={plan.fingerprint}")
    print(f"✅ Plan {args.plan} is valid", file=sys.stderr)
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    report_dir = args.report_dir or str(plan.base_dir / "report")
    return _summarize(run_plan(plan, args.parallel, report_dir), report_dir)


def _cmd_rerun(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    previous = read_report(args.previous)
    report_dir = args.report_dir or str(plan.base_dir / "report")
    return _summarize(rerun_failed(previous, plan, args.parallel, report_dir), report_dir)


def build_parser() -> argparse.ArgumentParser:
    from mf_console import add_logging_arguments

    parser = argparse.ArgumentParser(
        prog="mfkit harness",
        description="Run legacy and modernized jobs side by side and compare their outputs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Reject cycles and unordered jobs writing the same file
  mfkit harness validate demo/billing/plan.yaml

  # Run with two jobs at a time, report into ./report
  mfkit harness run demo/billing/plan.yaml --parallel 2 --report-dir report

  # Re-run only what failed last time
  mfkit harness rerun demo/billing/plan.yaml --from report/report.json

Exit codes: 0 PASS, 1 FAIL, 2 plan error
        """,
    )
    add_logging_arguments(parser)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    validate_cmd = commands.add_parser("validate", help="check a plan without running it")
    validate_cmd.add_argument("plan", help="plan YAML file")
    validate_cmd.set_defaults(handler=_cmd_validate)

    for name, handler, help_text in (
        ("run", _cmd_run, "run every job and comparison"),
        ("rerun", _cmd_rerun, "re-run failed and skipped jobs from a previous report"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("plan", help="plan YAML file")
        sub.add_argument("--parallel", type=int, help="maximum concurrent jobs")
        sub.add_argument("--report-dir", help="report directory (default: report/ beside the plan)")
        if name == "rerun":
            sub.add_argument("--from", dest="previous", required=True, help="previous report.json")
        sub.set_defaults(handler=handler)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point for `mfkit harness`."""
    from mf_console import run_cli

    return run_cli(build_parser(), argv)


if __name__ == "__main__":
    sys.exit(main())
