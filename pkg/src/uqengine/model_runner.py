"""Batch evaluation of computational models at sample points.

Two model kinds are supported:

* :class:`InProcessModel` wraps a Python callable, either per sample
  (``f(x) -> scalar or vector``) or vectorized (``f(X) -> (n,) or (n, m)``).
* :class:`ExternalModel` renders an ASCII input file from a template, runs a
  command in a fresh per-sample directory and parses an output file.

Template placeholders are written ``{{name}}`` or ``{{name:FORMAT}}`` where
``FORMAT`` is a Python format spec (``{{E:.3e}}`` renders 1234.5 as
``1.234e+03``). Without a format, values are written with 17 significant
digits (``.17g``), which round-trips every double exactly.

Parallelism uses a thread pool; external models run as separate OS
processes started from those threads. Results are assembled by sample
index, so row order never depends on completion order, and a failing sample
only marks its own status.
"""

import logging
import os
import re
import signal
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ModelEvaluationError, ModelSpecError, TemplateError
from .samples import SampleSet

log = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?::([^{}]*))?\}\}")
DEFAULT_FORMAT = ".17g"


@dataclass(frozen=True)
class InProcessModel:
    """A Python callable evaluated in this process.

    ``serial_only`` forces one worker for callables that are not thread safe.
    """

    func: Callable
    output_dim: int = 1
    input_dim: int | None = None
    vectorized: bool = False
    serial_only: bool = False
    name: str = ""

    def __post_init__(self):
        if not callable(self.func):
            raise ModelSpecError("InProcessModel.func must be callable")
        if self.output_dim < 1:
            raise ModelSpecError("output_dim must be >= 1")


@dataclass(frozen=True)
class SingleFloatFile:
    """Output file containing one floating-point number."""

    path: str

    def parse(self, workdir):
        text = (Path(workdir) / self.path).read_text().strip()
        return np.array([float(text)])


@dataclass(frozen=True)
class DelimitedRow:
    """Output file whose first non-empty line holds delimited numbers."""

    path: str
    delimiter: str = ","

    def parse(self, workdir):
        lines = [ln for ln in (Path(workdir) / self.path).read_text().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{self.path} is empty")
        parts = lines[0].split(self.delimiter) if self.delimiter.strip() else lines[0].split()
        return np.array([float(p) for p in parts if p.strip()])


def template_placeholders(template_text):
    """Placeholder names in order of first appearance."""
    seen = []
    for match in PLACEHOLDER.finditer(template_text):
        if match.group(1) not in seen:
            seen.append(match.group(1))
    return seen


@dataclass(frozen=True)
class ExternalModel:
    """A third-party program driven through a text input file.

    Parameters
    ----------
    template_text : str
        Input-file template with ``{{name}}`` placeholders.
    var_names : sequence of str
        Variable names in sample-column order; must match the placeholders.
    command : sequence of str
        Argument vector run inside the per-sample working directory.
    output_parser : SingleFloatFile or DelimitedRow
    timeout : float
        Seconds before the process group is killed and the sample marked failed.
    workdir_root : str
        Parent of the ``run_000000``-style per-sample directories.
    input_filename : str
        Name of the rendered input file inside each run directory.
    """

    template_text: str
    var_names: tuple
    command: tuple
    output_parser: object
    timeout: float = 60.0
    workdir_root: str = "runs"
    input_filename: str = "input.txt"
    output_dim: int | None = None
    env: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        names = tuple(self.var_names)
        object.__setattr__(self, "var_names", names)
        object.__setattr__(self, "command", tuple(str(c) for c in self.command))
        if len(set(names)) != len(names):
            raise ModelSpecError("var_names must be distinct")
        if not self.command:
            raise ModelSpecError("command must not be empty")
        if not self.timeout > 0:
            raise ModelSpecError("timeout must be > 0")
        placeholders = set(template_placeholders(self.template_text))
        missing = sorted(placeholders - set(names))
        unused = sorted(set(names) - placeholders)
        if missing or unused:
            raise ModelSpecError(
                f"template placeholders and var_names disagree: "
                f"not in var_names {missing}, not in template {unused}"
            )
        self._check_braces()

    def _check_braces(self):
        stripped = PLACEHOLDER.sub("", self.template_text)
        pos = stripped.find("{{")
        if pos >= 0:
            raise ModelSpecError("template contains a malformed '{{' placeholder")


def render_template(template_text, var_names, sample_row):
    """Substitute sample values into a template.

    Raises
    ------
    TemplateError
        For an unknown placeholder name (the message gives its offset) or a
        bad format spec.
    """
    values = dict(zip(var_names, np.asarray(sample_row, dtype=float).ravel()))
    if len(values) != len(var_names):
        raise TemplateError("sample row length does not match var_names")
    out = []
    last = 0
    for match in PLACEHOLDER.finditer(template_text):
        name, fmt = match.group(1), match.group(2)
        if name not in values:
            raise TemplateError(f"unknown placeholder {name!r} at offset {match.start()}")
        try:
            text = format(float(values[name]), fmt.strip() if fmt else DEFAULT_FORMAT)
        except ValueError as exc:
            raise TemplateError(f"bad format {fmt!r} for {name!r} at offset {match.start()}: {exc}") from None
        out.append(template_text[last:match.start()])
        out.append(text)
        last = match.end()
    out.append(template_text[last:])
    return "".join(out)


def prepare_workdir(root, sample_index):
    """Create ``root/run_{index:06d}``; refuses to reuse a non-empty directory."""
    path = Path(root) / f"run_{int(sample_index):06d}"
    if path.exists() and any(path.iterdir()):
        raise FileExistsError(f"run directory {path} exists and is not empty")
    path.mkdir(parents=True, exist_ok=True)
    return path


@dataclass(frozen=True)
class SampleStatus:
    ok: bool
    reason: str | None = None

    def to_dict(self):
        return {"ok": self.ok} if self.ok else {"ok": False, "reason": self.reason}


@dataclass(frozen=True)
class ExecutionReport:
    """Per-sample results of :func:`run`, rows in input order.

    Failed rows of ``outputs`` are NaN.
    """

    outputs: np.ndarray
    statuses: tuple
    wall_times: np.ndarray
    parallelism: int

    @property
    def ok_mask(self):
        return np.array([s.ok for s in self.statuses], dtype=bool)

    @property
    def failed_indices(self):
        return [i for i, s in enumerate(self.statuses) if not s.ok]

    def require_ok(self):
        """Raise :class:`ModelEvaluationError` if any sample failed."""
        bad = self.failed_indices
        if bad:
            first = self.statuses[bad[0]].reason
            raise ModelEvaluationError(
                f"{len(bad)} of {len(self.statuses)} model evaluations failed "
                f"(first: sample {bad[0]}: {first})"
            )
        return self.outputs


def as_model(model, output_dim=1):
    """Wrap a bare callable as a per-sample :class:`InProcessModel`."""
    if isinstance(model, (InProcessModel, ExternalModel)):
        return model
    if callable(model):
        return InProcessModel(model, output_dim=output_dim)
    raise ModelSpecError(f"cannot interpret {model!r} as a model")


def _as_row(value, m):
    row = np.asarray(value, dtype=float).ravel()
    if m is not None and row.size != m:
        raise ValueError(f"model returned {row.size} values, expected {m}")
    return row


def _eval_inprocess_one(model, x):
    start = time.perf_counter()
    try:
        row = _as_row(model.func(x), model.output_dim)
        if not np.all(np.isfinite(row)):
            return None, SampleStatus(False, "non-finite output"), time.perf_counter() - start
        return row, SampleStatus(True), time.perf_counter() - start
    except Exception as exc:  # a failing sample must not abort the batch
        return None, SampleStatus(False, f"{type(exc).__name__}: {exc}"), time.perf_counter() - start


def _eval_inprocess_chunk(model, xs):
    start = time.perf_counter()
    try:
        out = np.asarray(model.func(xs), dtype=float)
        out = out.reshape(xs.shape[0], -1)
        if out.shape[1] != model.output_dim:
            raise ValueError(f"model returned {out.shape[1]} columns, expected {model.output_dim}")
    except Exception as exc:
        reason = f"{type(exc).__name__}: {exc}"
        dt = (time.perf_counter() - start) / max(len(xs), 1)
        return [(None, SampleStatus(False, reason), dt) for _ in range(len(xs))]
    dt = (time.perf_counter() - start) / max(len(xs), 1)
    res = []
    for row in out:
        if np.all(np.isfinite(row)):
            res.append((row, SampleStatus(True), dt))
        else:
            res.append((None, SampleStatus(False, "non-finite output"), dt))
    return res


def _kill_group(proc):
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _eval_external_one(model, x, index):
    start = time.perf_counter()
    try:
        text = render_template(model.template_text, model.var_names, x)
        workdir = prepare_workdir(model.workdir_root, index)
        (workdir / model.input_filename).write_text(text)
    except (TemplateError, OSError) as exc:
        return None, SampleStatus(False, f"{type(exc).__name__}: {exc}"), time.perf_counter() - start
    env = None if model.env is None else {**os.environ, **model.env}
    try:
        proc = subprocess.Popen(
            list(model.command), cwd=workdir, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            start_new_session=True, env=env,
        )
    except OSError as exc:
        return None, SampleStatus(False, f"could not start command: {exc}"), time.perf_counter() - start
    try:
        _, err = proc.communicate(timeout=model.timeout)
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        proc.communicate()
        return None, SampleStatus(False, f"timeout after {model.timeout} s"), time.perf_counter() - start
    if proc.returncode != 0:
        tail = err.decode(errors="replace").strip().splitlines()[-1:] if err else []
        msg = f"exit code {proc.returncode}" + (f": {tail[0]}" if tail else "")
        return None, SampleStatus(False, msg), time.perf_counter() - start
    try:
        row = _as_row(model.output_parser.parse(workdir), model.output_dim)
    except (OSError, ValueError) as exc:
        return None, SampleStatus(False, f"unparseable output: {exc}"), time.perf_counter() - start
    if not np.all(np.isfinite(row)):
        return None, SampleStatus(False, "non-finite output"), time.perf_counter() - start
    return row, SampleStatus(True), time.perf_counter() - start


def _input_dim(model):
    if isinstance(model, ExternalModel):
        return len(model.var_names)
    return model.input_dim


def run(model, samples, workers=1, index_offset=0):
    """Evaluate ``model`` at every sample.

    Parameters
    ----------
    model : InProcessModel, ExternalModel or callable
    samples : SampleSet or array_like, shape (n, d)
    workers : int
        Size of the worker pool; ``1`` is the serial reference.
    index_offset : int
        Added to the sample index when naming external run directories, so
        successive batches against one ``workdir_root`` do not collide.

    Returns
    -------
    ExecutionReport
    """
    model = as_model(model)
    x = samples.samples if isinstance(samples, SampleSet) else np.atleast_2d(np.asarray(samples, dtype=float))
    if x.ndim != 2:
        raise ModelSpecError("samples must be a 2-D array")
    n = x.shape[0]
    arity = _input_dim(model)
    if arity is not None and x.shape[1] != arity:
        raise ModelSpecError(f"model expects {arity} inputs, samples have {x.shape[1]} columns")
    workers = int(workers)
    if workers < 1:
        raise ModelSpecError("workers must be >= 1")
    if isinstance(model, InProcessModel) and model.serial_only:
        workers = 1
    workers = max(1, min(workers, n)) if n else 1

    if isinstance(model, InProcessModel) and model.vectorized:
        chunks = np.array_split(np.arange(n), workers) if n else []
        chunks = [c for c in chunks if c.size]
        if workers == 1:
            parts = [_eval_inprocess_chunk(model, x[c]) for c in chunks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda c: _eval_inprocess_chunk(model, x[c]), chunks))
        results = [r for part in parts for r in part]
    else:
        if isinstance(model, InProcessModel):
            task = lambda i: _eval_inprocess_one(model, x[i])
        else:
            task = lambda i: _eval_external_one(model, x[i], index_offset + i)
        if workers == 1:
            results = [task(i) for i in range(n)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(task, range(n)))

    m = model.output_dim
    if m is None:
        m = next((r[0].size for r in results if r[0] is not None), 1)
    outputs = np.full((n, m), np.nan)
    statuses = []
    times = np.zeros(n)
    for i, (row, status, dt) in enumerate(results):
        if status.ok and row.size != m:
            status, row = SampleStatus(False, f"returned {row.size} values, expected {m}"), None
        if status.ok:
            outputs[i] = row
        else:
            log.warning("sample %d failed: %s", index_offset + i, status.reason)
        statuses.append(status)
        times[i] = dt
    return ExecutionReport(outputs, tuple(statuses), times, workers)


def evaluate(model, x, workers=1, index_offset=0):
    """Outputs of a batch that must fully succeed, as an ``(n, m)`` array."""
    return run(model, x, workers, index_offset).require_ok()
