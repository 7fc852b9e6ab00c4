"""Batch convergence studies and table output."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache

from .analysis import ErrorReport, error_report, observed_order
from .hdg import DiscretizationConfig, MethodVariant, solve
from .mesh import generate_structured
from .problems import get_problem

MAX_K = 3
MAX_KL = 6
ZERO_ERROR = 1e-12
FLAG_MARGIN = 0.2

CSV_COLUMNS = [
    "variant", "k", "l", "n",
    "err_q", "order_q", "err_u", "order_u", "err_jump", "order_jump",
]


class StudyError(RuntimeError):
    pass


@dataclass
class StudyConfig:
    problem: str = "paper-sin"
    variants: list = field(default_factory=lambda: ["PROJ"])
    k: list = field(default_factory=lambda: [1])
    l: list = field(default_factory=lambda: [0])
    levels: list = field(default_factory=lambda: [10, 20, 40, 80])
    tau_coeff: float = 1.0
    format: str = "csv"
    out: str | None = None

    def __post_init__(self):
        self.variants = [MethodVariant.parse(v).value for v in _as_list(self.variants)]
        self.k = [int(v) for v in _as_list(self.k)]
        self.l = [int(v) for v in _as_list(self.l)]
        self.levels = [int(v) for v in _as_list(self.levels)]
        self.validate()

    def validate(self):
        get_problem(self.problem)
        if not self.variants:
            raise ValueError("at least one variant is required")
        if not self.levels or any(n < 1 for n in self.levels):
            raise ValueError("mesh levels must be positive integers")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError(f"mesh levels must be strictly increasing, got {self.levels}")
        for k in self.k:
            if not 0 <= k <= MAX_K:
                raise ValueError(f"k must be in [0, {MAX_K}], got {k}")
        for l in self.l:
            if l < 0:
                raise ValueError(f"l must be >= 0, got {l}")
        if self.k and self.l and max(self.k) + max(self.l) > MAX_KL:
            raise ValueError(f"k + l must not exceed {MAX_KL}")
        if not self.tau_coeff > 0:
            raise ValueError("tau coefficient must be positive")
        if self.format not in ("csv", "md"):
            raise ValueError(f"format must be 'csv' or 'md', got {self.format!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path, **overrides) -> "StudyConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def _as_list(value):
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


@dataclass(frozen=True)
class ConvergenceRecord:
    variant: str
    k: int
    l: int
    n: int
    report: ErrorReport
    order_q: float | None = None
    order_u: float | None = None
    order_jump: float | None = None

    @property
    def has_orders(self) -> bool:
        return any(o is not None for o in (self.order_q, self.order_u, self.order_jump))


def _order(prev: ErrorReport, cur: ErrorReport, attr: str):
    e1, e2 = getattr(prev, attr), getattr(cur, attr)
    if e1 <= ZERO_ERROR or e2 <= ZERO_ERROR:
        return None
    return observed_order((prev.h_global, e1), (cur.h_global, e2))


def _threads() -> int:
    cap = os.environ.get("HDG_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise StudyError(f"HDG_THREADS must be an integer, got {cap!r}") from None
    return n


@lru_cache(maxsize=16)
def _mesh(n):
    return generate_structured(n)


def _run_one(problem_id, variant, k, l, n, tau_coeff) -> ErrorReport:
    problem = get_problem(problem_id)
    try:
        mesh = _mesh(n)
        config = DiscretizationConfig(k, l, tau_coeff)
        sol = solve(mesh, config, variant, problem.f, problem.g)
        return error_report(sol, problem, n)
    except Exception as exc:
        raise StudyError(
            f"solve failed for variant={variant}, k={k}, l={l}, n={n}: {exc}"
        ) from exc


def run_study(config: StudyConfig) -> list[ConvergenceRecord]:
    """One record per (variant, k, l, n), in config order."""
    groups = list(itertools.product(config.variants, config.k, config.l))
    jobs = [(v, k, l, n) for v, k, l in groups for n in config.levels]
    workers = min(_threads(), len(jobs))

    def work(job):
        return _run_one(config.problem, *job, config.tau_coeff)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(work, jobs))
    else:
        reports = [work(j) for j in jobs]

    records = []
    for (v, k, l, n), rep in zip(jobs, reports):
        prev = records[-1] if records and (records[-1].variant, records[-1].k, records[-1].l) == (v, k, l) else None
        if prev is None:
            records.append(ConvergenceRecord(v, k, l, n, rep))
        else:
            records.append(ConvergenceRecord(
                v, k, l, n, rep,
                _order(prev.report, rep, "err_q"),
                _order(prev.report, rep, "err_u"),
                _order(prev.report, rep, "err_jump"),
            ))
    return records


def _fmt(x):
    return "" if x is None else f"{x:.6e}"


def _csv_rows(records):
    for r in records:
        yield [
            r.variant, r.k, r.l, r.n,
            _fmt(r.report.err_q), _fmt(r.order_q),
            _fmt(r.report.err_u), _fmt(r.order_u),
            _fmt(r.report.err_jump), _fmt(r.order_jump),
        ]


def _group_key(r):
    return (r.variant, r.k)


def _markdown(records) -> str:
    r0 = records[0]
    lines = [
        f"**{r0.variant}, k = {r0.k}**",
        "",
        "| l | 1/h | err q | order | err u | order | err jump | order |",
        "|---|---|---|---|---|---|---|---|",
    ]
    last_l = None

    def o(x):
        return "--" if x is None else f"{x:.2f}"

    for r in records:
        lab = str(r.l) if r.l != last_l else ""
        last_l = r.l
        lines.append(
            f"| {lab} | {r.n} | {r.report.err_q:.3e} | {o(r.order_q)} "
            f"| {r.report.err_u:.3e} | {o(r.order_u)} "
            f"| {r.report.err_jump:.3e} | {o(r.order_jump)} |"
        )
    return "\n".join(lines) + "\n"


def emit_table(records, fmt: str = "csv") -> str:
    """Table for records of a single (variant, k) group."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    if len({_group_key(r) for r in records}) != 1:
        raise ValueError("emit_table expects records from a single (variant, k) group")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(_csv_rows(records))
        return buf.getvalue()
    if fmt == "md":
        return _markdown(records)
    raise ValueError(f"unknown format {fmt!r}")


def group_records(records):
    groups = {}
    for r in records:
        groups.setdefault(_group_key(r), []).append(r)
    return list(groups.values())


def emit_study(records, fmt: str = "csv") -> str:
    """All groups of a study: one CSV with a single header, or one markdown
    table per (variant, k)."""
    parts = [emit_table(g, fmt) for g in group_records(records)]
    if fmt == "csv":
        return parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    return "\n".join(parts)


def parse_csv(text: str) -> list[dict]:
    """Rows of an emitted CSV with numeric fields converted (empty -> None)."""
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        out = {"variant": row["variant"], "k": int(row["k"]), "l": int(row["l"]), "n": int(row["n"])}
        for col in CSV_COLUMNS[4:]:
            out[col] = float(row[col]) if row[col] else None
        rows.append(out)
    return rows


def expected_orders(k: int) -> dict:
    return {"q": k + 1.0, "u": k + 2.0, "jump": k + 1.0}


def compare_records(records) -> tuple[str, bool]:
    """Finest-pair orders per (k, l) and variant.  Entries more than
    ``FLAG_MARGIN`` below the optimal order are starred; returns the table and
    whether anything was flagged."""
    finest = {}
    for r in records:
        finest[(r.k, r.l, r.variant)] = r
    variants = list(dict.fromkeys(r.variant for r in records))
    kls = list(dict.fromkeys((r.k, r.l) for r in records))

    header = ["k", "l", "variant", "n", "order_q", "order_u", "order_jump"]
    lines = ["  ".join(f"{h:>10}" for h in header)]
    flagged = False
    for k, l in kls:
        exp = expected_orders(k)
        for v in variants:
            r = finest.get((k, l, v))
            if r is None:
                continue
            cells = [str(k), str(l), v, str(r.n)]
            for name, val in (("q", r.order_q), ("u", r.order_u), ("jump", r.order_jump)):
                if val is None:
                    cells.append("-")
                    continue
                bad = val < exp[name] - FLAG_MARGIN
                flagged |= bad
                cells.append(f"{val:.2f}" + ("*" if bad else ""))
            lines.append("  ".join(f"{c:>10}" for c in cells))
    lines.append("")
    lines.append(f"* = more than {FLAG_MARGIN} below the optimal order (q: k+1, u: k+2, jump: k+1)")
    return "\n".join(lines) + "\n", flagged


def compare_methods(config: StudyConfig, records=None) -> str:
    if len(config.variants) < 2:
        raise ValueError("compare needs at least two variants")
    if records is None:
        records = run_study(config)
    return compare_records(records)[0]
