import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime

from models.types import CSV_FIELDS, CheckResult, EstimatorRecord, RateFit


ARTIFACT_VERSION = "0.1.0"
MASKED_COLUMNS = ("runtime_seconds",)


@dataclass
class OutputFile:
    """One file written during a run"""

    path: str
    kind: str  # 'csv', 'jsonl'
    subcommand: str
    rows: int
    sha256_masked: str | None = None


@dataclass
class RunManifest:
    """Everything needed to reproduce and audit a run"""

    config_path: str | None
    config: dict
    out_dir: str
    version: str
    started_at: str
    finished_at: str | None = None
    exit_status: dict[str, int] = field(default_factory=dict)
    outputs: list[OutputFile] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    fits: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def masked_csv_body(text: str) -> str:
    """CSV text with the wall-clock columns blanked"""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        return ""
    masked = [i for i, name in enumerate(rows[0]) if name in MASKED_COLUMNS]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(rows[0])
    for row in rows[1:]:
        writer.writerow(["" if i in masked else value for i, value in enumerate(row)])
    return out.getvalue()


def csv_digest(path: str) -> str:
    """SHA-256 of the masked CSV body"""
    with open(path, newline="") as f:
        body = masked_csv_body(f.read())
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


class RunRecorder:
    """Writes CSV/JSONL results and the run manifest"""

    def __init__(
        self,
        out_dir: str,
        seed: int,
        config: dict,
        config_path: str | None = None,
        keep_replicas: bool = False,
        quiet: bool = False,
    ):
        self.out_dir = out_dir
        self.seed = seed
        self.keep_replicas = keep_replicas
        self.quiet = quiet
        self.timestamp = datetime.now().strftime("%Y%m%dT%H%M%S")
        os.makedirs(out_dir, exist_ok=True)
        self.manifest = RunManifest(
            config_path=config_path,
            config=config,
            out_dir=os.path.abspath(out_dir),
            version=ARTIFACT_VERSION,
            started_at=datetime.now().isoformat(),
        )
        self.records: list[EstimatorRecord] = []
        self.check_results: list[CheckResult] = []

    def _path(self, quantity: str, suffix: str) -> str:
        return os.path.join(self.out_dir, f"{quantity}-{self.timestamp}-{self.seed}.{suffix}")

    def _register(self, path: str, kind: str, subcommand: str, rows: int) -> None:
        digest = csv_digest(path) if kind == "csv" else None
        self.manifest.outputs.append(
            OutputFile(path=path, kind=kind, subcommand=subcommand, rows=rows, sha256_masked=digest)
        )
        if not self.quiet:
            print(f"📁 Wrote {rows} rows to {path}")

    def write_records(self, quantity: str, records: list[EstimatorRecord], subcommand: str) -> str:
        """
        Write estimator records as CSV (fixed schema) and JSONL (with config echo)

        Args:
            quantity: File stem, e.g. 'cost'
            records: Records in output order
            subcommand: Subcommand that produced them

        Returns:
            Path of the CSV file
        """
        csv_path = self._path(quantity, "csv")
        with open(csv_path, "w", newline="") as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=CSV_FIELDS, lineterminator="\n")
            writer.writeheader()
            for record in records:
                writer.writerow(record.to_csv_row())
        self._register(csv_path, "csv", subcommand, len(records))

        jsonl_path = self._path(quantity, "jsonl")
        with open(jsonl_path, "w") as f:
            for record in records:
                entry = record.to_dict(keep_replicas=self.keep_replicas)
                entry["config"] = self.manifest.config
                f.write(json.dumps(entry, sort_keys=True) + "\n")
        self._register(jsonl_path, "jsonl", subcommand, len(records))

        self.records.extend(records)
        return csv_path

    def write_table(self, quantity: str, fieldnames: list[str], rows: list[dict], subcommand: str) -> str:
        """Write a deterministic table (no estimator schema) as CSV"""
        path = self._path(quantity, "csv")
        with open(path, "w", newline="") as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        self._register(path, "csv", subcommand, len(rows))
        return path

    def record_checks(self, subcommand: str, checks: list[CheckResult]) -> bool:
        """Store acceptance checks; returns True when all passed"""
        for check in checks:
            entry = check.to_dict()
            entry["subcommand"] = subcommand
            self.manifest.checks.append(entry)
            self.check_results.append(check)
            if not self.quiet:
                mark = "✓" if check.passed else "✗"
                print(f"  {mark} {check.name}: {check.value:.6g} (tolerance {check.tolerance:.3g})")
        return all(check.passed for check in checks)

    def record_fit(self, subcommand: str, name: str, fit: RateFit) -> None:
        entry = fit.to_dict()
        entry.update({"subcommand": subcommand, "name": name})
        self.manifest.fits.append(entry)

    def record_error(self, subcommand: str, error: Exception) -> None:
        """Keep the message (and the offending key or replica, when known) of a failed subcommand"""
        entry = {"subcommand": subcommand, "type": type(error).__name__, "error": str(error)}
        for attribute in ("key", "seed", "replica"):
            value = getattr(error, attribute, None)
            if value is not None:
                entry[attribute] = value
        self.manifest.errors.append(entry)

    def finish_subcommand(self, subcommand: str, exit_code: int) -> None:
        self.manifest.exit_status[subcommand] = exit_code

    def write_manifest(self) -> str:
        """Write manifest.json into the output directory"""
        self.manifest.finished_at = datetime.now().isoformat()
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w") as f:
            json.dump(self.manifest.to_dict(), f, indent=2, default=str)
        if not self.quiet:
            print(f"📁 Manifest written to {path}")
        return path

    def print_summary(self) -> None:
        """Print a human-readable summary of the run"""
        if self.quiet:
            return
        print(f"\n📊 Run Summary (seed {self.seed}, started {self.manifest.started_at})")
        print("=" * 80)
        print(f"Records: {len(self.records)}")
        for record in self.records:
            t = "-" if record.t is None else f"{record.t:.4g}"
            print(
                f"  {record.quantity}: n={record.n} t={t} R={record.R} "
                f"mean={record.mean:.6g} ± {record.stderr:.2g} ({record.runtime_seconds:.1f}s)"
            )
        if self.check_results:
            passed = sum(check.passed for check in self.check_results)
            print(f"\nChecks: {passed}/{len(self.check_results)} passed")
        for name, code in self.manifest.exit_status.items():
            mark = "✓" if code == 0 else "✗"
            print(f"  {mark} {name}: exit {code}")
