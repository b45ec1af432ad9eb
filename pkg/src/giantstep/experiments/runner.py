"""Run experiments from config files and re-audit stored runs.

`run` writes one CSV set plus a JSON run-manifest (git hash, config echo,
wall time) per experiment; identical config and seeds give byte-identical
CSVs (fixed-order reductions, counter-based RNG substreams). The manifest
itself carries timing metadata and is exempt from that guarantee.
"""

from __future__ import annotations

import subprocess
import time
from pathlib import Path

from .checks import run_checks
from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig, load_config
from .io import write_json
from .kinds import KIND_RUNNERS

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class NumericalFailure(RuntimeError):
    """An experiment cell failed; message names the cell."""


def git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=10, cwd=Path(__file__).parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def run_config(cfg: ExperimentConfig) -> Path:
    runner = KIND_RUNNERS[cfg.kind]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    try:
        result = runner(cfg)
    except ConfigError:
        raise
    except Exception as exc:
        raise NumericalFailure(f"experiment {cfg.kind!r} failed: {exc}") from exc
    elapsed = time.monotonic() - start
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.kind,
        "git_hash": git_hash(),
        "wall_time_s": elapsed,
        "config_echo": cfg.raw_text,
        "config": cfg.as_dict(),
        "files": {name: str(Path(path).name) for name, path in result["files"].items()},
        "summary": result.get("summary", {}),
    }
    return write_json(cfg.output_dir / "run-manifest.json", manifest)


def run_path(config_path) -> Path:
    return run_config(load_config(config_path))


def verify_manifest(manifest_path) -> tuple[int, list[str]]:
    """Re-run the acceptance assertions attached to a stored experiment.

    Returns (exit code, report lines): 0 all pass, 1 any failure,
    2 missing files or malformed manifest.
    """
    import json

    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        return EXIT_CONFIG, [f"manifest not found: {manifest_path}"]
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = manifest_path.parent
    files = {}
    for name, rel in manifest.get("files", {}).items():
        path = base / rel
        if not path.exists():
            return EXIT_CONFIG, [f"missing output file: {path}"]
        files[name] = path
    names = manifest.get("config", {}).get("options", {}).get("acceptance", [])
    if not names:
        return EXIT_OK, [f"no criteria attached to experiment kind "
                         f"{manifest.get('experiment')!r}; nothing to verify"]
    results = run_checks(names, files, manifest.get("config", {}))
    lines = [res.line() for res in results]
    code = EXIT_OK if all(res.passed for res in results) else EXIT_CHECK_FAILED
    return code, lines
