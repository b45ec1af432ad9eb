#!/usr/bin/env python3
"""Render publication figures from experiment CSVs.

Usage:
    python plots/render.py <figure-spec.toml> [more specs ...]

Each spec names one of five figure kinds, its input CSVs (paths relative
to the spec file) and optional guide overlays; see plots/specs/ for one
example per experiment kind. Exits nonzero naming the offending file or
column on schema mismatch.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from renderlib import SpecError, render_spec  # noqa: E402


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print(__doc__, file=sys.stderr)
        return 2
    code = 0
    for spec_path in argv:
        try:
            out = render_spec(spec_path)
            print(f"wrote {out}")
        except SpecError as exc:
            print(f"{spec_path}: {exc}", file=sys.stderr)
            code = 1
        except FileNotFoundError as exc:
            print(f"{spec_path}: {exc}", file=sys.stderr)
            code = 1
    return code


if __name__ == "__main__":
    sys.exit(main())
