"""Regenerate the forged variants of the shipped corpus and relabel every fixture.

Variant ids are content hashes, so the selection below is stable across runs.
"""

from __future__ import annotations

import argparse
import json
import shutil
from pathlib import Path

from ampdiv.forge import VARIANT_MANIFEST, SteroidKind, synthesize, write_ground_truth, write_variants

SEED = 1
SELECTION: dict[str, dict[SteroidKind, tuple[str, ...]]] = {
    "subtract": {
        SteroidKind.ADD: ("add-0d0320d21e",),
        SteroidKind.DELETE: ("delete-7e191302e2",),
        SteroidKind.REPLACE: ("replace-4174db102a",),
    },
    "stack": {
        SteroidKind.ADD: ("add-84c06411df",),
        SteroidKind.DELETE: ("delete-5bfa0d9dc0",),
        SteroidKind.REPLACE: ("replace-cc1f87a0cf", "replace-a0f7dd4109"),
    },
    "sensor": {
        SteroidKind.DELETE: ("delete-1e87a435cb",),
        SteroidKind.REPLACE: ("replace-1edde689e4", "replace-cc97fcd253"),
    },
    "bimap": {SteroidKind.REPLACE: ("replace-1f2b329db8",)},
    "filestore": {SteroidKind.REPLACE: ("replace-e4032e7608",)},
}


def forged(fixture: Path) -> list[Path]:
    kinds = {k.value for k in SteroidKind}
    return [p.parent for p in sorted(fixture.glob(f"variants/*/{VARIANT_MANIFEST}"))
            if json.loads(p.read_text(encoding="utf-8")).get("kind") in kinds]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("corpus", type=Path, nargs="?", default=Path(__file__).resolve().parents[1] / "corpus")
    args = parser.parse_args()
    for name, plan in SELECTION.items():
        fixture = args.corpus / name
        for old in forged(fixture):
            shutil.rmtree(old)
        for kind, ids in plan.items():
            result = synthesize(fixture / "src", fixture / "tests", kind, budget=10_000, rng_seed=SEED)
            chosen = {v.variant_id: v for v in result.accepted if v.variant_id in ids}
            missing = set(ids) - set(chosen)
            if missing:
                raise SystemExit(f"{name}: {sorted(missing)} are no longer sosies")
            write_variants(fixture, [chosen[i] for i in ids])
        truth = write_ground_truth(fixture)
        print(name, {vid: label["diverse"] for vid, label in truth.items()})


if __name__ == "__main__":
    main()
