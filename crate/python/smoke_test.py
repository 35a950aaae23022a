"""Smoke test for the ferbench Python extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/ferbench-*.whl
"""

import json
import sys
import tempfile
from pathlib import Path

import ferbench_py as fb


def check(name, ok):
    print(f"{'ok  ' if ok else 'FAIL'} {name}")
    return ok


def main():
    results = []

    t = fb.PerformanceTensor()
    for m, a, b, v in [
        ("m1", "A", "A", 0.9), ("m1", "A", "B", 0.5), ("m1", "B", "A", 0.4), ("m1", "B", "B", 0.8),
        ("m2", "A", "A", 0.7), ("m2", "A", "B", 0.3), ("m2", "B", "A", 0.6), ("m2", "B", "B", 0.6),
    ]:
        t.insert(m, a, b, v)
    r = fb.SimilarityReport(t)
    results.append(check("hand tensor LS", abs(r.ls("A") - 0.8) < 1e-12 and abs(r.ls("B") - 0.7) < 1e-12))
    results.append(check("hand tensor GS", abs(r.gs("A") - 0.4) < 1e-12 and abs(r.gs("B") - 0.5) < 1e-12))
    results.append(check("PS diagonal", r.ps("A", "A") == 1.0 and r.ps("B", "B") == 1.0))
    results.append(check("PS off-diagonal", abs(r.ps("A", "B") - 0.4 / 0.7) < 1e-12))
    results.append(check("report json", set(json.loads(r.to_json())["datasets"]) == {"A", "B"}))

    lone = fb.PerformanceTensor.from_csv(
        "architecture_id,train_dataset,test_dataset,score,fold_count\nm,A,B,0.3,1\n"
    )
    results.append(check("missing PS", fb.SimilarityReport(lone).ps_status("A", "B") == "missing"))

    results.append(check("macro F1", abs(fb.macro_f1([[3, 1], [2, 4]]) - 0.697) < 1e-3))
    try:
        fb.macro_f1([[0, 0], [0, 0]])
        results.append(check("undefined F1 raises", False))
    except ValueError:
        results.append(check("undefined F1 raises", True))
    results.append(check("uniform_five", fb.sample_frames(100, "uniform_five") == [0, 25, 50, 74, 99]))
    results.append(check("class map", fb.unify_label(" Happiness ") == "happiness" and fb.unify_label("joy", "WSEFEP") == "happiness" and fb.unify_label("boredom") is None))
    results.append(check("early stop", fb.early_stop_decision([0.5] * 6) == "stop"))

    with tempfile.TemporaryDirectory() as tmp:
        cfg = fb.write_synthetic_run(Path(tmp), 2)
        for stage in fb.STAGES[:6]:
            fb.run_stage(stage, cfg, datasets=["GlyphClean"])
        m = fb.DatasetManifest.read(Path(tmp) / "run" / "manifests" / "final" / "GlyphClean.jsonl")
        results.append(check("pipeline manifest", m.included_count() > 0 and not m.validate()))
        results.append(check("exclusions recorded", sum(m.exclusion_reasons().values()) == len(m) - m.included_count()))
        plan = fb.run_stage("train", cfg, datasets=["GlyphClean"], dry_run=True)
        results.append(check("dry run plan", plan == ["train tiny on GlyphClean fold 0", "train tiny on GlyphClean fold 1"]))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
