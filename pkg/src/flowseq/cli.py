"""Command-line front-end: synth, build-dict, recognize, eval.

Machine-readable output goes to stdout as JSON; diagnostics go to stderr.
Exit codes: 0 success, 2 input error, 3 build/alignment error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .dictionary import (
    GestureDictionary,
    fit_entry,
    load_dictionary,
    save_dictionary,
    strip_importance,
)
from .eigenspace import fit, project, vectorize
from .errors import CorruptDictionaryError, DegenerateDataError, InvalidInputError
from .flow import (
    BlobTrack,
    FlowParams,
    SyntheticGestureSpec,
    load_flows,
    save_flows,
    synthesize,
)
from .matcher import match_result_json, recognize
from .segmentation import SegmentationParams, segment

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUILD = 3


class BuildError(Exception):
    """Raised for failures that map to exit code 3."""


@dataclass
class RunConfig:
    """Tunable pipeline parameters, overridable from a JSON config file."""

    angle_threshold: float = 45.0
    min_frames: int = 3
    superposition: str = "earliest"
    block_radius: int = 2
    search_radius: int = 3
    min_texture: float = 1e-4
    magnitude_floor: float = 0.5
    k: int = 4
    tau: float = 3.0
    ridge: float | None = None
    seed: int = 0

    @classmethod
    def from_file(cls, path: str | None) -> "RunConfig":
        cfg = cls()
        if path is None:
            return cfg
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"cannot parse config {path}: {e}") from e
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise InvalidInputError(f"unknown config keys in {path}: {unknown}")
        for key, value in obj.items():
            setattr(cfg, key, value)
        return cfg

    def segmentation_params(self) -> SegmentationParams:
        return SegmentationParams(self.angle_threshold, self.min_frames, self.superposition)

    def flow_params(self) -> FlowParams:
        return FlowParams(
            self.block_radius, self.search_radius, self.min_texture, self.magnitude_floor
        )


def _parse_gesture_spec(obj: dict) -> SyntheticGestureSpec:
    try:
        blobs = tuple(
            BlobTrack(
                start=tuple(rec["start"]),
                velocity=rec["velocity"],
                radius=float(rec["radius"]),
                active=tuple(rec["active"]),
            )
            for rec in obj.get("blobs", [])
        )
        return SyntheticGestureSpec(
            width=int(obj["width"]),
            height=int(obj["height"]),
            frame_count=int(obj["frames"]),
            blobs=blobs,
            dt=float(obj.get("dt", 1.0)),
            noise=float(obj.get("noise", 0.0)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise InvalidInputError(f"malformed gesture spec: {e}") from e


def _load_manifest(path) -> list[dict]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, list):
        raise InvalidInputError(f"manifest {path} must be a JSON list")
    base = Path(path).parent
    records = []
    for rec in obj:
        if "name" not in rec or "files" not in rec:
            raise InvalidInputError(f"manifest {path}: records need 'name' and 'files'")
        records.append(
            {
                "name": str(rec["name"]),
                "files": [str((base / f)) for f in rec["files"]],
                "important": [int(i) for i in rec.get("important", [])],
            }
        )
    return records


def _query_features(seq, dictionary: GestureDictionary, params: SegmentationParams):
    pas = segment(seq, params)
    if len(pas) == 0:
        raise InvalidInputError("query contains no partial actions after segmentation")
    return [project(dictionary.eigenspace, vectorize(a)) for a in pas]


def cmd_synth(args, cfg: RunConfig) -> int:
    try:
        obj = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"cannot parse gesture spec {args.spec}: {e}") from e
    spec = _parse_gesture_spec(obj)
    seed = cfg.seed if args.seed is None else args.seed
    seq = synthesize(spec, seed=seed)
    save_flows(seq, args.out)
    print(json.dumps({"out": str(args.out), "frames": len(seq.frames), "seed": seed}))
    return EXIT_OK


def cmd_build_dict(args, cfg: RunConfig) -> int:
    records = _load_manifest(args.manifest)
    if not records:
        raise InvalidInputError(f"manifest {args.manifest} lists no gestures")
    seg_params = cfg.segmentation_params()

    decomposed: list[tuple[dict, list]] = []
    dims = set()
    for rec in records:
        if len(rec["files"]) < 2:
            raise BuildError(f"gesture {rec['name']!r}: needs at least 2 repetitions")
        reps = []
        for f in rec["files"]:
            seq = load_flows(f)
            dims.add((seq.width, seq.height))
            reps.append(segment(seq, seg_params))
        decomposed.append((rec, reps))
    if len(dims) > 1:
        raise InvalidInputError(f"training sequences disagree on dimensions: {sorted(dims)}")

    all_vectors = [
        vectorize(action)
        for _, reps in decomposed
        for rep in reps
        for action in rep
    ]
    try:
        model = fit(all_vectors, cfg.k)
    except (InvalidInputError, DegenerateDataError) as e:
        raise BuildError(f"eigenspace fit failed: {e}") from e

    entries = []
    for rec, reps in decomposed:
        feature_reps = [[project(model, vectorize(a)) for a in rep] for rep in reps]
        try:
            entries.append(
                fit_entry(rec["name"], feature_reps, rec["important"], cfg.ridge)
            )
        except (InvalidInputError, DegenerateDataError) as e:
            raise BuildError(str(e)) from e
    try:
        dictionary = GestureDictionary(model, tuple(entries), cfg.tau)
    except InvalidInputError as e:
        raise BuildError(str(e)) from e
    save_dictionary(dictionary, args.out)
    print(
        json.dumps(
            {
                "out": str(args.out),
                "entries": [e.name for e in dictionary.entries],
                "k": model.k,
                "tau": dictionary.match_threshold,
            }
        )
    )
    return EXIT_OK


def cmd_recognize(args, cfg: RunConfig) -> int:
    dictionary = load_dictionary(args.dictionary)
    if args.no_focus:
        dictionary = strip_importance(dictionary)
    seq = load_flows(args.query)
    features = _query_features(seq, dictionary, cfg.segmentation_params())
    ranked = recognize(dictionary, features)
    payload = [match_result_json(name, res) for name, res in ranked]
    text = json.dumps(payload)
    print(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    dictionary = load_dictionary(args.dictionary)
    unfocused = strip_importance(dictionary)
    records = _load_manifest(args.manifest)
    seg_params = cfg.segmentation_params()

    per_gesture: dict[str, dict[str, int]] = {}
    for rec in records:
        stats = per_gesture.setdefault(
            rec["name"], {"count": 0, "focused_hits": 0, "unfocused_hits": 0}
        )
        for f in rec["files"]:
            seq = load_flows(f)
            features = _query_features(seq, dictionary, seg_params)
            top_f = recognize(dictionary, features)[0][0]
            top_u = recognize(unfocused, features)[0][0]
            stats["count"] += 1
            stats["focused_hits"] += int(top_f == rec["name"])
            stats["unfocused_hits"] += int(top_u == rec["name"])

    table = {}
    for name, s in sorted(per_gesture.items()):
        table[name] = {
            "count": s["count"],
            "focused": s["focused_hits"] / s["count"] if s["count"] else None,
            "unfocused": s["unfocused_hits"] / s["count"] if s["count"] else None,
        }
    rates_f = [v["focused"] for v in table.values() if v["focused"] is not None]
    rates_u = [v["unfocused"] for v in table.values() if v["unfocused"] is not None]
    payload = {
        "per_gesture": table,
        "average": {
            "focused": sum(rates_f) / len(rates_f) if rates_f else None,
            "unfocused": sum(rates_u) / len(rates_u) if rates_u else None,
        },
    }

    print(f"{'gesture':<20} {'n':>4} {'focused':>9} {'unfocused':>10}", file=sys.stderr)
    for name, row in table.items():
        print(
            f"{name:<20} {row['count']:>4} {row['focused']:>9.3f} {row['unfocused']:>10.3f}",
            file=sys.stderr,
        )
    if rates_f:
        avg = payload["average"]
        print(
            f"{'average':<20} {'':>4} {avg['focused']:>9.3f} {avg['unfocused']:>10.3f}",
            file=sys.stderr,
        )

    text = json.dumps(payload)
    print(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowseq",
        description="Gesture recognition over flow sequences with important-action focusing",
    )
    parser.add_argument("--config", help="JSON config file with pipeline parameters")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic gesture spec to a .flows file")
    p.add_argument("spec", help="gesture spec JSON")
    p.add_argument("--out", required=True, help="output .flows path")
    p.add_argument("--seed", type=int, default=None, help="noise seed (overrides config)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-dict", help="build a gesture dictionary from a training manifest")
    p.add_argument("manifest", help="JSON list of {name, files, important} records")
    p.add_argument("--out", required=True, help="output .gdict path")
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("recognize", help="rank dictionary entries against a query .flows file")
    p.add_argument("dictionary", help=".gdict path")
    p.add_argument("query", help="query .flows path")
    p.add_argument("--no-focus", action="store_true", help="ignore important-action flags")
    p.add_argument("--out", help="also write the JSON ranking to this path")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("eval", help="score focused vs unfocused accuracy over a test manifest")
    p.add_argument("dictionary", help=".gdict path")
    p.add_argument("manifest", help="JSON list of {name, files} records")
    p.add_argument("--out", help="also write the JSON report to this path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        return args.func(args, cfg)
    except BuildError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUILD
    except (InvalidInputError, CorruptDictionaryError, DegenerateDataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
