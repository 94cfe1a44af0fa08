"""Batch experiment runner.

Modes: ``build`` runs the generic builder and verifies the result,
``verify`` re-checks a previously written run, ``tower`` grows a staged
representation, and ``words`` dumps classification and stride tables for
a word list.  Exit codes: 0 success, 1 task or verification failure,
2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .coding import TargetBits, code_step
from .families import ConstraintTable, build_family
from .forcing import Condition, HitTarget, PosetContext
from .generic import (
    ConstraintTask,
    GenericApproximation,
    HitTask,
    TaskFailure,
    TaskList,
    canonical_json,
    read_log,
    run_builder,
    verify_generic,
    write_log,
)
from .perms import build_ground_representation
from .tower import run_tower, stage_decode, write_tower
from .words import Word, classify, parse, render


class ConfigError(ValueError):
    pass


def _require_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def _parse_word(text: str, where: str) -> Word:
    try:
        return parse(text)
    except ValueError as exc:
        raise ConfigError(f"bad word {text!r} in {where}: {exc}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    _require_keys(data, {
        "seed", "out", "ground", "family", "eligible", "targets",
        "tasks", "words", "tower",
    }, "config root")
    return data


def build_target(spec: dict, ctx_family) -> HitTarget:
    _require_keys(spec, {"kind", "m", "xi", "slope", "offset"}, "hit target")
    kind = spec.get("kind")
    if kind == "swap":
        return HitTarget("pair-swap", lambda n: n + 1 if n % 2 == 0 else n - 1)
    if kind == "affine":
        a, b = int(spec["slope"]), int(spec["offset"])
        if a < 1:
            raise ConfigError("affine target needs slope >= 1")
        return HitTarget(f"affine-{a}-{b}", lambda n: a * n + b)
    if kind == "family":
        if ctx_family is None:
            raise ConfigError("family hit target needs a declared family")
        member = ctx_family.member(int(spec["m"]), int(spec["xi"]))
        return HitTarget(f"family-{member.key}", member.forward)
    raise ConfigError(f"unknown hit target kind {kind!r}")


def build_context_and_tasks(config: dict, seed: int):
    rep = build_ground_representation(config.get("ground"))

    family = None
    if "family" in config:
        fam = config["family"]
        _require_keys(fam, {"stage", "m_count", "xi_count", "seed"}, "family")
        family = build_family(
            stage=int(fam.get("stage", 0)),
            m_count=int(fam.get("m_count", 1)),
            xi_count=int(fam.get("xi_count", 1)),
            seed=int(fam.get("seed", seed)),
        )

    eligible = ConstraintTable(())
    if "eligible" in config:
        el = config["eligible"]
        _require_keys(el, {"default", "table"}, "eligible")
        table = {}
        for text, per_word in el.get("table", {}).items():
            w = _parse_word(text, "eligible.table")
            table[w] = {int(m): list(xis) for m, xis in per_word.items()}
        eligible = ConstraintTable.from_dict(table, default=el.get("default", ()))

    targets = {}
    for text, spec in config.get("targets", {}).items():
        w = _parse_word(text, "targets")
        _require_keys(spec, {"bits", "set"}, f"targets[{text}]")
        if "bits" in spec:
            bits = [int(ch) for ch in str(spec["bits"])]
            if any(b not in (0, 1) for b in bits):
                raise ConfigError(f"targets[{text}].bits must be 0/1 text")
            targets[w] = TargetBits.from_bits(bits)
        elif "set" in spec:
            targets[w] = TargetBits.from_set(spec["set"])
        else:
            raise ConfigError(f"targets[{text}] needs bits or set")

    ctx = PosetContext.make(rep, family=family, eligible=eligible, targets=targets)

    tasks = TaskList.make()
    if "tasks" in config:
        t = config["tasks"]
        _require_keys(t, {
            "domain_up_to", "range_up_to", "coding", "registrations",
            "hits", "constraints",
        }, "tasks")
        hits = []
        for h in t.get("hits", ()):
            _require_keys(h, {"word", "target", "threshold", "repetitions"}, "hit task")
            hits.append(HitTask(
                word=_parse_word(h["word"], "hits"),
                target=build_target(h["target"], family),
                target_spec=(canonical_json(h["target"]),),
                threshold=int(h.get("threshold", 0)),
                repetitions=int(h.get("repetitions", 1)),
            ))
        constraints = []
        for c in t.get("constraints", ()):
            _require_keys(c, {"word", "m", "point", "xi"}, "constraint task")
            if ("m" in c) == ("point" in c):
                raise ConfigError("constraint task needs exactly one of m/point")
            constraints.append(ConstraintTask(
                word=_parse_word(c["word"], "constraints"),
                xi=int(c["xi"]),
                m=int(c["m"]) if "m" in c else None,
                point=int(c["point"]) if "point" in c else None,
            ))
        tasks = TaskList.make(
            domain_up_to=int(t.get("domain_up_to", 0)),
            range_up_to=int(t.get("range_up_to", 0)),
            coding={
                _parse_word(text, "tasks.coding"): int(bits)
                for text, bits in t.get("coding", {}).items()
            },
            registrations=[
                _parse_word(text, "tasks.registrations")
                for text in t.get("registrations", ())
            ],
            hits=hits,
            constraints=constraints,
        )
    return ctx, tasks


def mode_build(config: dict, seed: int, out_dir: str) -> int:
    ctx, tasks = build_context_and_tasks(config, seed)
    try:
        approx = run_builder(ctx, tasks, seed=seed)
    except TaskFailure as exc:
        print(f"build failed: {exc}", file=sys.stderr)
        return 1
    os.makedirs(out_dir, exist_ok=True)
    write_log(os.path.join(out_dir, "log.jsonl"), approx)
    with open(os.path.join(out_dir, "final.json"), "w") as fh:
        fh.write(canonical_json(approx.final.to_jsonable()) + "\n")
    report = verify_generic(approx, ctx, tasks)
    lines = report.lines()
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    print(f"artifacts written to {out_dir}")
    return 0 if report.passed else 1


def mode_verify(config: dict, seed: int, out_dir: str) -> int:
    ctx, tasks = build_context_and_tasks(config, seed)
    log_path = os.path.join(out_dir, "log.jsonl")
    final_path = os.path.join(out_dir, "final.json")
    try:
        log = read_log(log_path)
        with open(final_path) as fh:
            final = Condition.from_jsonable(json.load(fh))
    except (OSError, ValueError, KeyError) as exc:
        print(f"verify failed reading artifacts: {exc}", file=sys.stderr)
        return 1
    approx = GenericApproximation(final=final, log=log, seed=seed)
    report = verify_generic(approx, ctx, tasks)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def mode_tower(config: dict, seed: int, out_dir: str) -> int:
    tower = config.get("tower")
    if not tower:
        raise ConfigError("tower mode needs a tower section")
    _require_keys(tower, {
        "stages", "block", "window", "tracked", "stage_sets", "slot_sets",
        "family_members",
    }, "tower")
    rep = build_ground_representation(config.get("ground"))
    tracked = [_parse_word(t, "tower.tracked") for t in tower.get("tracked", ["a"])]
    stage_sets = [frozenset(xs) for xs in tower.get("stage_sets", [])]
    slot_sets = {int(k): frozenset(v) for k, v in tower.get("slot_sets", {}).items()}
    outcomes = run_tower(
        rep,
        stages=int(tower["stages"]),
        block=int(tower.get("block", 4)),
        window=int(tower.get("window", 20)),
        stage_sets=stage_sets,
        slot_sets=slot_sets,
        tracked_words=tracked,
        seed=seed,
        family_members=tuple(tower.get("family_members", (2, 2))),
    )
    write_tower(out_dir, outcomes)
    for outcome in outcomes:
        decoded = stage_decode(outcome)
        for text, (stage_set, slot_set) in sorted(decoded.items()):
            print(
                f"stage {outcome.state.stage} word {text}: "
                f"stage-set {stage_set} slot-set {slot_set}"
            )
    print(f"staged artifacts written to {out_dir}")
    return 0


def mode_words(config: dict, seed: int, out_dir: str) -> int:
    texts = config.get("words")
    if not texts:
        raise ConfigError("words mode needs a words list")
    print(f"{'word':<16} {'new-letter':<11} {'core-word':<10} {'core':<12} step")
    for text in texts:
        w = _parse_word(text, "words")
        cls = classify(w)
        step = str(code_step(w)) if cls.is_core_word else "-"
        print(
            f"{render(w):<16} {str(cls.mentions_new).lower():<11} "
            f"{str(cls.is_core_word).lower():<10} {render(cls.core):<12} {step}"
        )
    return 0


MODES = {
    "build": mode_build,
    "verify": mode_verify,
    "tower": mode_tower,
    "words": mode_words,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cofin",
        description="deterministic forcing-poset experiment runner",
    )
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--mode", required=True, choices=sorted(MODES))
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        out_dir = args.out or config.get("out", "cofin-out")
        return MODES[args.mode](config, seed, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
