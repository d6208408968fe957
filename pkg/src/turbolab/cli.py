"""Command-line entry points for training, analysis and evaluation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__


def _parse_snr(text: str):
    """Parse '2.0', '1,2,3' or 'start:stop:step' (stop inclusive)."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        values = [start + i * step for i in range(count) if start + i * step <= stop + 1e-9]
        return [round(v, 10) for v in values]
    return [float(v) for v in text.split(",")]


def _load_recipe(path, seed=None, alpha=None):
    from .training import TrainPhase, TrainRecipe
    import dataclasses

    recipe = TrainRecipe.load(path)
    if seed is not None:
        recipe = dataclasses.replace(recipe, seed=seed)
    if alpha is not None:
        phases = list(recipe.phases)
        phases[-1] = dataclasses.replace(phases[-1], alpha=alpha)
        recipe = dataclasses.replace(recipe, phases=tuple(phases))
    return recipe


def _save_component(ae, directory, log, recipe):
    from .networks import save_checkpoint

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {"recipe_hash": recipe.hash(), "kind": ae.kind}
    save_checkpoint(ae.encoder, directory / "encoder", meta)
    save_checkpoint(ae.decoder, directory / "decoder", meta)
    log.save(directory / "train_log.jsonl")
    recipe.save(directory / "recipe.json")


def _load_component(directory, kind, k):
    from .networks import load_checkpoint
    from .training import ComponentAE

    directory = Path(directory)
    return ComponentAE(
        kind=kind,
        encoder=load_checkpoint(directory / "encoder"),
        decoder=load_checkpoint(directory / "decoder"),
        k=k,
        n=2 * k,
    )


def cmd_train_outer(args):
    from .training import train_outer_tgp

    recipe = _load_recipe(args.recipe, args.seed)
    ae, log = train_outer_tgp(recipe, progress=_progress(args))
    _save_component(ae, args.out, log, recipe)
    print(f"outer component written to {args.out}")
    return 0


def cmd_train_inner(args):
    from .exit_analysis import curve_from_csv, curve_to_csv, measure_exit_curve
    from .system import save_bundle
    from .training import assemble_system, train_inner_tgp

    recipe = _load_recipe(args.recipe, args.seed, args.alpha)
    outer_curve = curve_from_csv(args.outer_curve) if args.outer_curve else None
    outer_ae = _load_component(args.outer, "outer", recipe.k) if args.outer else None
    ae, log = train_inner_tgp(recipe, outer_curve=outer_curve, outer_ae=outer_ae, progress=_progress(args))
    _save_component(ae, args.out, log, recipe)
    curve = measure_exit_curve(ae.as_siso(), recipe.exit_snr_db, rng=np.random.default_rng(recipe.seed))
    curve_to_csv(curve, Path(args.out) / "exit_curve.csv")
    if outer_ae is not None:
        bundle = save_bundle(
            assemble_system(outer_ae, ae, recipe.n_iters),
            Path(args.out) / "system",
            extra_meta={"recipe_hash": recipe.hash()},
        )
        print(f"system bundle written to {bundle}")
    print(f"inner component written to {args.out}")
    return 0


def cmd_train_unfolded(args):
    from .system import save_bundle
    from .training import train_unfolded

    recipe = _load_recipe(args.recipe, args.seed)
    system, log = train_unfolded(recipe, n_iters=args.iters, progress=_progress(args))
    out = Path(args.out)
    save_bundle(system, out, extra_meta={"recipe_hash": recipe.hash(), "training": "unfolded"})
    log.save(out / "train_log.jsonl")
    print(f"unfolded system bundle written to {out}")
    return 0


def cmd_exit_curve(args):
    from .exit_analysis import DEFAULT_IA_GRID, InnerSiso, OuterSiso, curve_to_csv, measure_exit_curve
    from .system import load_bundle, resolve_bundle

    system = load_bundle(resolve_bundle(args.bundle))
    if args.component == "inner":
        siso = InnerSiso(system.inner_enc, system.inner_dec, system.n)
    else:
        siso = OuterSiso(system.outer_enc, system.outer_dec, system.k)
    grid = np.array(_parse_snr(args.grid)) if args.grid else DEFAULT_IA_GRID
    curve = measure_exit_curve(
        siso, args.snr, ia_grid=grid, blocks=args.blocks, rng=np.random.default_rng(args.seed)
    )
    curve_to_csv(curve, args.out)
    print(f"EXIT curve ({args.component}, {args.snr} dB) written to {args.out}")
    return 0


def cmd_trajectory(args):
    from .exit_analysis import curve_from_csv, find_intersection, simulate_trajectory, trajectory_to_csv

    inner = curve_from_csv(args.inner_curve)
    outer = curve_from_csv(args.outer_curve)
    traj = simulate_trajectory(inner, outer, max_iters=args.max_iters)
    trajectory_to_csv(traj, args.out, snr_db=inner.snr_db)
    ix, iy = find_intersection(inner, outer)
    print(
        f"trajectory: {len(traj.points)} points, final MI {traj.final_mi:.4f}, "
        f"converged={traj.converged}, intersection at ({ix:.4f}, {iy:.4f})"
    )
    return 0


def cmd_scatter(args):
    from .exit_analysis import scattered_exit
    from .system import load_bundle, resolve_bundle

    system = load_bundle(resolve_bundle(args.bundle))
    points = scattered_exit(
        system, args.snr, blocks=args.blocks, rng=np.random.default_rng(args.seed), n_iters=args.iters
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["block,iteration,role,ia,ie"]
    lines += [f"{p.block},{p.iteration},{p.role},{p.ia!r},{p.ie!r}" for p in points]
    out.write_text("\n".join(lines) + "\n")
    print(f"{len(points)} scattered EXIT points written to {out}")
    return 0


def cmd_evaluate(args):
    from .simulate import SimConfig, config_manifest, emit_results, monte_carlo
    from .system import bundle_hash, load_bundle, resolve_bundle, retarget_length

    bundle_dir = resolve_bundle(args.bundle)
    system = load_bundle(bundle_dir)
    if args.k is not None and args.k != system.k:
        system = retarget_length(system, args.k)
    config = SimConfig(
        ebn0_db=tuple(_parse_snr(args.snr)),
        n_iters=args.iters,
        min_block_errors=args.min_block_errors,
        max_blocks=args.max_blocks,
        seed=args.seed,
        workers=args.workers,
    )
    points = monte_carlo(system, config)
    emit_results(points, args.out, config_manifest(config, bundle_hash(bundle_dir)))
    for p in points:
        print(
            f"Eb/N0 {p.ebn0_db:5.2f} dB: BER {p.ber:.3e}  BLER {p.bler:.3e} "
            f"({p.block_errors} block errors / {p.blocks_run} blocks)"
        )
    print(f"results written to {args.out}")
    return 0


def cmd_retarget(args):
    from .system import load_bundle, resolve_bundle, retarget_length, save_bundle

    system = load_bundle(resolve_bundle(args.bundle))
    retargeted = retarget_length(system, args.k)
    save_bundle(retargeted, args.out, extra_meta={"retargeted_from_k": system.k})
    print(f"retargeted bundle (k={args.k}) written to {args.out}")
    return 0


def cmd_distill(args):
    from .distillation import DistillRecipe, default_student_pair, distill_encoder, verify_agreement
    from .networks import save_checkpoint
    from .system import SerialTurboAE, load_bundle, resolve_bundle, save_bundle

    system = load_bundle(resolve_bundle(args.bundle))
    outer_cfg, inner_cfg = default_student_pair(args.budget)
    recipe = DistillRecipe(steps=args.steps, seed=args.seed, block_len=system.k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    reports = {}
    students = {}
    for name, teacher, cfg, block_len in (
        ("outer", system.outer_enc, outer_cfg, system.k),
        ("inner", system.inner_enc, inner_cfg, system.n),
    ):
        import dataclasses

        student, mse = distill_encoder(
            teacher, cfg, dataclasses.replace(recipe, block_len=block_len)
        )
        report = verify_agreement(teacher, student, blocks=args.blocks, block_len=block_len)
        reports[name] = report
        students[name] = student
        save_checkpoint(student, out / f"student_{name}_enc", {"distilled_from": name})
        print(
            f"{name} student: {report.student_count} weights "
            f"(teacher {report.teacher_count}), agreement {report.sign_agreement:.5f}, "
            f"MSE {report.output_mse:.3e}"
        )
    (out / "report.json").write_text(
        json.dumps({k: json.loads(r.to_text()) for k, r in reports.items()}, indent=2, sort_keys=True)
    )
    student_system = SerialTurboAE(
        k=system.k,
        n=system.n,
        n_iters=system.n_iters,
        interleaver=system.interleaver,
        outer_enc=students["outer"],
        inner_enc=students["inner"],
        outer_dec=system.outer_dec,
        inner_dec=system.inner_dec,
    )
    save_bundle(student_system, out / "student_system", extra_meta={"encoders": "distilled"})
    print(f"distillation artifacts written to {out}")
    return 0


def cmd_report(args):
    from .networks import ModelParameters
    from .simulate import parse_results
    from .system import bundle_hash, resolve_bundle

    bundle_dir = resolve_bundle(args.bundle)
    manifest = json.loads((bundle_dir / "manifest.json").read_text())
    print(f"bundle: {bundle_dir}")
    print(f"k={manifest['k']} n={manifest['n']} n_iters={manifest['n_iters']}")
    print(f"interleaver: {manifest['interleaver']['kind']} size {manifest['interleaver']['size']}")
    print(f"checkpoints hash: {bundle_hash(bundle_dir)}")
    total = 0
    for name in manifest["checkpoints"]:
        params = ModelParameters.load(bundle_dir / name)
        total += params.total_count
        print(f"  {name}: {params.total_count} weights")
    print(f"  total: {total} weights")
    if args.results:
        points = parse_results(args.results)
        print(f"results ({args.results}):")
        for p in points:
            print(f"  Eb/N0 {p.ebn0_db:5.2f} dB: BER {p.ber:.3e}  BLER {p.bler:.3e}")
    return 0


def _progress(args):
    if not getattr(args, "verbose", False):
        return None

    def show(record):
        fields = " ".join(
            f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
            for k, v in record.items()
            if v is not None
        )
        print(fields, file=sys.stderr)

    return show


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turbolab",
        description="Serial turbo autoencoder laboratory: train, analyze, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"turbolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verbose", action="store_true")
        return p

    p = add("train-outer", cmd_train_outer, help="train the outer autoencoder (Gaussian-prior recipe)")
    p.add_argument("--recipe", required=True)
    p.add_argument("--out", required=True)

    p = add("train-inner", cmd_train_inner, help="train the inner autoencoder (two-step recipe)")
    p.add_argument("--recipe", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--outer-curve", help="outer EXIT curve CSV used for fit diagnostics")
    p.add_argument("--outer", help="trained outer component directory (enables validation and bundle)")
    p.add_argument("--alpha", type=float, help="override the zero-prior batch fraction")

    p = add("train-unfolded", cmd_train_unfolded, help="train the unfolded end-to-end baseline")
    p.add_argument("--recipe", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=6)

    p = add("exit-curve", cmd_exit_curve, help="measure a component EXIT curve from a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--component", choices=("inner", "outer"), required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--blocks", type=int, default=200)
    p.add_argument("--grid", help="I_A grid as start:stop:step")
    p.add_argument("--out", required=True)

    p = add("trajectory", cmd_trajectory, help="simulate the ping-pong trajectory of two curves")
    p.add_argument("--inner-curve", required=True)
    p.add_argument("--outer-curve", required=True)
    p.add_argument("--max-iters", type=int, default=64)
    p.add_argument("--out", required=True)

    p = add("scatter", cmd_scatter, help="per-block scattered EXIT chart from real decoding")
    p.add_argument("--bundle", required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--blocks", type=int, default=200)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, help="Monte-Carlo BER/BLER over an SNR grid")
    p.add_argument("--bundle", required=True)
    p.add_argument("--k", type=int, help="retarget to this message length before evaluating")
    p.add_argument("--iters", type=int, default=6)
    p.add_argument("--snr", required=True, help="SNR grid, e.g. 0.5:4.0:0.5")
    p.add_argument("--min-block-errors", type=int, default=100)
    p.add_argument("--max-blocks", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("retarget", cmd_retarget, help="apply trained weights to a longer block length")
    p.add_argument("--bundle", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("distill", cmd_distill, help="compress the encoders into budgeted students")
    p.add_argument("--bundle", required=True)
    p.add_argument("--budget", type=int, default=148)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--blocks", type=int, default=10000)
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, help="summarize a bundle (and optionally a results CSV)")
    p.add_argument("--bundle", required=True)
    p.add_argument("--results")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
