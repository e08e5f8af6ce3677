"""Command-line entry points for the full experiment lifecycle."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import advisory, archive, config, driver, dti, metrics, sim, trainer


def _parse_traits(spec: str, rng: np.random.Generator):
    """Trait mode: 'random', 'perfect', or fixed 'offset=-2.5[,delay=4]'."""
    if spec == "random":
        return driver.sample_traits(rng)
    if spec == "perfect":
        return driver.PERFECT_FOLLOWER
    delay, offset = 4.0, 0.0
    for part in spec.split(","):
        key, _, val = part.partition("=")
        if key.strip() == "offset":
            offset = float(val)
        elif key.strip() == "delay":
            delay = float(val)
        else:
            raise ValueError(f"bad traits spec {spec!r}")
    return driver.DriverTraits(reaction_delay=delay, offset=offset)


def _load_run_config(args) -> config.RunConfig:
    if getattr(args, "config", None):
        rc = config.load_run_config(args.config)
    else:
        rc = config.RunConfig()
    if getattr(args, "seed", None) is not None:
        rc.seed = args.seed
    if getattr(args, "delta", None) is not None:
        rc.delta = args.delta
    if getattr(args, "out", None):
        rc.out_dir = args.out
    if getattr(args, "amax", None) is not None:
        pass  # handled where the grid is built
    return rc


def _grid(args) -> advisory.ActionGrid:
    a_max = getattr(args, "amax", None) or 35
    return advisory.ActionGrid(a_max=float(a_max))


def _load_dti_pair(args) -> dti.DtiPair | None:
    if getattr(args, "dti_delay", None) and getattr(args, "dti_offset", None):
        return dti.DtiPair(archive.load_dti(args.dti_delay), archive.load_dti(args.dti_offset))
    return None


def _eval_policy(policy, rc, episodes, traits_spec, base_policy=None, dti_pair=None,
                 greedy=True, seed_offset=0):
    results = []
    traits_rng = config.substream(rc.seed, "driver")
    for i in range(episodes):
        traits = _parse_traits(traits_spec, traits_rng)
        ep_seed = config.substream_seed(rc.seed, f"eval-{seed_offset + i}") % (2 ** 31)
        _, record = trainer.rollout(
            policy, rc.ring, ep_seed, base_policy=base_policy, traits=traits,
            dti_models=dti_pair, reward="rp", reward_params=rc.reward, greedy=greedy,
            latent_mode="mean",
        )
        results.append(metrics.compute_metrics(
            record, delta=policy.delta, policy_kind=policy.kind, traits=traits.as_dict()))
    return results


def _train_with_restarts(kind, rc, args, base_policy=None, dti_pair=None, grid=None):
    """Train `--restarts` policies, keep the best by eval congestion factor."""
    out_dir = Path(rc.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    best = None
    selection = []
    for r in range(args.restarts):
        tcfg = trainer.TrainConfig(
            gamma=rc.train.gamma, lr=args.lr if args.lr is not None else rc.train.lr,
            iterations=args.iterations if args.iterations is not None else rc.train.iterations,
            rollouts_per_update=args.rollouts, seed=rc.seed + r,
        )
        policy, curve = trainer.train(
            kind, rc.ring, tcfg, delta=rc.delta, base_policy=base_policy,
            dti_models=dti_pair, grid=grid, reward_params=rc.reward,
            progress=(lambda it, ret: print(f"  iter {it}: return {ret:.1f}", file=sys.stderr))
            if args.verbose else None,
        )
        evals = _eval_policy(policy, rc, args.select_episodes,
                             "perfect" if kind == advisory.KIND_PCP else "random",
                             base_policy=base_policy, dti_pair=dti_pair,
                             seed_offset=1000 * r)
        cf = float(np.mean([m.cf for m in evals]))
        selection.append({"restart": r, "train_seed": tcfg.seed, "eval_cf": cf})
        curve.to_csv(out_dir / f"curve_{kind}_d{rc.delta}_r{r}.csv")
        if best is None or cf > best[1]:
            best = (policy, cf, r)
    policy, cf, r = best
    path = out_dir / f"{kind}_d{rc.delta}.rap"
    archive.save_policy(policy, path, extra={"selection": selection, "chosen_restart": r})
    with open(out_dir / f"{kind}_d{rc.delta}_selection.json", "w") as fh:
        json.dump({"selection": selection, "chosen_restart": r, "chosen_cf": cf}, fh, indent=2)
    print(f"saved {path} (eval CF {cf:.3f}, restart {r} of {args.restarts})")
    return 0


def cmd_train_pcp(args):
    rc = _load_run_config(args)
    return _train_with_restarts(advisory.KIND_PCP, rc, args, grid=_grid(args))


def cmd_train_residual(args):
    rc = _load_run_config(args)
    base = archive.load_policy(args.base_archive, expect_kind=advisory.KIND_PCP)
    rc.delta = base.delta
    dti_pair = _load_dti_pair(args)
    if args.policy == advisory.KIND_PERP and dti_pair is None:
        print("error: perp training needs --dti-delay and --dti-offset archives", file=sys.stderr)
        return 2
    return _train_with_restarts(args.policy, rc, args, base_policy=base,
                                dti_pair=dti_pair, grid=base.grid)


def cmd_gen_dataset(args):
    rc = _load_run_config(args)
    bases = {}
    for path in args.base_archive:
        pol = archive.load_policy(path, expect_kind=advisory.KIND_PCP)
        bases[pol.delta] = pol
    ds = dti.gen_dataset(bases, args.trait, args.size, rc.ring,
                         seed=config.substream_seed(rc.seed, "dti") % (2 ** 31))
    np.savez(args.out_file, x=ds.x, labels=ds.labels, deltas=ds.deltas,
             advice_changed=ds.advice_changed, trait=args.trait)
    print(f"saved {args.out_file}: {len(ds)} windows, hash {ds.content_hash()[:12]}")
    return 0


def _load_dataset(path) -> dti.TraitDataset:
    raw = np.load(path, allow_pickle=False)
    return dti.TraitDataset(raw["x"], raw["labels"], raw["deltas"], raw["advice_changed"])


def cmd_train_dti(args):
    rc = _load_run_config(args)
    ds = _load_dataset(args.dataset)
    train_ds, test_ds = ds.split(seed=config.substream_seed(rc.seed, "dti-split") % (2 ** 31))
    model, history = dti.train_dti(
        train_ds.x, epochs=args.epochs, lr=args.lr, batch=args.batch,
        seed=config.substream_seed(rc.seed, "dti") % (2 ** 31), x_val=test_ds.x,
        progress=(lambda ep, l: print(f"  epoch {ep}: loss {l:.4f}", file=sys.stderr))
        if args.verbose else None,
    )
    archive.save_dti(model, args.out_file, extra={"epochs": args.epochs})
    report = dti.latent_separation_report(model, test_ds)
    scatter = Path(args.out_file).with_suffix(".scatter.csv")
    dti.export_latent_scatter(report, scatter)
    print(json.dumps({
        "final_train_loss": history["train_loss"][-1],
        "final_val_loss": history["val_loss"][-1],
        "knn_accuracy": report["knn_accuracy"],
        "silhouette": report["silhouette"],
        "chance": report["chance"],
    }, indent=2))
    return 0


def _policy_from_args(args, rc):
    if args.archive:
        return archive.load_policy(args.archive)
    if args.policy == advisory.KIND_OSL:
        return advisory.make_policy(advisory.KIND_OSL, rc.delta)
    raise SystemExit("need --archive for trained policies, or --policy osl")


def cmd_eval(args):
    rc = _load_run_config(args)
    policy = _policy_from_args(args, rc)
    base = (archive.load_policy(args.base_archive, expect_kind=advisory.KIND_PCP)
            if args.base_archive else None)
    if policy.kind in advisory.RESIDUAL_KINDS and base is None:
        print("error: residual eval needs --base-archive", file=sys.stderr)
        return 2
    dti_pair = _load_dti_pair(args)
    results = _eval_policy(policy, rc, args.episodes, rc.traits, base_policy=base,
                           dti_pair=dti_pair, greedy=not args.stochastic)
    summary = metrics.summarize(results)
    summary.update(policy_kind=policy.kind, delta=policy.delta, traits=rc.traits)
    out = Path(rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"eval_{policy.kind}_d{policy.delta}.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_sweep(args):
    rc = _load_run_config(args)
    arch_dir = Path(args.archive_dir)
    rows = []
    for kind in args.policies.split(","):
        for delta in (int(d) for d in args.deltas.split(",")):
            if kind == advisory.KIND_OSL:
                policy, base = advisory.make_policy(advisory.KIND_OSL, delta), None
            else:
                policy = archive.load_policy(arch_dir / f"{kind}_d{delta}.rap")
                base = (archive.load_policy(arch_dir / f"pcp_d{delta}.rap")
                        if kind in advisory.RESIDUAL_KINDS else None)
            dti_pair = _load_dti_pair(args)
            for offset in (float(o) for o in args.offsets.split(",")):
                results = _eval_policy(policy, rc, args.episodes, f"offset={offset}",
                                       base_policy=base, dti_pair=dti_pair)
                row = metrics.summarize(results)
                row.update(policy_kind=kind, delta=delta, trait_offset=offset)
                rows.append(row)
    out = Path(rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.json", "w") as fh:
        json.dump(rows, fh, indent=2)
    print(f"{len(rows)} sweep rows -> {out / 'sweep.json'}")
    return 0


def cmd_plot_export(args):
    rc = _load_run_config(args)
    policy = _policy_from_args(args, rc)
    base = (archive.load_policy(args.base_archive, expect_kind=advisory.KIND_PCP)
            if args.base_archive else None)
    traits = _parse_traits(rc.traits, config.substream(rc.seed, "driver"))
    _, record = trainer.rollout(policy, rc.ring, rc.seed, base_policy=base,
                                traits=traits, dti_models=_load_dti_pair(args),
                                greedy=True, latent_mode="mean")
    out = Path(rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.export_space_time(record, rc.ring, out / "space_time.csv")
    metrics.export_position_time(record, rc.ring, out / "position_time.csv")
    record.to_csv(out / "episode.csv", rc.ring)
    print(f"exports written to {out}")
    return 0


def cmd_drive_serve(args):
    from . import server

    rc = _load_run_config(args)
    policy = None
    if args.archive:
        policy = archive.load_policy(args.archive)
    server.serve(rc, policy=policy, port=args.port)
    return 0


def _add_common(p, train=False):
    p.add_argument("--config", help="run config file (INI)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--delta", type=int, choices=(50, 70, 100))
    if train:
        p.add_argument("--iterations", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--rollouts", type=int, default=1)
        p.add_argument("--restarts", type=int, default=1,
                       help="independent training seeds; best eval-CF policy kept")
        p.add_argument("--select-episodes", type=int, default=5)
        p.add_argument("--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="ringadvisory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-pcp", help="train a piecewise-constant base policy")
    _add_common(p, train=True)
    p.add_argument("--amax", type=float, choices=(35.0, 10.0), default=35.0)
    p.set_defaults(func=cmd_train_pcp)

    p = sub.add_parser("train-residual", help="train rp/perp/tarp over a frozen base")
    _add_common(p, train=True)
    p.add_argument("--policy", required=True, choices=advisory.RESIDUAL_KINDS)
    p.add_argument("--base-archive", required=True)
    p.add_argument("--dti-delay")
    p.add_argument("--dti-offset")
    p.set_defaults(func=cmd_train_residual)

    p = sub.add_parser("gen-dataset", help="generate a labeled trait-window dataset")
    _add_common(p)
    p.add_argument("--trait", required=True, choices=("offset", "delay"))
    p.add_argument("--size", type=int, default=10000)
    p.add_argument("--base-archive", action="append", required=True,
                   help="pcp archive; repeat for multiple hold-lengths")
    p.add_argument("--out-file", required=True, help="output dataset/model file")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train-dti", help="train a trait-inference model")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--out-file", required=True, help="output dataset/model file")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train_dti)

    p = sub.add_parser("eval", help="evaluate a policy over seeded episodes")
    _add_common(p)
    p.add_argument("--archive")
    p.add_argument("--policy", choices=(advisory.KIND_OSL,))
    p.add_argument("--base-archive")
    p.add_argument("--dti-delay")
    p.add_argument("--dti-offset")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--stochastic", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="cross policies x hold-lengths x offset traits")
    _add_common(p)
    p.add_argument("--archive-dir", required=True)
    p.add_argument("--policies", default="pcp,tarp,rp,perp")
    p.add_argument("--deltas", default="50,70,100")
    p.add_argument("--offsets", default="-7.5,-5,-2.5,0,2.5,5,7.5")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--dti-delay")
    p.add_argument("--dti-offset")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot-export", help="export space-time / position-time CSVs")
    _add_common(p)
    p.add_argument("--archive")
    p.add_argument("--policy", choices=(advisory.KIND_OSL,))
    p.add_argument("--base-archive")
    p.add_argument("--dti-delay")
    p.add_argument("--dti-offset")
    p.set_defaults(func=cmd_plot_export)

    p = sub.add_parser("drive-serve", help="start the realtime drive server")
    _add_common(p)
    p.add_argument("--archive")
    p.add_argument("--port", type=int, default=8700)
    p.set_defaults(func=cmd_drive_serve)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (archive.ArchiveError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
