"""Command-line interface.

Subcommands: bppm (compute or import pair-probability matrices), render
(dot-plot PGMs), dataset (build and materialize a pair dataset), train,
eval, and oracle-check (DP vs brute-force enumeration).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bppm import (
    Bppm,
    EnergyModel,
    compute_bppm,
    oracle_bppm,
    read_bppm,
    row_sums,
    write_bppm,
)
from .dataset import (
    DEFAULT_FAMILY_CAP,
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_LEN,
    DEFAULT_TRAIN_REPS,
    build_manifest,
    filter_families,
    materialize,
    read_manifest,
    split_families,
    synth_families,
    truncate_family,
    write_fasta,
)
from .imaging import bppm_to_image, resize_bilinear, write_pgm
from .nn import ARCHITECTURES, TrainConfig, load_checkpoint
from .pipeline import evaluate_model, ImageStore, train
from .rng import substream
from .seqio import Family, ParseError, group_by_family, parse_fasta, parse_stockholm


def _sanitize_name(name: str) -> str:
    from .dataset import _sanitize

    return _sanitize(name)


def load_families(path: Path, default_family: str | None = None) -> list[Family]:
    """Families from a FASTA/Stockholm file or a directory of them.

    Format is sniffed per file from the Stockholm magic line.
    """
    files = sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path]
    if not files:
        raise ParseError(f"no input files under {path}")
    sequences = []
    families = []
    for f in files:
        text = f.read_text()
        stripped = text.lstrip()
        if stripped.startswith("# STOCKHOLM"):
            families.extend(parse_stockholm(text, default_accession=default_family))
        else:
            sequences.extend(parse_fasta(text, default_family=default_family))
    families.extend(group_by_family(sequences))
    merged: dict[str, list] = {}
    for fam in families:
        merged.setdefault(fam.accession, []).extend(fam.members)
    return [Family(accession=a, members=m) for a, m in sorted(merged.items())]


def _energy_model(args) -> EnergyModel:
    return EnergyModel(
        e_au=args.e_au,
        e_gc=args.e_gc,
        e_gu=args.e_gu,
        rt=args.rt,
        min_hairpin=args.min_hairpin,
    )


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rt", type=float, default=EnergyModel().rt)
    p.add_argument("--e-gc", type=float, default=EnergyModel().e_gc)
    p.add_argument("--e-au", type=float, default=EnergyModel().e_au)
    p.add_argument("--e-gu", type=float, default=EnergyModel().e_gu)
    p.add_argument("--min-hairpin", type=int, default=EnergyModel().min_hairpin)


# ---------------------------------------------------------------------------
# bppm

def cmd_bppm(args) -> int:
    model = _energy_model(args)
    families = load_families(Path(args.infile), default_family=args.family)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    import_dir = Path(args.import_bppm) if args.import_bppm else None
    count = 0
    for fam in families:
        for seq in fam.members:
            name = f"{_sanitize_name(seq.family)}__{_sanitize_name(seq.id)}.bppm"
            if import_dir is not None:
                src = import_dir / name
                if not src.exists():
                    src = import_dir / f"{_sanitize_name(seq.id)}.bppm"
                if not src.exists():
                    print(f"error: no imported matrix for {seq.family}/{seq.id}",
                          file=sys.stderr)
                    return 1
                b = read_bppm(src.read_text())
                if b.n != seq.length:
                    print(
                        f"error: {src.name} has n={b.n}, sequence "
                        f"{seq.family}/{seq.id} has length {seq.length}",
                        file=sys.stderr,
                    )
                    return 1
                b.validate()
            else:
                b = compute_bppm(seq, model, args.prune)
            (out_dir / name).write_text(write_bppm(b))
            count += 1
    print(f"wrote {count} matrices to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# render

def cmd_render(args) -> int:
    in_dir = Path(args.bppm)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(in_dir.glob("*.bppm"))
    if not files:
        print(f"error: no .bppm files under {in_dir}", file=sys.stderr)
        return 1
    for f in files:
        b = read_bppm(f.read_text())
        img = resize_bilinear(bppm_to_image(b, use_sqrt=args.sqrt), args.side)
        (out_dir / f"{f.stem}.pgm").write_bytes(write_pgm(img))
    print(f"rendered {len(files)} images at side {args.side} to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# dataset

def _parse_split(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--split needs three comma-separated counts")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _parse_synth(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            "--synth needs families,members,length,mutation-rate"
        )
    return int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])


def cmd_dataset(args) -> int:
    model = _energy_model(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.synth:
        n_fam, members, length, mu = args.synth
        families = synth_families(n_fam, members, length, mu, seed=args.seed)
        # synthetic sequences are built to order; the length filter is
        # for curating real data and is skipped here
        (out_dir / "families.fasta").write_text(write_fasta(families))
    elif args.families:
        families = load_families(Path(args.families), default_family=args.family)
        families = filter_families(families, args.min_len, args.max_len)
    else:
        print("error: need --families or --synth", file=sys.stderr)
        return 1
    if not families:
        print("error: no families left after filtering", file=sys.stderr)
        return 1
    families = [truncate_family(f, args.cap, args.seed) for f in families]
    plan = split_families(families, seed=args.seed, counts=args.split)
    manifest = build_manifest(
        families,
        plan,
        image_side=args.side,
        model_fingerprint=model.fingerprint(),
        reps=args.reps,
    )
    seqs = {s.key: s for f in families for s in f.members}
    final = materialize(manifest, seqs, model, out_dir, prune_threshold=args.prune)
    by = {}
    for r in final.records:
        by[(r.split, r.label)] = by.get((r.split, r.label), 0) + 1
    print(f"families: train {len(plan.train)}, val {len(plan.val)}, test {len(plan.test)}")
    for (split, label), n in sorted(by.items()):
        print(f"records {split}/{label}: {n}")
    print(f"manifest: {out_dir / 'manifest.jsonl'}")
    return 0


# ---------------------------------------------------------------------------
# train / eval

def _parse_ratio(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("--ratio looks like DIFF:SAME, e.g. 4:1")
    return int(parts[0]), int(parts[1])


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    manifest = read_manifest((data_dir / "manifest.jsonl").read_text())
    spec = ARCHITECTURES[args.arch](manifest.image_side)
    cfg = TrainConfig(
        lr0=args.lr,
        momentum=args.momentum,
        decay_factor=args.decay,
        decay_every=args.decay_every,
        batch=args.batch,
        ratio=args.ratio,
        iterations=args.iters,
        seed=args.seed,
        val_every=args.val_every,
    )
    result = train(manifest, spec, cfg, data_dir, out_dir=Path(args.out))
    if result.best_metrics is not None:
        m = result.best_metrics
        print(
            f"best val at iteration {result.best_iteration}: "
            f"acc_diff {m.acc_diff:.4f}, acc_same {m.acc_same:.4f}, avg {m.avg:.4f}"
        )
    else:
        print("no usable validation split; best.ckpt is the final model")
    print(f"checkpoints and log in {args.out}")
    return 0


def cmd_eval(args) -> int:
    data_dir = Path(args.data)
    manifest = read_manifest((data_dir / "manifest.jsonl").read_text())
    model = load_checkpoint(Path(args.checkpoint).read_bytes())
    records = manifest.split_records(args.split)
    store = ImageStore(data_dir, manifest.image_side)
    metrics = evaluate_model(model, records, store)
    print(
        f"split {args.split}: acc_diff {metrics.acc_diff:.4f}, "
        f"acc_same {metrics.acc_same:.4f}, avg {metrics.avg:.4f}"
    )
    print(json.dumps(metrics.as_dict(), sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# oracle-check

def cmd_oracle_check(args) -> int:
    model = EnergyModel()
    worst = 0.0
    for case in range(args.cases):
        rng = substream(args.seed, "oracle-check", case)
        n = int(rng.integers(args.n_min, args.n_max + 1))
        residues = "".join(rng.choice(list("ACGU"), size=n))
        from .seqio import RnaSequence

        seq = RnaSequence(id=f"case{case}", family="check", residues=residues)
        dp = compute_bppm(seq, model, prune_threshold=0.0)
        oracle = oracle_bppm(seq, model)
        diff = float(np.abs(dp.p - oracle.p).max())
        worst = max(worst, diff)
        if diff > args.tol:
            print(
                f"MISMATCH case {case} ({residues}): max |dp - oracle| = {diff:g}",
                file=sys.stderr,
            )
            return 1
    print(f"{args.cases} cases, n in [{args.n_min}, {args.n_max}]: "
          f"max |dp - oracle| = {worst:.3g} (tol {args.tol:g})")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnadot",
        description="RNA dot-plot pair classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bppm", help="compute or import pair-probability matrices")
    p.add_argument("--in", dest="infile", required=True,
                   help="FASTA/Stockholm file or directory")
    p.add_argument("--out", required=True, help="output directory for .bppm files")
    p.add_argument("--family", default=None,
                   help="family for headers without one")
    p.add_argument("--prune", type=float, default=None,
                   help="probability prune threshold (default: auto by length)")
    p.add_argument("--import-bppm", default=None,
                   help="directory of precomputed matrices to import instead")
    _add_model_flags(p)
    p.set_defaults(func=cmd_bppm)

    p = sub.add_parser("render", help="render .bppm matrices as PGM dot-plots")
    p.add_argument("--bppm", required=True, help="directory of .bppm files")
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--sqrt", action="store_true",
                   help="render sqrt(P) instead of P")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("dataset", help="build and materialize a pair dataset")
    p.add_argument("--families", default=None,
                   help="FASTA/Stockholm file or directory")
    p.add_argument("--synth", type=_parse_synth, default=None,
                   metavar="F,M,L,MU",
                   help="generate F synthetic families of M members, "
                        "length L, mutation rate MU (skips the length filter)")
    p.add_argument("--family", default=None)
    p.add_argument("--min-len", type=int, default=DEFAULT_MIN_LEN)
    p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    p.add_argument("--cap", type=int, default=DEFAULT_FAMILY_CAP)
    p.add_argument("--split", type=_parse_split, default=None, metavar="TR,VA,TE",
                   help="family counts per split (default: 70/10/20 by floor)")
    p.add_argument("--reps", type=int, default=DEFAULT_TRAIN_REPS)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--prune", type=float, default=None)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train a classifier on a materialized dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=sorted(ARCHITECTURES), default="minivgg")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--ratio", type=_parse_ratio, default=(1, 1), metavar="D:S")
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--decay", type=float, default=0.25)
    p.add_argument("--decay-every", type=int, default=50)
    p.add_argument("--val-every", type=int, default=None)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-check",
                       help="compare the DP against brute-force enumeration")
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--n-min", type=int, default=8)
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
