"""Dataset construction for the same-family vs different-family task.

Families are filtered by length, capped, and split disjointly into
train/val/test. Same-class pairs are exhaustive within-family
combinations; different-class pairs are exhaustive for val/test and
sampled per repetition for train. Records are materialized as composite
dot-plot images plus a JSON-lines manifest.

All randomness is derived from one 64-bit seed through hashed
substreams, so rebuilding with the same inputs is byte-identical.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bppm import Bppm, EnergyModel, compute_bppm, read_bppm, write_bppm
from .imaging import bppm_to_image, compose_pair, resize_bilinear, write_pgm
from .rng import substream
from .seqio import Family, RnaSequence

LABEL_SAME = "same"
LABEL_DIFFERENT = "different"
SPLITS = ("train", "val", "test")

DEFAULT_MIN_LEN = 200
DEFAULT_MAX_LEN = 260
DEFAULT_MIN_MEMBERS = 2
DEFAULT_FAMILY_CAP = 30
DEFAULT_TRAIN_REPS = 20


@dataclass
class SplitPlan:
    """Disjoint family accession lists plus the seed that produced them."""

    train: list[str]
    val: list[str]
    test: list[str]
    seed: int

    def __post_init__(self):
        combined = self.train + self.val + self.test
        if len(set(combined)) != len(combined):
            raise ValueError("split lists share accessions")

    def split_of(self, accession: str) -> str:
        for name in SPLITS:
            if accession in getattr(self, name):
                return name
        raise KeyError(f"accession {accession!r} not in any split")


@dataclass
class PairRecord:
    """One labeled sequence pair; sequence A takes the upper triangle."""

    seq_a: str
    seq_b: str
    family_a: str
    family_b: str
    label: str
    split: str
    image_path: str = ""

    def __post_init__(self):
        if self.label not in (LABEL_SAME, LABEL_DIFFERENT):
            raise ValueError(f"bad label {self.label!r}")
        if self.split not in SPLITS:
            raise ValueError(f"bad split {self.split!r}")
        if (self.family_a == self.family_b) != (self.label == LABEL_SAME):
            raise ValueError("label does not match family equality")
        if self.label == LABEL_SAME and self.seq_a == self.seq_b:
            raise ValueError("same-family pair of a sequence with itself")

    @property
    def key_a(self) -> tuple[str, str]:
        return (self.family_a, self.seq_a)

    @property
    def key_b(self) -> tuple[str, str]:
        return (self.family_b, self.seq_b)


@dataclass
class DatasetManifest:
    plan: SplitPlan
    records: list[PairRecord]
    image_side: int
    model_fingerprint: str

    def split_records(self, split: str) -> list[PairRecord]:
        return [r for r in self.records if r.split == split]


# ---------------------------------------------------------------------------
# Family selection and splitting

def filter_families(
    families: list[Family],
    min_len: int = DEFAULT_MIN_LEN,
    max_len: int = DEFAULT_MAX_LEN,
    min_members: int = DEFAULT_MIN_MEMBERS,
) -> list[Family]:
    """Drop members outside [min_len, max_len], then undersized families."""
    out = []
    for fam in sorted(families, key=lambda f: f.accession):
        kept = [s for s in fam.members if min_len <= s.length <= max_len]
        if len(kept) >= min_members:
            out.append(Family(accession=fam.accession, members=kept))
    return out


def truncate_family(fam: Family, cap: int, seed: int) -> Family:
    """Uniform random subset of size cap, order-normalized by id."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if len(fam.members) <= cap:
        return fam
    rng = substream(seed, "truncate", fam.accession)
    members = sorted(fam.members, key=lambda s: s.id)
    picked = rng.choice(len(members), size=cap, replace=False)
    kept = [members[i] for i in sorted(picked)]
    return Family(accession=fam.accession, members=kept)


def default_split_counts(n_families: int) -> tuple[int, int, int]:
    """70/10/20 with floor on the first two, remainder to test."""
    n_train = math.floor(0.7 * n_families)
    n_val = math.floor(0.1 * n_families)
    return n_train, n_val, n_families - n_train - n_val


def split_families(
    families: list[Family],
    seed: int,
    counts: tuple[int, int, int] | None = None,
) -> SplitPlan:
    """Uniform random partition of the family set into the given sizes."""
    accessions = sorted(f.accession for f in families)
    if counts is None:
        counts = default_split_counts(len(accessions))
    n_train, n_val, n_test = counts
    if min(counts) < 0 or n_train + n_val + n_test != len(accessions):
        raise ValueError(
            f"split counts {counts} do not partition {len(accessions)} families"
        )
    rng = substream(seed, "split")
    order = [accessions[i] for i in rng.permutation(len(accessions))]
    return SplitPlan(
        train=sorted(order[:n_train]),
        val=sorted(order[n_train : n_train + n_val]),
        test=sorted(order[n_train + n_val :]),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Pair enumeration and sampling

def _ordered_members(fam: Family) -> list[RnaSequence]:
    return sorted(fam.members, key=lambda s: s.id)


def enumerate_same_pairs(families: list[Family], split: str) -> list[PairRecord]:
    """All unordered within-family pairs; A = lexicographically smaller id."""
    out = []
    for fam in sorted(families, key=lambda f: f.accession):
        members = _ordered_members(fam)
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                out.append(
                    PairRecord(
                        seq_a=members[i].id,
                        seq_b=members[j].id,
                        family_a=fam.accession,
                        family_b=fam.accession,
                        label=LABEL_SAME,
                        split=split,
                    )
                )
    return out


def enumerate_diff_pairs_exhaustive(
    families: list[Family], split: str
) -> list[PairRecord]:
    """All unordered cross-family pairs within the split."""
    fams = sorted(families, key=lambda f: f.accession)
    out = []
    for i in range(len(fams)):
        for j in range(i + 1, len(fams)):
            for sa in _ordered_members(fams[i]):
                for sb in _ordered_members(fams[j]):
                    a, b = sa, sb
                    # A = smaller (id, family); family breaks id ties
                    if (b.id, b.family) < (a.id, a.family):
                        a, b = b, a
                    out.append(
                        PairRecord(
                            seq_a=a.id,
                            seq_b=b.id,
                            family_a=a.family,
                            family_b=b.family,
                            label=LABEL_DIFFERENT,
                            split=split,
                        )
                    )
    return out


def sample_diff_pairs_train(
    families: list[Family],
    reps: int,
    seed: int,
    split: str = "train",
) -> list[PairRecord]:
    """Sampled cross-family pairs: F*(F-1)*reps records.

    Per repetition, each family f contributes one anchor member, drawn
    once per (f, repetition); for every other family g a partner is
    drawn per (f, g, repetition). The anchor takes the upper triangle.
    Duplicate pairs are permitted.
    """
    fams = sorted(families, key=lambda f: f.accession)
    if len(fams) < 2:
        raise ValueError("need at least 2 families to sample different pairs")
    members = {f.accession: _ordered_members(f) for f in fams}
    out = []
    for rep in range(reps):
        anchors = {}
        for f in fams:
            rng = substream(seed, "diff-anchor", rep, f.accession)
            anchors[f.accession] = members[f.accession][
                int(rng.integers(len(members[f.accession])))
            ]
        for f in fams:
            for g in fams:
                if g.accession == f.accession:
                    continue
                rng = substream(seed, "diff-partner", rep, f.accession, g.accession)
                partner = members[g.accession][
                    int(rng.integers(len(members[g.accession])))
                ]
                anchor = anchors[f.accession]
                out.append(
                    PairRecord(
                        seq_a=anchor.id,
                        seq_b=partner.id,
                        family_a=anchor.family,
                        family_b=partner.family,
                        label=LABEL_DIFFERENT,
                        split=split,
                    )
                )
    return out


def build_manifest(
    families: list[Family],
    plan: SplitPlan,
    image_side: int,
    model_fingerprint: str,
    reps: int = DEFAULT_TRAIN_REPS,
) -> DatasetManifest:
    """Assemble all records for a plan: exhaustive same pairs everywhere,
    sampled different pairs for train, exhaustive for val and test."""
    by_acc = {f.accession: f for f in families}
    records: list[PairRecord] = []
    for split in SPLITS:
        fams = [by_acc[a] for a in getattr(plan, split)]
        records.extend(enumerate_same_pairs(fams, split))
        if split == "train":
            if len(fams) >= 2:
                records.extend(
                    sample_diff_pairs_train(fams, reps=reps, seed=plan.seed)
                )
        else:
            records.extend(enumerate_diff_pairs_exhaustive(fams, split))
    return DatasetManifest(
        plan=plan,
        records=records,
        image_side=image_side,
        model_fingerprint=model_fingerprint,
    )


# ---------------------------------------------------------------------------
# Synthetic families

_BASES = np.array(list("ACGU"))


def synth_families(
    n_families: int,
    members_per_family: int,
    seq_len: int,
    mutation_rate: float,
    seed: int,
) -> list[Family]:
    """Random families: a uniform ancestor per family, members derived by
    resampling each position uniformly with probability mutation_rate."""
    if not (0.0 <= mutation_rate <= 1.0):
        raise ValueError(f"mutation_rate must be in [0,1], got {mutation_rate}")
    width = max(4, len(str(max(n_families, 1))))
    out = []
    for i in range(n_families):
        accession = f"SYN{i:0{width}d}"
        anc_rng = substream(seed, "synth-ancestor", i)
        ancestor = anc_rng.choice(len(_BASES), size=seq_len)
        members = []
        mwidth = max(3, len(str(max(members_per_family, 1))))
        for j in range(members_per_family):
            rng = substream(seed, "synth-member", i, j)
            codes = ancestor.copy()
            hit = rng.random(seq_len) < mutation_rate
            codes[hit] = rng.choice(len(_BASES), size=int(hit.sum()))
            members.append(
                RnaSequence(
                    id=f"m{j:0{mwidth}d}",
                    family=accession,
                    residues="".join(_BASES[codes]),
                )
            )
        out.append(Family(accession=accession, members=members))
    return out


def write_fasta(families: list[Family], width: int = 60) -> str:
    """FASTA text with family/id headers; inverse of the FASTA parser."""
    lines = []
    for fam in sorted(families, key=lambda f: f.accession):
        for seq in _ordered_members(fam):
            lines.append(f">{seq.family}/{seq.id}")
            for start in range(0, seq.length, width):
                lines.append(seq.residues[start : start + width])
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Materialization

_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def _sanitize(name: str) -> str:
    return _SAFE.sub("_", name)


class _NameRegistry:
    """Maps originals to sanitized names, rejecting collisions."""

    def __init__(self):
        self._owner: dict[str, object] = {}

    def claim(self, sanitized: str, original) -> str:
        held = self._owner.setdefault(sanitized, original)
        if held != original:
            raise ValueError(
                f"sanitized name collision: {held!r} and {original!r} "
                f"both map to {sanitized!r}"
            )
        return sanitized


def bppm_cache_path(out_dir: Path, seq_key: tuple[str, str]) -> Path:
    family, sid = seq_key
    return out_dir / "bppm" / f"{_sanitize(family)}__{_sanitize(sid)}.bppm"


def record_image_relpath(rec: PairRecord) -> str:
    name = "__".join(
        (
            _sanitize(rec.family_a),
            _sanitize(rec.seq_a),
            _sanitize(rec.family_b),
            _sanitize(rec.seq_b),
        )
    )
    return f"images/{rec.split}/{rec.label}/{name}.pgm"


def materialize(
    manifest: DatasetManifest,
    sequences: dict[tuple[str, str], RnaSequence],
    model: EnergyModel,
    out_dir: Path,
    prune_threshold: float | None = None,
    imported_bppms: dict[tuple[str, str], Bppm] | None = None,
) -> DatasetManifest:
    """Write one composite PGM per record plus the manifest.

    BPPMs are computed once per sequence and cached on disk under
    ``out_dir/bppm``; ``imported_bppms`` entries bypass computation.
    Returns the manifest with image_path filled in; also writes it to
    ``out_dir/manifest.jsonl``.
    """
    out_dir = Path(out_dir)
    (out_dir / "bppm").mkdir(parents=True, exist_ok=True)
    registry = _NameRegistry()

    needed = sorted({k for r in manifest.records for k in (r.key_a, r.key_b)})
    for key in needed:
        if key not in sequences and not (imported_bppms and key in imported_bppms):
            raise KeyError(f"no sequence or imported matrix for {key}")

    side = manifest.image_side
    tiles: dict[tuple[str, str], object] = {}
    for key in needed:
        path = bppm_cache_path(out_dir, key)
        registry.claim(path.name, key)
        if imported_bppms and key in imported_bppms:
            b = imported_bppms[key]
            if not path.exists():
                path.write_text(write_bppm(b))
        elif path.exists():
            b = read_bppm(path.read_text())
        else:
            b = compute_bppm(sequences[key], model, prune_threshold)
            path.write_text(write_bppm(b))
        tiles[key] = resize_bilinear(bppm_to_image(b), side)

    records = []
    for rec in manifest.records:
        rel = record_image_relpath(rec)
        registry.claim(rel, (rec.key_a, rec.key_b))
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(write_pgm(compose_pair(tiles[rec.key_a], tiles[rec.key_b])))
        records.append(replace(rec, image_path=rel))

    final = DatasetManifest(
        plan=manifest.plan,
        records=records,
        image_side=side,
        model_fingerprint=manifest.model_fingerprint,
    )
    (out_dir / "manifest.jsonl").write_text(write_manifest(final))
    return final


# ---------------------------------------------------------------------------
# Manifest serialization (JSON lines; header line 0, one record per line)

def write_manifest(manifest: DatasetManifest) -> str:
    header = {
        "plan": {
            "train": manifest.plan.train,
            "val": manifest.plan.val,
            "test": manifest.plan.test,
        },
        "seed": manifest.plan.seed,
        "image_side": manifest.image_side,
        "model": manifest.model_fingerprint,
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    for r in manifest.records:
        lines.append(
            json.dumps(
                {
                    "seq_a": r.seq_a,
                    "seq_b": r.seq_b,
                    "family_a": r.family_a,
                    "family_b": r.family_b,
                    "label": r.label,
                    "split": r.split,
                    "image_path": r.image_path,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


def read_manifest(text: str) -> DatasetManifest:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty manifest")
    header = json.loads(lines[0])
    try:
        plan = SplitPlan(
            train=list(header["plan"]["train"]),
            val=list(header["plan"]["val"]),
            test=list(header["plan"]["test"]),
            seed=int(header["seed"]),
        )
        image_side = int(header["image_side"])
        fingerprint = str(header["model"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad manifest header: {exc}") from None
    records = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        obj = json.loads(ln)
        records.append(
            PairRecord(
                seq_a=obj["seq_a"],
                seq_b=obj["seq_b"],
                family_a=obj["family_a"],
                family_b=obj["family_b"],
                label=obj["label"],
                split=obj["split"],
                image_path=obj.get("image_path", ""),
            )
        )
    return DatasetManifest(
        plan=plan,
        records=records,
        image_side=image_side,
        model_fingerprint=fingerprint,
    )
