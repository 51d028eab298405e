"""Fragment datasets: slicing files into known/missing pairs, and decoy pools.

A record keeps the whole source file plus one cut position; the leading piece (the
"input" a predictor sees) and the trailing piece (the "real" continuation) are views,
so input ++ real == full holds by construction. Cuts are taken over the entire file,
header included, at floor(ratio * length).

`build_dataset` lays a corpus out on disk as

    <out>/<ratio_tag>/{full,input,real}/<source_id>.bin

with a manifest.json recording the seed, the generator identity, and SHA-256 digests
of every fragment, which is enough to audit or rebuild the dataset.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import bmp, rng as rng_mod
from .errors import (
    BmpError,
    DegenerateSliceError,
    DuplicateTrueFragmentError,
    InsufficientCorpusError,
    InsufficientSourcesError,
    SourceTooSmallError,
)

MANIFEST_SCHEMA_VERSION = 1
DEFAULT_RATIOS = (Fraction(2, 5), Fraction(3, 5), Fraction(4, 5))
_DUPLICATE_RETRY_BUDGET = 32


def parse_ratio(text: str) -> Fraction:
    ratio = Fraction(text)
    if not 0 < ratio < 1:
        raise ValueError(f"ratio {text} outside (0, 1)")
    return ratio


def ratio_tag(ratio: Fraction) -> str:
    """Directory-safe label, e.g. 2/5 -> '2_5'."""
    return f"{ratio.numerator}_{ratio.denominator}"


def cut_position(length: int, ratio: Fraction) -> int:
    """floor(ratio * length), in exact integer arithmetic."""
    return (ratio.numerator * length) // ratio.denominator


@dataclass(frozen=True)
class FragmentRecord:
    source_id: str
    ratio: Fraction
    full_bytes: bytes
    cut: int

    def __post_init__(self):
        if not 0 < self.cut < len(self.full_bytes):
            raise DegenerateSliceError(
                f"cut {self.cut} leaves an empty side of a {len(self.full_bytes)}-byte file"
            )

    @property
    def input_fragment(self) -> bytes:
        return self.full_bytes[: self.cut]

    @property
    def real_fragment(self) -> bytes:
        return self.full_bytes[self.cut :]


def slice_fragment(full_bytes: bytes, ratio: Fraction, source_id: str = "") -> FragmentRecord:
    cut = cut_position(len(full_bytes), ratio)
    return FragmentRecord(source_id=source_id, ratio=ratio, full_bytes=full_bytes, cut=cut)


@dataclass(frozen=True)
class ManifestEntry:
    source_id: str
    ratio: Fraction
    cut: int
    full_len: int
    sha256_full: str
    sha256_input: str
    sha256_real: str


@dataclass(frozen=True)
class DatasetManifest:
    seed: int
    image_size: int
    per_ratio_count: int
    ratios: tuple[Fraction, ...]
    generator_name: str
    generator_version: int
    records: tuple[ManifestEntry, ...]

    def entries_for(self, ratio: Fraction) -> list[ManifestEntry]:
        return [e for e in self.records if e.ratio == ratio]

    def to_json(self) -> str:
        doc = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "seed": self.seed,
            "image_size": self.image_size,
            "per_ratio_count": self.per_ratio_count,
            "ratios": [str(r) for r in self.ratios],
            "generator": {"name": self.generator_name, "version": self.generator_version},
            "records": [
                {
                    "source_id": e.source_id,
                    "ratio": str(e.ratio),
                    "cut": e.cut,
                    "full_len": e.full_len,
                    "sha256_full": e.sha256_full,
                    "sha256_input": e.sha256_input,
                    "sha256_real": e.sha256_real,
                }
                for e in self.records
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise ValueError(f"unknown manifest schema {doc.get('schema_version')}")
        return cls(
            seed=doc["seed"],
            image_size=doc["image_size"],
            per_ratio_count=doc["per_ratio_count"],
            ratios=tuple(parse_ratio(r) for r in doc["ratios"]),
            generator_name=doc["generator"]["name"],
            generator_version=doc["generator"]["version"],
            records=tuple(
                ManifestEntry(
                    source_id=r["source_id"],
                    ratio=parse_ratio(r["ratio"]),
                    cut=r["cut"],
                    full_len=r["full_len"],
                    sha256_full=r["sha256_full"],
                    sha256_input=r["sha256_input"],
                    sha256_real=r["sha256_real"],
                )
                for r in doc["records"]
            ),
        )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonicalize(img, data, path, image_size):
    if img is not None:
        if img.width == image_size and img.height == image_size and img.row_order is bmp.RowOrder.BOTTOM_UP:
            return data
        return bmp.encode_bmp(bmp.resize_nearest(img, image_size, image_size))
    try:
        from PIL import Image
    except ImportError:
        return None
    try:
        with Image.open(path) as decoded:
            rgb = decoded.convert("RGB")
            width, height = rgb.size
            raw = rgb.tobytes()
    except Exception:
        return None
    # Pillow hands back RGB triples; storage wants BGR
    pixels = bytearray(len(raw))
    pixels[0::3] = raw[2::3]
    pixels[1::3] = raw[1::3]
    pixels[2::3] = raw[0::3]
    decoded_img = bmp.BmpImage(width=width, height=height, pixels=bytes(pixels))
    return bmp.encode_bmp(bmp.resize_nearest(decoded_img, image_size, image_size))


def build_dataset(
    corpus_dir: str | Path,
    out_dir: str | Path,
    *,
    ratios: tuple[Fraction, ...] = DEFAULT_RATIOS,
    per_ratio_count: int,
    seed: int,
    image_size: int = 32,
) -> DatasetManifest:
    """Select, convert, slice, and write a fragment dataset; returns its manifest.

    Selection shuffles the sorted corpus listing with the "dataset" sub-stream of
    `seed`, so the same corpus and seed always yield the same dataset, bit for bit.
    """
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    if per_ratio_count < 1:
        raise ValueError("per_ratio_count must be >= 1")
    if not ratios:
        raise ValueError("need at least one ratio")

    paths = sorted(p for p in corpus_dir.iterdir() if p.is_file())
    usable: list[tuple[str, bytes]] = []
    for path in paths:
        data = load_corpus_image(path, image_size)
        if data is not None:
            usable.append((path.stem, data))

    needed = per_ratio_count * len(ratios)
    if len(usable) < needed:
        raise InsufficientCorpusError(
            f"{len(usable)} usable corpus images, {needed} needed"
        )

    stream = rng_mod.substream(seed, "dataset")
    stream.shuffle(usable)
    chosen = usable[:needed]

    seen: dict[str, int] = {}
    entries = []
    for index, ratio in enumerate(ratios):
        tag = ratio_tag(ratio)
        for subdir in ("full", "input", "real"):
            (out_dir / tag / subdir).mkdir(parents=True, exist_ok=True)
        for stem, data in chosen[index * per_ratio_count : (index + 1) * per_ratio_count]:
            count = seen.get(stem, 0)
            seen[stem] = count + 1
            source_id = stem if count == 0 else f"{stem}-{count + 1}"
            record = slice_fragment(data, ratio, source_id=source_id)
            (out_dir / tag / "full" / f"{source_id}.bin").write_bytes(record.full_bytes)
            (out_dir / tag / "input" / f"{source_id}.bin").write_bytes(record.input_fragment)
            (out_dir / tag / "real" / f"{source_id}.bin").write_bytes(record.real_fragment)
            entries.append(
                ManifestEntry(
                    source_id=source_id,
                    ratio=ratio,
                    cut=record.cut,
                    full_len=len(data),
                    sha256_full=_sha256(record.full_bytes),
                    sha256_input=_sha256(record.input_fragment),
                    sha256_real=_sha256(record.real_fragment),
                )
            )

    manifest = DatasetManifest(
        seed=seed,
        image_size=image_size,
        per_ratio_count=per_ratio_count,
        ratios=tuple(ratios),
        generator_name=rng_mod.GENERATOR_NAME,
        generator_version=rng_mod.GENERATOR_VERSION,
        records=tuple(entries),
    )
    (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def load_corpus_image(path: Path, image_size: int) -> bytes | None:
    """Canonical bitmap bytes for one corpus file, or None if it cannot be used.

    Conforming bitmaps pass through byte-exact; other bitmaps in the subset are
    resampled; everything else goes through Pillow for decoding only, with the
    resampling and re-encoding done here so results never depend on library versions.
    """
    try:
        data = path.read_bytes()
    except OSError:
        return None
    try:
        img = bmp.parse_bmp(data)
    except BmpError:
        img = None
    return _canonicalize(img, data, path, image_size)


def load_manifest(out_dir: str | Path) -> DatasetManifest:
    return DatasetManifest.from_json((Path(out_dir) / "manifest.json").read_text("utf-8"))


def load_record(out_dir: str | Path, entry: ManifestEntry, *, verify: bool = True) -> FragmentRecord:
    path = Path(out_dir) / ratio_tag(entry.ratio) / "full" / f"{entry.source_id}.bin"
    data = path.read_bytes()
    if verify and _sha256(data) != entry.sha256_full:
        raise InsufficientCorpusError(f"stored fragment {path} does not match its manifest digest")
    return FragmentRecord(
        source_id=entry.source_id, ratio=entry.ratio, full_bytes=data, cut=entry.cut
    )


def verify_dataset(out_dir: str | Path) -> list[str]:
    """Return a list of digest/layout problems; empty means the dataset is intact."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    problems = []
    for entry in manifest.records:
        tag = ratio_tag(entry.ratio)
        parts = {}
        for subdir, digest in (
            ("full", entry.sha256_full),
            ("input", entry.sha256_input),
            ("real", entry.sha256_real),
        ):
            path = out_dir / tag / subdir / f"{entry.source_id}.bin"
            try:
                data = path.read_bytes()
            except OSError:
                problems.append(f"{path}: missing")
                continue
            parts[subdir] = data
            if _sha256(data) != digest:
                problems.append(f"{path}: digest mismatch")
        if len(parts) == 3 and parts["input"] + parts["real"] != parts["full"]:
            problems.append(f"{tag}/{entry.source_id}: input ++ real != full")
    return problems


@dataclass(frozen=True)
class PoolEntry:
    pool_index: int
    format_tag: str
    data: bytes


@dataclass(frozen=True)
class FragmentPool:
    target_length: int
    true_index: int
    entries: tuple[PoolEntry, ...]

    @property
    def true_entry(self) -> PoolEntry:
        return self.entries[self.true_index]


def build_pool(
    true_fragment: bytes,
    decoy_sources: list[tuple[str, bytes]],
    pool_size: int,
    seed: int,
    *,
    format_weights: dict[str, float] | None = None,
) -> FragmentPool:
    """Hide the true fragment among pool_size-1 equal-length slices of decoy files.

    Decoys are cut at any offset of their source, never parsed. A decoy that happens to
    equal the true fragment byte-for-byte is redrawn up to a fixed budget, after which
    the pool is refused; two decoys may still collide with each other if the sources do.
    """
    if pool_size < 2:
        raise ValueError("pool_size must be at least 2")
    if not true_fragment:
        raise ValueError("true fragment is empty")
    if not decoy_sources:
        raise InsufficientSourcesError("no decoy sources supplied")

    target = len(true_fragment)
    for tag, data in decoy_sources:
        if len(data) < target:
            raise SourceTooSmallError(
                f"decoy source tagged {tag!r} holds {len(data)} bytes, {target} needed"
            )

    tags = sorted({tag for tag, _ in decoy_sources})
    if format_weights is None:
        weights = {tag: 1.0 for tag in tags}
    else:
        weights = {tag: float(format_weights.get(tag, 0.0)) for tag in tags}
        if not any(w > 0 for w in weights.values()):
            raise InsufficientSourcesError("format weights exclude every available source")
    by_tag = {tag: [d for t, d in decoy_sources if t == tag] for tag in tags}
    weighted = [(tag, weights[tag]) for tag in tags if weights[tag] > 0]
    total_weight = sum(w for _, w in weighted)

    stream = rng_mod.Rng(seed)
    true_index = stream.randrange(pool_size)

    entries = []
    for index in range(pool_size):
        if index == true_index:
            entries.append(PoolEntry(pool_index=index, format_tag="bmp", data=true_fragment))
            continue
        for _ in range(_DUPLICATE_RETRY_BUDGET):
            pick = stream.random() * total_weight
            tag = weighted[-1][0]
            for candidate, weight in weighted:
                pick -= weight
                if pick < 0:
                    tag = candidate
                    break
            source = by_tag[tag][stream.randrange(len(by_tag[tag]))]
            offset = stream.randrange(len(source) - target + 1)
            piece = source[offset : offset + target]
            if piece != true_fragment:
                entries.append(PoolEntry(pool_index=index, format_tag=tag, data=piece))
                break
        else:
            raise DuplicateTrueFragmentError(
                f"decoy slot {index} kept matching the true fragment after "
                f"{_DUPLICATE_RETRY_BUDGET} draws"
            )

    return FragmentPool(target_length=target, true_index=true_index, entries=tuple(entries))
