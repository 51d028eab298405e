"""Acceptance suite. Each test is one release criterion; `pytest -v` prints one
pass/fail line per criterion. Criteria with stated time budgets enforce them.

 1. metric implementations track independent oracles on >= 1000 random inputs
 2. metric boundary identities hold to 1e-12
 3. bitmap encode/parse round-trips a 50-file corpus; slice lengths are exact
 4. a perfect predictor is ranked first for all 30 sampled records
 5. longer context improves similarity in both directions (chi down, cosine up)
 6. summary statistics track a high-precision oracle; the interval is exact
 7. score spot values and scaling invariance of the ranking
 8. protocol survives an echo-double run and 10,000 malformed frames
 9. two identical runs produce byte-identical artifacts
"""
import csv
import json
import math
import random
import struct
import time
from fractions import Fraction
from pathlib import Path

import pytest

from oracles import chi_oracle, cosine_oracle, jsd_oracle, ssim_oracle_windows

from carvegen import bmp, cli, matcher, metrics, protocol, stats, synthetic
from carvegen.errors import ProtocolError
from carvegen.fragments import build_pool, slice_fragment
from carvegen.matcher import DEFAULT_WEIGHTS

RATIOS = (Fraction(2, 5), Fraction(3, 5), Fraction(4, 5))


def rel_close(a, b, tol):
    return a == b or abs(a - b) <= tol * max(abs(a), abs(b))


def run_cli(*argv):
    return cli.main(list(argv))


def write_config(base, doc):
    path = base / "run.json"
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def summary_means(out_dir):
    means = {}
    with open(out_dir / "analysis" / "summary.csv") as fh:
        for row in csv.DictReader(fh):
            means[(row["metric"], row["set"])] = float(row["mean"])
    return means


# --------------------------------------------------------------- criterion 1


def random_byte_pair(rng):
    kind = rng.randrange(4)
    length = rng.randint(64, 4096)
    if kind == 0:  # full-range noise
        make = lambda: rng.randbytes(length)
    elif kind == 1:  # narrow alphabet, exercises empty expected bins
        alphabet = rng.sample(range(256), rng.randint(2, 16))
        make = lambda: bytes(rng.choice(alphabet) for _ in range(length))
    elif kind == 2:  # strongly biased values
        center = rng.randrange(256)
        make = lambda: bytes(
            min(255, max(0, int(rng.gauss(center, 24)))) for _ in range(length)
        )
    else:  # repeated short patterns
        pattern = rng.randbytes(rng.randint(1, 24))
        make = lambda: (pattern * (length // len(pattern) + 1))[:length]
    return make(), make()


def test_c1_metrics_track_oracles_on_random_inputs():
    started = time.monotonic()
    rng = random.Random(0xACCE_01)
    checked = 0

    for _ in range(800):
        a, b = random_byte_pair(rng)
        ha, hb = metrics.byte_histogram(a), metrics.byte_histogram(b)
        assert rel_close(
            metrics.cosine_similarity(ha, hb),
            cosine_oracle(ha.bins, hb.bins),
            1e-9,
        )
        assert rel_close(
            metrics.chi_square(ha, hb), chi_oracle(ha.bins, hb.bins), 1e-9
        )
        da, db = metrics.normalize(ha), metrics.normalize(hb)
        assert rel_close(metrics.jsd(da, db), jsd_oracle(da.probs, db.probs), 1e-9)
        checked += 1

    for _ in range(200):
        size = rng.randint(16, 32)
        x = [[rng.randrange(256) for _ in range(size)] for _ in range(size)]
        y = [[rng.randrange(256) for _ in range(size)] for _ in range(size)]
        got = metrics.ssim(x, y).global_value
        want = float(ssim_oracle_windows(x, y, metrics.DEFAULT_WINDOW).mean())
        assert rel_close(got, want, 1e-9)
        checked += 1

    elapsed = time.monotonic() - started
    assert checked >= 1000
    assert elapsed < 60.0
    print(f"criterion 1: {checked} random inputs matched oracles in {elapsed:.1f}s")


# --------------------------------------------------------------- criterion 2


def test_c2_metric_boundary_identities():
    rng = random.Random(0xACCE_02)
    for _ in range(20):
        data = rng.randbytes(rng.randint(64, 2048))
        h = metrics.byte_histogram(data)
        assert abs(metrics.cosine_similarity(h, h) - 1.0) <= 1e-12
        assert abs(metrics.chi_square(h, h)) <= 1e-12
        d = metrics.normalize(h)
        assert abs(metrics.jsd(d, d)) <= 1e-12

    size = 24
    x = [[rng.randrange(256) for _ in range(size)] for _ in range(size)]
    assert abs(metrics.ssim(x, x).global_value - 1.0) <= 1e-12

    low = metrics.byte_histogram(bytes(rng.randrange(128) for _ in range(512)))
    high = metrics.byte_histogram(
        bytes(128 + rng.randrange(128) for _ in range(512))
    )
    assert abs(metrics.cosine_similarity(low, high)) <= 1e-12

    mass_a = metrics.normalize(metrics.byte_histogram(b"\x00" * 100))
    mass_b = metrics.normalize(metrics.byte_histogram(b"\x01" * 100))
    assert abs(metrics.jsd(mass_a, mass_b) - 1.0) <= 1e-12
    print("criterion 2: boundary identities hold to 1e-12")


# --------------------------------------------------------------- criterion 3


def test_c3_bitmap_round_trip_and_slice_lengths(tmp_path):
    rng = random.Random(0xACCE_03)
    files = list(synthetic.write_corpus(tmp_path / "gen", 25, seed=33))
    manual = tmp_path / "manual"
    manual.mkdir()
    for i in range(25):
        img = bmp.BmpImage(width=32, height=32, pixels=rng.randbytes(32 * 32 * 3))
        path = manual / f"noise{i:02d}.bmp"
        path.write_bytes(bmp.encode_bmp(img))
        files.append(path)
    assert len(files) == 50

    expected_lengths = {
        Fraction(2, 5): (1250, 1876),
        Fraction(3, 5): (1875, 1251),
        Fraction(4, 5): (2500, 626),
    }
    for path in files:
        data = path.read_bytes()
        assert len(data) == 3126
        assert bmp.encode_bmp(bmp.parse_bmp(data)) == data
        for ratio, (cut, real_len) in expected_lengths.items():
            record = slice_fragment(data, ratio, source_id=path.stem)
            assert record.cut == cut
            assert len(record.real_fragment) == real_len
            assert record.input_fragment + record.real_fragment == data
    print("criterion 3: 50-file round-trip and slice lengths exact")


# --------------------------------------------------------------- criterion 4


def test_c4_perfect_predictor_always_ranks_first(tmp_path):
    started = time.monotonic()
    synthetic.write_corpus(tmp_path / "corpus", 36, seed=44)
    decoys = synthetic.write_decoy_sources(tmp_path / "decoys", seed=45)
    config = write_config(tmp_path, {
        "corpus_dir": "corpus",
        "output_dir": "out",
        "per_ratio_count": 12,
        "seed": 44,
        "jobs": 2,
        "sample_per_ratio": 10,
        "pool": {
            "size": 100,
            "decoy_sources": [str(p.relative_to(tmp_path)) for _, p in decoys],
        },
    })
    assert run_cli("--config", config, "prepare") == 0
    assert run_cli("--config", config, "match", "--perfect") == 0

    rows = (tmp_path / "out" / "match" / "tally.csv").read_text().splitlines()
    assert rows[1] == "30,0,0,30"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    print(f"criterion 4: perfect predictor 30/30 at rank one in {elapsed:.1f}s")


# --------------------------------------------------------------- criterion 5


def test_c5_longer_context_improves_similarity(tmp_path):
    started = time.monotonic()
    synthetic.write_corpus(tmp_path / "train", 220, seed=7)
    synthetic.write_corpus(tmp_path / "held", 300, seed=1007)
    config = write_config(tmp_path, {
        "corpus_dir": "held",
        "train_corpus_dir": "train",
        "output_dir": "out",
        "per_ratio_count": 100,
        "seed": 7,
        "jobs": 4,
        "predictor": {"kind": "builtin", "order": 3},
    })
    for phase in ("prepare", "train", "predict", "analyze"):
        assert run_cli("--config", config, phase) == 0

    means = summary_means(tmp_path / "out")
    chi_short, chi_long = means[("chi_square", "2_5")], means[("chi_square", "4_5")]
    cos_short, cos_long = means[("cosine", "2_5")], means[("cosine", "4_5")]
    elapsed = time.monotonic() - started
    assert elapsed < 600.0
    assert chi_long < chi_short
    assert cos_long > cos_short
    print(
        f"criterion 5: chi {chi_short:.1f}->{chi_long:.1f}, "
        f"cosine {cos_short:.4f}->{cos_long:.4f} in {elapsed:.1f}s"
    )


# --------------------------------------------------------------- criterion 6


def summary_oracle_fractions(values):
    """Mean, median, and sample variance in exact rational arithmetic."""
    exact = sorted(Fraction(v) for v in values)
    n = len(exact)
    mean = sum(exact) / n
    mid = n // 2
    median = exact[mid] if n % 2 else (exact[mid - 1] + exact[mid]) / 2
    variance = sum((v - mean) ** 2 for v in exact) / (n - 1)
    return mean, median, variance


def test_c6_statistics_track_high_precision_oracle():
    rng = random.Random(0xACCE_06)
    for case in range(1000):
        n = rng.randint(2, 60)
        scale = 10.0 ** rng.randint(-3, 6)
        values = [rng.uniform(0.1, 1.0) * scale for _ in range(n)]
        summary = stats.summarize(values)

        mean, median, variance = summary_oracle_fractions(values)
        assert summary.n == n
        assert summary.minimum == min(values)
        assert summary.maximum == max(values)
        assert rel_close(summary.mean, float(mean), 1e-12)
        assert rel_close(summary.median, float(median), 1e-12)
        assert rel_close(summary.std, math.sqrt(float(variance)), 1e-12)
        assert summary.ci95 == 1.96 * summary.std / math.sqrt(n)
    print("criterion 6: 1000 summaries within 1e-12 of the exact oracle")


# --------------------------------------------------------------- criterion 7


def test_c7_score_spot_values_and_scaling_invariance():
    perfect = matcher.combined_score(0.0, 0.0, 1.0, DEFAULT_WEIGHTS)
    assert perfect == -10.0

    typical = matcher.combined_score(409.58, 0.1864, 0.6690, DEFAULT_WEIGHTS)
    assert abs(typical - (-0.7302)) <= 1e-12

    # dyadic factors keep every scaled float exact, so the orderings must
    # agree candidate for candidate across 100 random pools
    rng = random.Random(0xACCE_07)
    factors = (0.25, 0.5, 2.0, 8.0, 1024.0)
    for case in range(100):
        target = rng.randbytes(rng.randint(400, 1200))
        pool = build_pool(
            target,
            [("blob", rng.randbytes(64_000))],
            pool_size=100,
            seed=rng.randrange(2**32),
        )
        base = matcher.rank_pool(target, pool)
        scaled = matcher.rank_pool(
            target, pool, weights=DEFAULT_WEIGHTS.scaled(factors[case % 5])
        )
        assert [c.pool_index for c in base.ranking] == [
            c.pool_index for c in scaled.ranking
        ]
        assert base.true_rank == scaled.true_rank
    print("criterion 7: spot scores exact; ranking stable across 100 scaled pools")


# --------------------------------------------------------------- criterion 8


def malformed_response_frame(rng):
    kind = rng.randrange(5)
    if kind == 0:  # wrong magic
        while True:
            head = rng.randbytes(2)
            if head not in (protocol.RESPONSE_MAGIC, protocol.ERROR_MAGIC):
                return head + rng.randbytes(rng.randrange(16))
    if kind == 1:  # truncated header
        return (protocol.RESPONSE_MAGIC + struct.pack("<I", 8))[: rng.randrange(6)]
    if kind == 2:  # declares more than was requested
        return protocol.RESPONSE_MAGIC + struct.pack("<I", 64 + rng.randrange(100))
    if kind == 3:  # declared payload missing or short
        declared = 1 + rng.randrange(64)
        return (
            protocol.RESPONSE_MAGIC
            + struct.pack("<I", declared)
            + rng.randbytes(rng.randrange(declared))
        )
    # oversized error frame
    return protocol.ERROR_MAGIC + struct.pack(
        "<I", protocol.MAX_ERROR_MESSAGE + 1 + rng.randrange(1000)
    )


def malformed_handshake(rng):
    if rng.randrange(2):
        while True:  # bad magic
            head = rng.randbytes(4)
            if head != protocol.HANDSHAKE_MAGIC:
                return head + bytes([protocol.PROTOCOL_VERSION])
    return protocol.HANDSHAKE_MAGIC + bytes(
        [(protocol.PROTOCOL_VERSION + 1 + rng.randrange(250)) % 256]
    )


def malformed_server_stream(rng):
    """A byte stream no conforming client would send; the server must refuse it
    rather than treat it as a clean shutdown."""
    kind = rng.randrange(5)
    if kind == 0:  # broken handshake
        while True:
            head = rng.randbytes(4)
            if head != protocol.HANDSHAKE_MAGIC:
                return head + rng.randbytes(rng.randrange(8))
    good = protocol.HANDSHAKE_MAGIC
    if kind == 1:  # wrong request magic
        while True:
            head = rng.randbytes(2)
            if head != protocol.REQUEST_MAGIC:
                return good + head + rng.randbytes(rng.randrange(16))
    if kind == 2:  # length fields cut off
        return good + protocol.REQUEST_MAGIC + rng.randbytes(1 + rng.randrange(7))
    if kind == 3:  # absurd declared sizes
        if rng.randrange(2):
            sizes = struct.pack("<II", protocol.MAX_PREFIX_LENGTH + 1, 4)
        else:
            sizes = struct.pack("<II", 4, protocol.MAX_REQUEST_LENGTH + 1)
        return good + protocol.REQUEST_MAGIC + sizes
    # prefix shorter than declared
    declared = 1 + rng.randrange(64)
    return (
        good
        + protocol.REQUEST_MAGIC
        + struct.pack("<II", declared, 16)
        + rng.randbytes(rng.randrange(declared))
    )


def test_c8_protocol_echo_run_and_fuzzed_frames(tmp_path):
    import sys

    # a full predict phase over the wire against the bundled echo double
    synthetic.write_corpus(tmp_path / "corpus", 12, seed=88)
    config = write_config(tmp_path, {
        "corpus_dir": "corpus",
        "output_dir": "out",
        "per_ratio_count": 4,
        "seed": 88,
        "jobs": 2,
        "predictor": {
            "kind": "external",
            "command": [sys.executable, "-m", "carvegen.stub_predictor"],
        },
    })
    assert run_cli("--config", config, "prepare") == 0
    assert run_cli("--config", config, "predict") == 0
    index = json.loads((tmp_path / "out" / "predictions" / "index.json").read_text())
    assert all(row["status"] == "ok" for row in index["records"])
    for row in index["records"]:
        data = (
            tmp_path / "out" / "predictions" / row["set"] / f"{row['source_id']}.bin"
        ).read_bytes()
        assert data == b"\x41" * row["requested"]

    # ten thousand malformed frames, all refused without crash or hang
    started = time.monotonic()
    rng = random.Random(0xACCE_08)
    survived = 0
    for _ in range(5000):
        frame = malformed_response_frame(rng)
        with pytest.raises(ProtocolError):
            protocol.read_response(protocol.bytes_reader(frame), 64)
        survived += 1
    for _ in range(2500):
        with pytest.raises(ProtocolError):
            protocol.read_handshake_reply(
                protocol.bytes_reader(malformed_handshake(rng))
            )
        survived += 1
    import io

    for _ in range(2500):
        out = io.BytesIO()
        rc = protocol.serve_stdio(
            lambda prefix, n: bytes(n),
            stdin=io.BytesIO(malformed_server_stream(rng)),
            stdout=out,
        )
        assert rc == 2
        survived += 1

    elapsed = time.monotonic() - started
    assert survived == 10_000
    assert elapsed < 60.0
    print(f"criterion 8: echo run clean; {survived} malformed frames refused")


# --------------------------------------------------------------- criterion 9


def tree_digest(root):
    import hashlib

    out = {}
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


def test_c9_two_runs_are_byte_identical(tmp_path):
    synthetic.write_corpus(tmp_path / "corpus", 30, seed=99)
    decoys = synthetic.write_decoy_sources(tmp_path / "decoys", seed=98)
    doc = {
        "corpus_dir": "corpus",
        "output_dir": "run_a",
        "per_ratio_count": 10,
        "seed": 99,
        "jobs": 2,
        "sample_per_ratio": 5,
        "predictor": {"kind": "builtin", "order": 3},
        "pool": {
            "size": 40,
            "decoy_sources": [str(p.relative_to(tmp_path)) for _, p in decoys],
        },
    }
    config = write_config(tmp_path, doc)

    for out_name in ("run_a", "run_b"):
        for phase in ("prepare", "train", "predict", "analyze", "match"):
            rc = run_cli(
                "--config", config, "--out", str(tmp_path / out_name), phase
            )
            assert rc == 0

    for subdir in ("dataset", "predictions", "analysis", "match"):
        a = tree_digest(tmp_path / "run_a" / subdir)
        b = tree_digest(tmp_path / "run_b" / subdir)
        assert a == b, f"{subdir} differs between runs"
        assert a  # the comparison must actually cover files
    assert (
        (tmp_path / "run_a" / "model.okbm").read_bytes()
        == (tmp_path / "run_b" / "model.okbm").read_bytes()
    )
    print("criterion 9: both runs byte-identical across all artifacts")
