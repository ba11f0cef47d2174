#!/usr/bin/env python3
"""Smoke test for the idsmark_py extension module.

Builds nothing itself: it locates the compiled cdylib under target/, copies
it into a temporary directory under the importable name, and exercises the
codec, channel, decoder, and entropy bindings end to end.

Usage: cargo build -p idsmark-py && python3 python/smoke_test.py
"""

import math
import pathlib
import random
import shutil
import sys
import tempfile


def load_module():
    root = pathlib.Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libidsmark_py.so", "idsmark_py.so", "libidsmark_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not found; run `cargo build -p idsmark-py` first")
    tmp = tempfile.mkdtemp(prefix="idsmark_py_")
    shutil.copy(built, pathlib.Path(tmp) / "idsmark_py.so")
    sys.path.insert(0, tmp)
    import idsmark_py

    return idsmark_py


def main():
    m = load_module()
    rng = random.Random(7)

    # Bit sequences cross the boundary as bytes; lists of 0/1 are accepted
    # on the way in.
    message = [rng.randint(0, 1) for _ in range(120)]
    sparse = m.sparsify(message)
    assert isinstance(sparse, bytes)

    # Codec round trip: 4-bit symbols to 5-bit codewords and back.
    assert len(sparse) == len(message) // 4 * 5
    assert list(m.desparsify(sparse)) == message

    # Watermarking is an involution.
    watermark = [rng.randint(0, 1) for _ in range(len(sparse))]
    transmitted = m.apply_watermark(sparse, watermark)
    assert m.strip_watermark(transmitted, watermark) == sparse

    # A pure-transmission chain moves bits through unchanged, and every
    # decoder pins the drift path to zero.
    identity = [[1.0, 0.0, 0.0, 0.0]] * 4
    received, drift, final_offset = m.transmit(identity, 1, transmitted, seed=99)
    assert received == transmitted
    assert drift == [0] * len(transmitted)
    assert final_offset == 0
    for decoder in ("dm1", "dm2", "fsmc"):
        posterior, path, resynced = m.decode(identity, 1, decoder, received, watermark)
        assert len(posterior) == len(watermark)
        assert path == [0] * len(watermark)
        assert resynced == received
    assert list(m.desparsify(m.strip_watermark(resynced, watermark))) == message

    # Entropy of the uniform 3-state chain is log2(3) exactly.
    third = 1.0 / 3.0
    h = m.average_entropy([[third] * 3] * 3)
    assert abs(h - math.log2(3)) <= 1e-12, h

    # Matrix generation hits its entropy target and reduces to a stochastic
    # 3-state matrix.
    rows, entropy = m.generate_matrix(0.15, tol=0.001, seed=42)
    assert abs(entropy - 0.15) <= 0.001
    a3 = m.reduce_matrix(rows)
    for row in a3:
        assert abs(sum(row) - 1.0) <= 1e-9

    # Errors surface as ValueError with the library's message.
    try:
        m.sparsify([0, 1, 2])
    except ValueError:
        pass
    else:
        raise AssertionError("invalid bits should raise ValueError")

    print("smoke test passed: codec, channel, decoders, entropy, generation")


if __name__ == "__main__":
    main()
