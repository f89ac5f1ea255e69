#!/usr/bin/env python3
"""Freezes raw-DEFLATE sizes from Python's zlib for the redundancy tests."""
import json
import random
import zlib
from pathlib import Path


def raw_deflate_size(data: bytes) -> int:
    c = zlib.compressobj(6, zlib.DEFLATED, -15, 8, zlib.Z_DEFAULT_STRATEGY)
    return len(c.compress(data) + c.flush())


def main():
    r = random.Random(1234)
    cases = {
        "a_x1024": b"a" * 1024,
        "random_bytes_4096": bytes(r.randrange(256) for _ in range(4096)),
        "random_alnum_4096": "".join(
            r.choice("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789") for _ in range(4096)
        ).encode(),
        "pangram": b"The quick brown fox jumps over the lazy dog.",
        "repeated_sentence": b"Let me double check the sum. " * 40,
        "polish_utf8": "Zażółć gęślą jaźń. Obliczmy 12 * 7 = 84.".encode(),
        "single_byte": b"x",
    }
    out = []
    for name, data in cases.items():
        out.append({"name": name, "hex": data.hex(), "bytes": len(data), "deflate_size": raw_deflate_size(data),
                    "zlib_version": zlib.ZLIB_VERSION})
    path = Path(__file__).with_name("deflate_fixtures.json")
    path.write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
