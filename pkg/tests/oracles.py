"""Independent oracles used to derive expected test values.

Everything here is deliberately written on a different route than the
production code: exact Fraction arithmetic instead of floats where ratios
are compared, plain pixel loops instead of array ops, and a from-scratch
SHA-256 instead of hashlib. Golden values frozen in the test suite were
computed with these.
"""

from __future__ import annotations

import struct
from fractions import Fraction

# ---------------------------------------------------------------------------
# SHA-256, from the FIPS 180-4 definition.

_K = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
]


def _rotr(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & 0xFFFFFFFF


def sha256_hex(message: bytes) -> str:
    h = [
        0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
        0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
    ]
    length = len(message) * 8
    message += b"\x80"
    message += b"\x00" * ((56 - len(message) % 64) % 64)
    message += struct.pack(">Q", length)

    for block_start in range(0, len(message), 64):
        block = message[block_start:block_start + 64]
        w = list(struct.unpack(">16I", block))
        for i in range(16, 64):
            s0 = _rotr(w[i - 15], 7) ^ _rotr(w[i - 15], 18) ^ (w[i - 15] >> 3)
            s1 = _rotr(w[i - 2], 17) ^ _rotr(w[i - 2], 19) ^ (w[i - 2] >> 10)
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & 0xFFFFFFFF)

        a, b, c, d, e, f, g, hh = h
        for i in range(64):
            s1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
            ch = (e & f) ^ (~e & g)
            temp1 = (hh + s1 + ch + _K[i] + w[i]) & 0xFFFFFFFF
            s0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
            maj = (a & b) ^ (a & c) ^ (b & c)
            temp2 = (s0 + maj) & 0xFFFFFFFF
            hh = g
            g = f
            f = e
            e = (d + temp1) & 0xFFFFFFFF
            d = c
            c = b
            b = a
            a = (temp1 + temp2) & 0xFFFFFFFF

        h = [(x + y) & 0xFFFFFFFF for x, y in zip(h, (a, b, c, d, e, f, g, hh))]

    return "".join(f"{x:08x}" for x in h)


# ---------------------------------------------------------------------------
# IoU on axis-aligned boxes, exact rational arithmetic.
# Boxes are (x_min, y_min, x_max, y_max) tuples of numbers.


def iou_exact(a, b) -> Fraction:
    ax0, ay0, ax1, ay1 = (Fraction(v) for v in a)
    bx0, by0, bx1, by1 = (Fraction(v) for v in b)
    ix = max(Fraction(0), min(ax1, bx1) - max(ax0, bx0))
    iy = max(Fraction(0), min(ay1, by1) - max(ay0, by0))
    inter = ix * iy
    if inter == 0:
        return Fraction(0)
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


# ---------------------------------------------------------------------------
# Greedy per-label suppression as a boolean recurrence over all pairs.
# Detections are dicts: {"label_id", "bbox": (x0,y0,x1,y1), "confidence"}.


def det_sort_key(d):
    return (
        -d["confidence"],
        d["label_id"],
        d["bbox"][0],
        d["bbox"][1],
        d["bbox"][2],
        d["bbox"][3],
    )


def nms_bruteforce(dets, iou_threshold, max_out):
    ordered = sorted(dets, key=det_sort_key)
    thr = Fraction(iou_threshold)
    kept_flags = []
    for i, d in enumerate(ordered):
        keep = True
        for j in range(i):
            if not kept_flags[j]:
                continue
            other = ordered[j]
            if other["label_id"] != d["label_id"]:
                continue
            if iou_exact(other["bbox"], d["bbox"]) > thr:
                keep = False
                break
        kept_flags.append(keep)
    kept = [d for d, f in zip(ordered, kept_flags) if f]
    return kept[:max_out]


# ---------------------------------------------------------------------------
# Grid/prototype detector reference: plain loops over pixels, then the
# brute-force suppression above.

MAX_RGB_DIST_SQ = 195075  # 3 * 255^2


def refdet_reference(pixels, grid, prototypes, score_threshold, nms_iou_threshold, max_detections):
    """pixels: list of rows, each row a list of (r, g, b) int tuples."""
    height = len(pixels)
    width = len(pixels[0])
    candidates = []
    for row in range(grid):
        y0_px, y1_px = row * height // grid, (row + 1) * height // grid
        for col in range(grid):
            x0_px, x1_px = col * width // grid, (col + 1) * width // grid
            count = (y1_px - y0_px) * (x1_px - x0_px)
            if count == 0:
                continue
            sum_r = sum_g = sum_b = 0
            for y in range(y0_px, y1_px):
                for x in range(x0_px, x1_px):
                    r, g, b = pixels[y][x]
                    sum_r += r
                    sum_g += g
                    sum_b += b
            mean = (sum_r / count, sum_g / count, sum_b / count)
            for label_id, proto in enumerate(prototypes):
                dist_sq = sum((mc - pc) ** 2 for mc, pc in zip(mean, proto))
                score = max(0.0, 1.0 - dist_sq ** 0.5 / MAX_RGB_DIST_SQ ** 0.5)
                if score >= score_threshold:
                    candidates.append({
                        "label_id": label_id,
                        "bbox": (col / grid, row / grid, (col + 1) / grid, (row + 1) / grid),
                        "confidence": score,
                    })
    return nms_bruteforce(candidates, nms_iou_threshold, max_detections)


# ---------------------------------------------------------------------------
# Snapshot re-derivation: expected annotation rows from observations plus
# their latest review, by the three verdict rules.


def derive_snapshot_rows(observations):
    """observations: list of dicts with content_digest, detections, review.

    Returns (image_digests, annotation_rows) where annotation_rows are
    (content_digest, detection_dict, source) tuples in deterministic order.
    """
    reviewed = [o for o in observations if o.get("review")]
    reviewed.sort(key=lambda o: o["content_digest"])
    images = [o["content_digest"] for o in reviewed]
    annotations = []
    for obs in reviewed:
        verdict = obs["review"]["verdict"]
        if verdict == "confirm":
            for det in obs["detections"]:
                annotations.append((obs["content_digest"], det, "model"))
        elif verdict == "correct":
            for det in obs["review"]["corrected_detections"]:
                annotations.append((obs["content_digest"], det, "expert"))
        elif verdict == "refute":
            pass
        else:
            raise ValueError(f"unknown verdict {verdict!r}")
    return images, annotations
