#!/usr/bin/env python3
"""Derives the frozen nearest-neighbour table in include/lookaround/montage.hpp.

Electrode positions are the idealised spherical 10-20 coordinates (signed
polar angle from the vertex, azimuth), as used by BESA-style .elp files.
Ties are broken by the canonical electrode order.
"""
import math

ELECTRODES = [
    ("Fp1", -92, -72), ("Fp2", 92, 72), ("F7", -92, -36), ("F3", -60, -51),
    ("Fz", 46, 90), ("F4", 60, 51), ("F8", 92, 36), ("T3", -92, 0),
    ("C3", -46, 0), ("Cz", 0, 0), ("C4", 46, 0), ("T4", 92, 0),
    ("T5", -92, 36), ("P3", -60, 51), ("Pz", 46, -90), ("P4", 60, -51),
    ("T6", 92, -36), ("O1", -92, 72), ("O2", 92, -72),
]


def xyz(theta, phi):
    t, p = math.radians(theta), math.radians(phi)
    return (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))


def main():
    pos = {name: xyz(t, p) for name, t, p in ELECTRODES}
    order = [name for name, _, _ in ELECTRODES]
    for name in order:
        dists = []
        for rank, other in enumerate(order):
            if other == name:
                continue
            d = math.dist(pos[name], pos[other])
            dists.append((round(d, 9), rank, other))
        dists.sort()
        print(f'{{"{name}", "{dists[0][2]}", "{dists[1][2]}"}},')


if __name__ == "__main__":
    main()
