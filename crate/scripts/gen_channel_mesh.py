#!/usr/bin/env python3
"""Writes a closed triangulated U-channel ("halfpipe") as an OFF file.

The solid spans x in [0, L], y in [0, W], z in [0, H] minus the open channel
y > t, t < z < H - t, so the channel runs along x and opens toward +y. The
surface is the boundary of a union of grid cells and is watertight by
construction. Normals point out of the solid.
"""

import argparse


def build(length, width, height, wall, cell):
    nx, ny, nz = (round(v / cell) for v in (length, width, height))
    hx, hy, hz = length / nx, width / ny, height / nz

    def solid(i, j, k):
        if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
            return False
        y, z = (j + 0.5) * hy, (k + 0.5) * hz
        return y < wall or z < wall or z > height - wall

    index = {}
    verts = []

    def vid(i, j, k):
        key = (i, j, k)
        if key not in index:
            index[key] = len(verts)
            verts.append((i * hx, j * hy, k * hz))
        return index[key]

    tris = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if not solid(i, j, k):
                    continue
                for axis in range(3):
                    for side in (0, 1):
                        n = [i, j, k]
                        n[axis] += 1 if side else -1
                        if solid(*n):
                            continue
                        # the face at coordinate c along `axis`, corners counter-clockwise
                        # seen from outside
                        c = [i, j, k]
                        c[axis] += side
                        u, v = (axis + 1) % 3, (axis + 2) % 3
                        corners = []
                        for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                            p = list(c)
                            p[u] += du
                            p[v] += dv
                            corners.append(vid(*p))
                        if not side:
                            corners.reverse()
                        a, b, cc, d = corners
                        tris.append((a, b, cc))
                        tris.append((a, cc, d))
    return verts, tris


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=float, default=1.0)
    ap.add_argument("--width", type=float, default=0.5)
    ap.add_argument("--height", type=float, default=0.5)
    ap.add_argument("--wall", type=float, default=0.1)
    ap.add_argument("--cell", type=float, default=0.1)
    ap.add_argument("-o", "--output", default="channel.off")
    args = ap.parse_args()
    verts, tris = build(args.length, args.width, args.height, args.wall, args.cell)
    with open(args.output, "w") as f:
        f.write("OFF\n")
        f.write(f"# U-channel length={args.length} width={args.width} height={args.height} "
                f"wall={args.wall} cell={args.cell}\n")
        f.write(f"{len(verts)} {len(tris)} 0\n")
        for x, y, z in verts:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in tris:
            f.write(f"3 {a} {b} {c}\n")
    print(f"{len(verts)} vertices, {len(tris)} triangles -> {args.output}")


if __name__ == "__main__":
    main()
