"""Writes sioux_falls.net: the 24-node, 76-link Sioux Falls topology as a
link-based state graph (one state per directed link plus an origin and a
destination dummy) for trips from node 1 to node 20.

Capacities and free-flow times follow the public benchmark files. The
benchmark's link lengths equal the free-flow times, so length is taken from
the node coordinates instead to keep the two attributes apart.
Attributes per transition into link b: capacity/1e4, coordinate length/1e5,
free-flow time/10, and left/right/u-turn dummies for the turn from the previous link into b.
Every transition into a link costs one unit (link count); entering the
destination dummy costs nothing.
"""
import math

COORDS = {
    1: (50000, 510000), 2: (320000, 510000), 3: (50000, 440000), 4: (130000, 440000),
    5: (220000, 440000), 6: (320000, 440000), 7: (420000, 380000), 8: (320000, 380000),
    9: (220000, 380000), 10: (220000, 320000), 11: (130000, 320000), 12: (50000, 320000),
    13: (50000, 50000), 14: (130000, 190000), 15: (220000, 190000), 16: (320000, 320000),
    17: (320000, 260000), 18: (420000, 320000), 19: (320000, 190000), 20: (320000, 50000),
    21: (220000, 50000), 22: (220000, 130000), 23: (130000, 130000), 24: (130000, 50000),
}

# (from, to, capacity, length, free-flow time); each pair appears in both directions.
PAIRS = [
    (1, 2, 25900.2, 6, 6), (1, 3, 23403.47, 4, 4), (2, 6, 4958.18, 5, 5), (3, 4, 17110.52, 4, 4),
    (3, 12, 23403.47, 4, 4), (4, 5, 17782.79, 2, 2), (4, 11, 4908.83, 6, 6), (5, 6, 4948.89, 4, 4),
    (5, 9, 10000, 5, 5), (6, 8, 4898.59, 2, 2), (7, 8, 7841.81, 3, 3), (7, 18, 23403.47, 2, 2),
    (8, 9, 5050.19, 10, 10), (8, 16, 5045.82, 5, 5), (9, 10, 13915.79, 3, 3), (10, 11, 10000, 5, 5),
    (10, 15, 13512, 6, 6), (10, 16, 4854.92, 4, 4), (10, 17, 4993.51, 8, 8), (11, 12, 4908.83, 6, 6),
    (11, 14, 4876.51, 4, 4), (12, 13, 25900.2, 3, 3), (13, 24, 5091.26, 4, 4), (14, 15, 5127.53, 5, 5),
    (14, 23, 4924.79, 4, 4), (15, 19, 14564.75, 3, 3), (15, 22, 9599.18, 3, 3), (16, 17, 5229.91, 2, 2),
    (16, 18, 19679.9, 3, 3), (17, 19, 4823.95, 2, 2), (18, 20, 23403.47, 4, 4), (19, 20, 5002.61, 4, 4),
    (20, 21, 5059.91, 6, 6), (20, 22, 5075.7, 5, 5), (21, 22, 5229.91, 2, 2), (21, 24, 4885.36, 3, 3),
    (22, 23, 5000, 4, 4), (23, 24, 5078.51, 2, 2),
]
ORIGIN_NODE, DEST_NODE = 1, 20

links = []
for a, b, cap, length, ftt in PAIRS:
    links.append((a, b, cap, length, ftt))
    links.append((b, a, cap, length, ftt))
links.sort()
assert len(links) == 76


def bearing(i, j):
    (x0, y0), (x1, y1) = COORDS[i], COORDS[j]
    return math.atan2(y1 - y0, x1 - x0)


def turn(prev, nxt):
    if nxt[1] == prev[0]:
        return 0, 0, 1
    d = math.degrees(bearing(nxt[0], nxt[1]) - bearing(prev[0], prev[1]))
    d = (d + 180.0) % 360.0 - 180.0
    if abs(d) >= 170.0:
        return 0, 0, 1
    if 10.0 < d < 170.0:
        return 1, 0, 0
    if -170.0 < d < -10.0:
        return 0, 1, 0
    return 0, 0, 0


def attrs(link, t):
    a, b, cap, _length, ftt = link
    (x0, y0), (x1, y1) = COORDS[a], COORDS[b]
    return [cap / 1e4, round(math.hypot(x1 - x0, y1 - y0) / 1e5, 4), ftt / 10, *t]


origin, dest = 76, 77
out = [
    "# Sioux Falls topology (24 nodes, 76 links) as a link-based state graph.",
    "# States 0-75 are links sorted by (tail, head); 76 is the origin dummy at node 1,",
    "# 77 the destination dummy at node 20. Generated by make_sioux_falls.py.",
    "states 78", f"origin {origin}", f"destination {dest}",
    "attrs capacity length tt left right uturn", "constraints 1 quantum 1",
]
for k, (a, b, *_rest) in enumerate(links):
    out.append(f"# link {k}: {a} -> {b}")
for k, link in enumerate(links):
    if link[0] == ORIGIN_NODE:
        out.append("edge %d %d %s 1" % (origin, k, " ".join(f"{v:g}" for v in attrs(link, (0, 0, 0)))))
for k, prev in enumerate(links):
    for m, nxt in enumerate(links):
        if nxt[0] == prev[1]:
            out.append("edge %d %d %s 1" % (k, m, " ".join(f"{v:g}" for v in attrs(nxt, turn(prev, nxt)))))
    if prev[1] == DEST_NODE:
        out.append(f"edge {k} {dest} 0 0 0 0 0 0 0")
open("sioux_falls.net", "w").write("\n".join(out) + "\n")
