"""Walk through the four-point planar example: permutations, proxy distances, index contents."""

import numpy as np

from permkit.dataset import DataSet
from permkit.inverted import build_mifile, build_napp, mifile_accumulate, napp_candidates
from permkit.permutation import binarize, compute_permutations, external_pivots, footrule, hamming, spearman_rho
from permkit.spaces import Space

PIVOTS = np.array([[0.0, 6.0], [5.0, 4.0], [7.0, 8.0], [7.0, 1.0]])
POINTS = np.array([[1.5, 5.0], [0.5, 2.0], [4.0, 10.0], [3.0, 0.0]])
NAMES = "abcd"


def main():
    space = Space("l2")
    pivots = external_pivots(DataSet.dense(PIVOTS))
    pts = DataSet.dense(POINTS)
    perms = compute_permutations(pts, pivots, space)
    true = space.query_distances(pts, pts[0])

    print("point  permutation   L2(a,.)  footrule  spearman  hamming(b=3)")
    for i, name in enumerate(NAMES):
        p = perms[i]
        print(f"  {name}    {tuple(p.tolist())}   {true[i]:7.3f}  {footrule(perms[0], p):8d}  "
              f"{spearman_rho(perms[0], p):8d}  {hamming(binarize(perms[0], 3), binarize(p, 3)):12d}")

    mi = build_mifile(pts, space, m_i=2, pivots=pivots)
    print("\nMI-file posting lists (position, object):")
    for j in range(pivots.m):
        print(f"  pivot {j + 1}: {[(pos, NAMES[i]) for pos, i in mi.posting_list(j)]}")
    acc, _, _ = mifile_accumulate(mi, pts[0], m_s=2)
    print("accumulators for query a:", {NAMES[i]: int(acc[i]) for i in range(4)})

    napp = build_napp(pts, space, m_i=2, pivots=pivots)
    for t in (1, 2):
        ids, counts = napp_candidates(napp, pts[0], t)
        print(f"NAPP candidates for a with t={t}:", {NAMES[i]: int(c) for i, c in zip(ids, counts)})


if __name__ == "__main__":
    main()
