"""NumPy splatting kernel (fallback when the compiled one is unavailable).

Literal painter's algorithm: points are sorted far-to-near and each k x k
block overwrites earlier paint. The winner of a pixel is therefore the last
block that touched it.
"""
import numpy as np


def splat_winners(u, v, z, on_screen, height, width, k):
    """Index of the point owning each pixel, ``-1`` where nothing landed.

    Ties in depth go to the larger point index.
    """
    idx = np.flatnonzero(on_screen)
    winners = np.full(height * width, -1, dtype=np.int64)
    if idx.size == 0:
        return winners.reshape(height, width)
    # far first; equal depth -> smaller index first so the larger one paints last
    order = idx[np.lexsort((idx, -z[idx]))]
    r = k // 2
    offs = np.arange(-r, r + 1)
    du, dv = np.meshgrid(offs, offs)
    cols = u[order][:, None] + du.ravel()[None, :]
    rows = v[order][:, None] + dv.ravel()[None, :]
    inside = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
    pix = (rows * width + cols)[inside]
    owner = np.broadcast_to(order[:, None], inside.shape)[inside]
    # last occurrence of each pixel in paint order
    rev_pix = pix[::-1]
    uniq, first_in_rev = np.unique(rev_pix, return_index=True)
    winners[uniq] = owner[::-1][first_in_rev]
    return winners.reshape(height, width)
