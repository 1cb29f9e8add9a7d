"""Hand-built transmission graph around an anchor block ``b_j``.

Encodes the hearing facts of the standard worked example: ``b_{j+1}`` and
``b_{j+2}`` extend the FRSH sequence, ``b_{j+3..j+5}`` miss ``b_{j+2}``,
``b_{j+6}`` hears it, and ``b_{j+4}`` heard ``b_{j+1}``; backwards,
``b_j <- b_{j-1} <- b_{j-2}``, ``b_{j-3}`` is heard by neither ``b_{j-2}``
nor ``b_{j-1}`` but is heard by ``b_j``.  Pairs the example leaves open are
filled so that the BRSH sequence continues through ``b_{j-4}`` and
``b_{j-6}``.
"""

from . import xgraph

ANCHOR = 7
SIZE = ANCHOR + 7


def edges(j=ANCHOR):
    return [
        # forward
        (j, j + 1),
        (j + 1, j + 2),
        (j + 2, j + 6),
        (j + 1, j + 4),
        (j, j + 3),
        (j + 1, j + 5),
        # backward
        (j - 1, j),
        (j - 2, j - 1),
        (j - 3, j),
        (j - 4, j - 2),
        (j - 6, j - 4),
        (j - 5, j - 3),
    ]


def graph(d=0.5, seed=0):
    return xgraph.from_edges(SIZE, edges(), d=d, seed=seed)


def values(g=None, j=ANCHOR):
    """The six counts the example is built to exhibit."""
    g = graph() if g is None else g
    return {
        "FS(j,j+5)": xgraph.fs_count(g, j, j + 5),
        "FS(j,j+6)": xgraph.fs_count(g, j, j + 6),
        "BS(j,j-5)": xgraph.bs_count(g, j, j - 5),
        "BS(j,j-6)": xgraph.bs_count(g, j, j - 6),
        "FU(j,j+4)": xgraph.forward_unheard(g, j, j + 4),
        "BU(j,j-3)": xgraph.backward_unheard(g, j, j - 3),
    }


EXPECTED = {
    "FS(j,j+5)": 3,
    "FS(j,j+6)": 4,
    "BS(j,j-5)": 4,
    "BS(j,j-6)": 5,
    "FU(j,j+4)": 1,
    "BU(j,j-3)": 2,
}
