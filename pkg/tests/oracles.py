"""Independent reference implementations used only by the tests.

Written with plain Python loops and the math module so they share no code
path with the vectorised library functions they check.
"""

import math

import numpy as np


def forward_scalar(layers, x):
    """layers: list of (weights, bias, relu: bool); x: list of rows. Returns outputs of every layer."""
    outputs = []
    rows = [list(map(float, r)) for r in x]
    for w, b, relu in layers:
        new_rows = []
        for r in rows:
            out = []
            for m in range(len(b)):
                acc = float(b[m])
                for n in range(len(r)):
                    acc += float(w[m][n]) * r[n]
                out.append(max(acc, 0.0) if relu else acc)
            new_rows.append(out)
        outputs.append(np.array(new_rows))
        rows = new_rows
    return outputs


def net_as_scalar_layers(net):
    return [(l.weights.tolist(), l.bias.tolist(), int(l.activation) == 1) for l in net.layers]


def masked_forward(net, x, removed):
    """Forward pass of the unpruned net with the removed neurons' outputs forced to zero."""
    h = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(net.layers):
        z = h @ layer.weights.astype(np.float64).T + layer.bias.astype(np.float64)
        h = np.maximum(z, 0.0) if int(layer.activation) == 1 else z
        if i < len(removed) and removed[i]:
            h = h.copy()
            h[:, list(removed[i])] = 0.0
    return h


def bin_scalar(v, bins):
    return min(int(math.floor(v * bins)), bins - 1)


def histogram_scalar(x, y, bins):
    counts = [[0] * bins for _ in range(bins)]
    for a, b in zip(x, y):
        counts[bin_scalar(a, bins)][bin_scalar(b, bins)] += 1
    return counts


def mi_double_loop(counts):
    """Plug-in MI in nats, evaluated term by term."""
    rows = len(counts)
    cols = len(counts[0])
    total = sum(sum(r) for r in counts)
    pu = [sum(counts[u]) / total for u in range(rows)]
    pv = [sum(counts[u][v] for u in range(rows)) / total for v in range(cols)]
    mi = 0.0
    for u in range(rows):
        for v in range(cols):
            if counts[u][v]:
                p = counts[u][v] / total
                mi += p * math.log(p / (pu[u] * pv[v]))
    return max(mi, 0.0)


def entropy_scalar(values, bins):
    counts = [0] * bins
    for v in values:
        counts[bin_scalar(v, bins)] += 1
    total = len(values)
    return -sum(c / total * math.log(c / total) for c in counts if c)


def spearman_closed_form(a, b):
    """1 - 6 sum d^2 / (n (n^2 - 1)); valid only without ties."""
    n = len(a)
    ra = {v: i + 1 for i, v in enumerate(sorted(a))}
    rb = {v: i + 1 for i, v in enumerate(sorted(b))}
    d2 = sum((ra[x] - rb[y]) ** 2 for x, y in zip(a, b))
    return 1 - 6 * d2 / (n * (n * n - 1))


def kendall_pairs(a, b):
    """tau-b by explicit pair enumeration."""
    n = len(a)
    conc = disc = ties_a = ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = (a[i] > a[j]) - (a[i] < a[j])
            db = (b[i] > b[j]) - (b[i] < b[j])
            if da == 0:
                ties_a += 1
            if db == 0:
                ties_b += 1
            if da * db > 0:
                conc += 1
            elif da * db < 0:
                disc += 1
    n0 = n * (n - 1) // 2
    return (conc - disc) / math.sqrt((n0 - ties_a) * (n0 - ties_b))
