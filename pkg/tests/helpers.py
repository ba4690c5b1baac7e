"""Shared test utilities: oracle models, gradient checking, projection oracle."""

import numpy as np

from macroflow import cfm_loss


class ConstantField:
    """Oracle velocity model: returns a fixed field regardless of state/time."""

    def __init__(self, velocity):
        self._v = np.asarray(velocity, dtype=float)

    def velocity(self, positions, t, instance):
        return np.broadcast_to(self._v, positions.shape).copy()

    def forward(self, positions, t, instance):
        return self.velocity(positions, t, instance)


class TargetField:
    """Oracle model that always predicts the exact conditional target."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    def forward(self, positions, t, instance):
        return self.target.copy()

    def velocity(self, positions, t, instance):
        return self.target.copy()


def perturb_params(model, rng, scale=0.05):
    """Randomize every parameter (incl. the zero-initialized decoder head)."""
    for p in model.params.values():
        p.data = p.data + rng.normal(0.0, scale, size=p.data.shape)


def model_gradcheck(model, batch, rng, n_coords=100, step=1e-5, rtol=1e-4):
    """Full-model gradient check against central finite differences.

    Samples `n_coords` parameter coordinates across all tensors and returns the
    max relative error; the backward pass is audited against the independent
    finite-difference oracle on the CFM loss.
    """
    model.zero_grad()
    loss = cfm_loss(model, batch)
    loss.backward()

    names = list(model.params)
    sizes = np.array([model.params[k].data.size for k in names])
    probs = sizes / sizes.sum()
    max_rel = 0.0
    worst = None
    for _ in range(n_coords):
        name = names[rng.choice(len(names), p=probs)]
        p = model.params[name]
        coord = int(rng.integers(p.data.size))
        original = p.data.flat[coord]

        p.data.flat[coord] = original + step
        plus = float(cfm_loss(model, batch).data)
        p.data.flat[coord] = original - step
        minus = float(cfm_loss(model, batch).data)
        p.data.flat[coord] = original

        fd = (plus - minus) / (2 * step)
        got = 0.0 if p.grad is None else p.grad.flat[coord]
        rel = abs(got - fd) / max(abs(got), abs(fd), 1e-4)
        if rel > max_rel:
            max_rel, worst = rel, (name, coord, got, fd)
    return max_rel, worst


def projection_oracle(instance, predicted, grid_cols, grid_rows, boundary_weight):
    """Independent exhaustive enumeration of the greedy projection rule.

    Walks macros in descending size order; for each, scans every anchor cell
    in row-major order, keeps those whose covered cell block is in bounds and
    disjoint from every already-placed block, and takes the first strictly
    smallest cost(cell) = ||center - clamped prediction||^2 + lambda * d_boundary^2.
    Returns (positions, per-macro anchor choices).
    """
    canvas = instance.canvas
    n = instance.num_macros
    areas = [instance.macros[i].width * instance.macros[i].height for i in range(n)]
    order = sorted(range(n), key=lambda i: (-areas[i], i))

    cw, ch = 2.0 / grid_cols, 2.0 / grid_rows
    placed_blocks = []  # (c0, c1, r0, r1) covered half-open cell ranges
    positions = np.zeros((n, 2))
    choices = {}
    for i in order:
        m = instance.macros[i]
        wn, hn = m.width * 2.0 / canvas.width, m.height * 2.0 / canvas.height
        sx = max(1, int(np.ceil(wn / cw - 1e-9)))
        sy = max(1, int(np.ceil(hn / ch - 1e-9)))
        half_w, half_h = m.width / canvas.width, m.height / canvas.height
        tx = min(max(predicted[i, 0], -1.0 + half_w), 1.0 - half_w)
        ty = min(max(predicted[i, 1], -1.0 + half_h), 1.0 - half_h)

        best = None
        best_cost = np.inf
        for r in range(grid_rows - sy + 1):
            for c in range(grid_cols - sx + 1):
                if any(c < c1 and c + sx > c0 and r < r1 and r + sy > r0
                       for c0, c1, r0, r1 in placed_blocks):
                    continue
                cx = -1.0 + c * cw + half_w
                cy = -1.0 + r * ch + half_h
                dx = min(c * cw, 2.0 - c * cw - wn)
                dy = min(r * ch, 2.0 - r * ch - hn)
                d = max(min(dx, dy), 0.0)
                cost = (cx - tx) ** 2 + (cy - ty) ** 2 + boundary_weight * d**2
                if cost < best_cost:
                    best_cost = cost
                    best = (r, c, cx, cy)
        if best is None:
            raise RuntimeError("oracle found no feasible cell")
        r, c, cx, cy = best
        placed_blocks.append((c, c + sx, r, r + sy))
        positions[i] = (cx, cy)
        choices[i] = (r, c)
    return positions, choices
