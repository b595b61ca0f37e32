"""Cost-sensitive multiclass base learners over hashed features.

Cost-sensitive classification is reduced to one regressor per class: each
class predicts its own cost and the learner picks the cheapest allowed class.
A ``PolicyModel`` holds one such learner per predictor role.

Update rules (``variant``):

``sgd``        plain squared-loss gradient step
``sgd+``       adaptive per-coordinate steps, per-feature scale normalisation
               and the importance-invariant closed form for squared loss
``nn``         one tanh hidden layer shared by the classes of a role, SGD
``nn+ftrl``    same network, every weight updated with FTRL-Proximal
``multiclass`` the nn+ftrl network trained one-against-all (logistic) on the
               zero-cost class only, ignoring cost magnitudes
"""

from __future__ import annotations

import io
import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureVector

VARIANTS = ("sgd", "sgd+", "nn", "nn+ftrl", "multiclass")

DEFAULT_HPARAMS = {
    "sgd": {"lr": 0.002},
    "sgd+": {"lr": 0.5},
    "nn": {"lr": 0.002, "hidden": 5, "init_scale": 0.1, "inpass": True},
    "nn+ftrl": {"hidden": 5, "init_scale": 0.1, "inpass": True, "alpha": 0.05, "beta": 25.0, "l1": 0.0, "l2": 0.0},
    "multiclass": {"hidden": 5, "init_scale": 0.1, "inpass": True, "alpha": 0.05, "beta": 25.0, "l1": 0.0, "l2": 0.0},
}


class ConfigurationError(ValueError):
    pass


class NumericFault(ArithmeticError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class CostSensitiveExample:
    features: FeatureVector
    costs: dict[int, float]
    role: int = 0
    reference: int | None = None

    def __post_init__(self):
        if not self.costs:
            raise ValueError("a cost-sensitive example needs at least one cost")

    def positive_class(self) -> int:
        """The class a plain multiclass learner treats as correct."""
        low = min(self.costs.values())
        if self.reference is not None and self.costs.get(self.reference) == low:
            return self.reference
        return min(k for k, c in self.costs.items() if c == low)


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(np.ravel(arr)))[0])
        raise NumericFault(f"non-finite {what} at coordinate {bad}")


_F32_MAX = float(np.finfo(np.float32).max)


def _check_storable(arr: np.ndarray) -> None:
    """Linear tables are float32; refuse values that would overflow on store."""
    _check_finite(arr, "weight")
    if np.abs(arr).max(initial=0.0) > _F32_MAX:
        bad = int(np.argmax(np.abs(np.ravel(arr)) > _F32_MAX))
        raise NumericFault(f"weight overflows float32 at coordinate {bad}")


def _split_costs(costs: Mapping[int, float], num_classes: int) -> tuple[np.ndarray, np.ndarray]:
    ks = np.fromiter(sorted(costs), dtype=np.int64)
    if len(ks) and (ks[0] < 0 or ks[-1] >= num_classes):
        raise ConfigurationError(f"class id out of range 0..{num_classes - 1}: {ks.tolist()}")
    target = np.fromiter((costs[k] for k in ks.tolist()), dtype=np.float64)
    return ks, target


@dataclass
class FTRL:
    """FTRL-Proximal per-coordinate rule (McMahan et al.)."""

    alpha: float = 0.1
    beta: float = 1.0
    l1: float = 0.0
    l2: float = 0.0

    def weights(self, z: np.ndarray, n: np.ndarray, root_n: np.ndarray | None = None) -> np.ndarray:
        root_n = np.sqrt(n) if root_n is None else root_n
        denom = (self.beta + root_n) / self.alpha + self.l2
        if self.l1 == 0.0:
            return -z / denom
        w = -(z - np.sign(z) * self.l1) / denom
        w[np.abs(z) <= self.l1] = 0.0
        return w

    def initial_z(self, w0: np.ndarray) -> np.ndarray:
        """z such that ``weights(z, 0) == w0`` (lets the network start randomly)."""
        return -w0 * (self.beta / self.alpha + self.l2) - np.sign(w0) * self.l1

    def step(self, w: np.ndarray, z: np.ndarray, n: np.ndarray, g: np.ndarray):
        """Return updated (w, z, n) for the gathered coordinates."""
        n_new = n + g * g
        root_new = np.sqrt(n_new)
        z = z + g - (root_new - np.sqrt(n)) / self.alpha * w
        return self.weights(z, n_new, root_new), z, n_new


class LinearRegressor:
    """One linear regressor per class, interleaved in a (2^bits, K) table."""

    def __init__(self, bits: int, num_classes: int, rule: str = "sgd", lr: float = 0.5):
        if rule not in ("sgd", "sgd+"):
            raise ConfigurationError(f"unknown linear rule {rule!r}")
        self.bits = bits
        self.num_classes = num_classes
        self.rule = rule
        self.lr = lr
        shape = (1 << bits, num_classes)
        self.w = np.zeros(shape, dtype=np.float32)
        if rule == "sgd+":
            self.g2 = np.zeros(shape, dtype=np.float32)
            self.scale = np.zeros(shape, dtype=np.float32)

    def state(self) -> dict[str, np.ndarray]:
        if self.rule == "sgd+":
            return {"w": self.w, "g2": self.g2, "scale": self.scale}
        return {"w": self.w}

    def scores(self, idx: np.ndarray, val: np.ndarray) -> np.ndarray:
        return val @ self.w[idx].astype(np.float64)

    def update(self, idx: np.ndarray, val: np.ndarray, costs: Mapping[int, float], positive=None) -> None:
        assert idx.size == 0 or (idx[0] >= 0 and idx[-1] < self.w.shape[0])
        ks, target = _split_costs(costs, self.num_classes)
        cell = (idx[:, None], ks[None, :])
        wk = self.w[cell].astype(np.float64)
        if self.rule == "sgd":
            err = val @ wk - target
            _check_finite(err, "gradient")
            if not err.any():
                return
            new = wk - self.lr * np.outer(val, err)
            _check_storable(new)
            self.w[cell] = new
            return

        absval = np.abs(val)[:, None]
        scale = self.scale[cell].astype(np.float64)
        grow = absval > scale
        if grow.any():
            # keep w*x unchanged in normalised coordinates when a feature's range grows
            ratio = np.where(grow & (scale > 0), scale / np.where(grow, absval, 1.0), 1.0)
            wk = np.where(grow & (scale > 0), wk * ratio**2, wk)
            scale = np.maximum(scale, absval)
        safe_scale = np.where(scale > 0, scale, 1.0)
        xhat = val[:, None] / safe_scale
        err = val @ wk - target
        _check_finite(err, "gradient")
        g2 = self.g2[cell].astype(np.float64) + (err[None, :] * xhat) ** 2
        with np.errstate(divide="ignore"):
            metric = np.where(g2 > 0, 1.0 / np.sqrt(g2), 0.0)
        norm = np.sum(xhat**2 * metric, axis=0)
        step = np.zeros_like(err)
        live = norm > 0
        step[live] = err[live] * -np.expm1(-self.lr * norm[live]) / norm[live]
        wk = wk - step[None, :] * metric * xhat / safe_scale
        _check_storable(wk)
        self.w[cell] = wk
        self.g2[cell] = g2
        self.scale[cell] = scale


class NeuralRegressor:
    """Single tanh hidden layer shared by all classes of a role.

    ``hidden = tanh(x W + b)``; class k's output is ``V[k] . hidden + c[k]``.
    With ``loss="squared"`` the output regresses the cost.  With
    ``loss="logistic"`` it is a one-against-all score and the predicted cost
    is its negation.
    """

    def __init__(self, bits: int, num_classes: int, hidden: int = 5, lr: float = 0.002,
                 ftrl: FTRL | None = None, loss: str = "squared", init_scale: float = 0.1,
                 inpass: bool = True, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.bits = bits
        self.num_classes = num_classes
        self.hidden = hidden
        self.lr = lr
        self.ftrl = ftrl
        self.loss = loss
        self.W = rng.uniform(-init_scale, init_scale, size=(1 << bits, hidden))
        self.b = np.zeros(hidden)
        self.V = rng.uniform(-init_scale, init_scale, size=(num_classes, hidden))
        self.c = np.zeros(num_classes)
        self.inpass = inpass
        # direct input -> output weights, one column per class
        self.U = np.zeros((1 << bits, num_classes)) if inpass else None
        if ftrl is not None:
            self.acc = {}
            for name in self.params():
                w0 = getattr(self, name)
                self.acc[name] = (ftrl.initial_z(w0), np.zeros_like(w0))

    def params(self) -> dict[str, np.ndarray]:
        out = {"W": self.W, "b": self.b, "V": self.V, "c": self.c}
        if self.inpass:
            out["U"] = self.U
        return out

    def state(self) -> dict[str, np.ndarray]:
        out = dict(self.params())
        if self.ftrl is not None:
            for name, (z, n) in self.acc.items():
                out[f"{name}.z"] = z
                out[f"{name}.n"] = n
        return out

    def forward(self, idx: np.ndarray, val: np.ndarray):
        h = np.tanh(val @ self.W[idx] + self.b)
        out = self.V @ h + self.c
        if self.inpass:
            out = out + val @ self.U[idx]
        return h, out

    def scores(self, idx: np.ndarray, val: np.ndarray) -> np.ndarray:
        out = self.forward(idx, val)[1]
        return -out if self.loss == "logistic" else out

    def _targets(self, costs: Mapping[int, float], positive: int | None):
        ks, target = _split_costs(costs, self.num_classes)
        if self.loss == "logistic":
            if positive is None:
                positive = int(ks[np.argmin(target)])
            target = np.where(ks == positive, 1.0, -1.0)
        return ks, target

    def loss_and_grads(self, idx, val, costs, positive=None):
        """Loss on one example and its gradients (``W`` rows aligned with idx)."""
        ks, target = self._targets(costs, positive)
        h, out = self.forward(idx, val)
        yk = out[ks]
        if self.loss == "squared":
            diff = yk - target
            loss = 0.5 * float(diff @ diff)
            dy = diff
        else:
            margin = target * yk
            loss = float(np.sum(np.logaddexp(0.0, -margin)))
            dy = -target / (1.0 + np.exp(margin))
        gV = np.outer(dy, h)
        gc = dy
        dh = self.V[ks].T @ dy
        da = dh * (1.0 - h * h)
        grads = {"W": np.outer(val, da), "b": da, "V": gV, "c": gc}
        if self.inpass:
            grads["U"] = np.outer(val, dy)
        return loss, grads, ks

    def update(self, idx, val, costs, positive=None) -> None:
        assert idx.size == 0 or (idx[0] >= 0 and idx[-1] < self.W.shape[0])
        _, grads, ks = self.loss_and_grads(idx, val, costs, positive)
        _check_finite(grads["c"], "gradient")
        rows = {"W": idx, "b": slice(None), "V": ks, "c": ks, "U": (idx[:, None], ks[None, :])}
        for name, g in grads.items():
            param = getattr(self, name)
            r = rows[name]
            if self.ftrl is None:
                param[r] = param[r] - self.lr * g
            else:
                z, n = self.acc[name]
                w_new, z_new, n_new = self.ftrl.step(param[r], z[r], n[r], g)
                param[r], z[r], n[r] = w_new, z_new, n_new
        _check_finite(self.c, "weight")


def _role_learner(variant: str, bits: int, num_classes: int, hp: dict, rng: np.random.Generator):
    if variant in ("sgd", "sgd+"):
        return LinearRegressor(bits, num_classes, rule=variant, lr=hp["lr"])
    ftrl = None
    if variant in ("nn+ftrl", "multiclass"):
        ftrl = FTRL(hp["alpha"], hp["beta"], hp["l1"], hp["l2"])
    return NeuralRegressor(
        bits, num_classes, hidden=hp["hidden"], lr=hp.get("lr", 0.0), ftrl=ftrl,
        loss="logistic" if variant == "multiclass" else "squared",
        init_scale=hp["init_scale"], inpass=hp.get("inpass", True), rng=rng,
    )


@dataclass
class PolicyModel:
    """Per-role cost-sensitive learners plus the configuration they were built with.

    ``metadata`` carries task configuration (feature set, label dictionary, ...)
    that must travel with the weights.
    """

    variant: str
    bits: int
    role_classes: tuple[int, ...]
    hparams: dict
    seed: int = 0
    metadata: dict = field(default_factory=dict)
    learners: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown learner {self.variant!r}; choose from {VARIANTS}")
        self.role_classes = tuple(int(k) for k in self.role_classes)
        if not self.learners:
            rng = np.random.default_rng(self.seed)
            self.learners = [_role_learner(self.variant, self.bits, k, self.hparams, rng) for k in self.role_classes]

    def _learner(self, role: int):
        if not 0 <= role < len(self.learners):
            raise ConfigurationError(f"unknown predictor role {role}")
        return self.learners[role]

    def predict_costs(self, role: int, features: FeatureVector) -> np.ndarray:
        learner = self._learner(role)
        idx, val = features.flatten()
        return learner.scores(idx, val)

    def predict(self, role: int, features: FeatureVector, allowed: Sequence[int]) -> int:
        return cs_predict(self, role, features, allowed)

    def update(self, example: CostSensitiveExample) -> None:
        cs_update(self, example.role, example)


def make_model(variant: str, role_classes: Sequence[int], bits: int = 18, seed: int = 0,
               metadata: dict | None = None, **overrides) -> PolicyModel:
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown learner {variant!r}; choose from {VARIANTS}")
    hp = dict(DEFAULT_HPARAMS[variant])
    hp.update({k: v for k, v in overrides.items() if v is not None})
    return PolicyModel(variant, bits, tuple(role_classes), hp, seed, dict(metadata or {}))


def cs_predict(model: PolicyModel, role: int, features: FeatureVector, allowed: Sequence[int]) -> int:
    """Cheapest allowed class; ties go to the smallest class id."""
    if not allowed:
        raise ValueError("allowed action set is empty")
    scores = model.predict_costs(role, features)
    best = None
    best_score = math.inf
    for a in sorted(allowed):
        s = scores[a]
        if s < best_score:
            best, best_score = a, s
    return best if best is not None else min(allowed)


def cs_update(model: PolicyModel, role: int, example: CostSensitiveExample) -> None:
    learner = model._learner(role)
    idx, val = example.features.flatten()
    positive = example.positive_class() if model.variant == "multiclass" else None
    learner.update(idx, val, example.costs, positive)


# ---------------------------------------------------------------------------
# model files

MAGIC = b"DSRCHMDL"
FORMAT_VERSION = 1


def serialize_model(model: PolicyModel) -> bytes:
    arrays = []
    for role, learner in enumerate(model.learners):
        for name, arr in learner.state().items():
            arrays.append((f"{role}/{name}", np.ascontiguousarray(arr)))
    header = {
        "format_version": FORMAT_VERSION,
        "variant": model.variant,
        "bits": model.bits,
        "role_classes": list(model.role_classes),
        "hparams": model.hparams,
        "seed": model.seed,
        "metadata": model.metadata,
        "arrays": [{"name": n, "dtype": a.dtype.str, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
    buf.write(blob)
    for _, arr in arrays:
        buf.write(arr.tobytes())
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize_model(data: bytes) -> PolicyModel:
    if len(data) < len(MAGIC) + 12 or data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ModelFormatError("model file is corrupted or truncated (checksum mismatch)")
    version, hlen = struct.unpack_from("<II", body, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    start = len(MAGIC) + 8
    try:
        header = json.loads(body[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable model header: {exc}") from None
    offset = start + hlen
    states: dict[int, dict[str, np.ndarray]] = {}
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(body):
            raise ModelFormatError("model file truncated")
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset).reshape(spec["shape"]).copy()
        offset += nbytes
        role, name = spec["name"].split("/", 1)
        states.setdefault(int(role), {})[name] = arr
    if offset != len(body):
        raise ModelFormatError("trailing bytes in model file")

    model = PolicyModel(header["variant"], header["bits"], tuple(header["role_classes"]),
                        header["hparams"], header["seed"], header["metadata"])
    for role, learner in enumerate(model.learners):
        state = states.get(role, {})
        expected = learner.state()
        missing = sorted(set(expected) - set(state))
        if missing:
            raise ModelFormatError(f"role {role} is missing arrays {missing}")
        for name, current in expected.items():
            if state[name].shape != current.shape:
                raise ModelFormatError(f"array {role}/{name} has shape {state[name].shape}, expected {current.shape}")
        if isinstance(learner, LinearRegressor):
            for name in expected:
                setattr(learner, name, state[name])
        else:
            for name in learner.params():
                setattr(learner, name, state[name])
            if learner.ftrl is not None:
                learner.acc = {name: (state[f"{name}.z"], state[f"{name}.n"]) for name in learner.params()}
    return model
