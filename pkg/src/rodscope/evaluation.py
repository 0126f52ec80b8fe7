"""Object-level segmentation scoring against two ground truths.

A prediction is compared component by component: two components match when
their IoU reaches the threshold ``T`` (T > 0.5 makes matches unique). The
l_ex error weights unmatched predicted objects by ``beta`` and missed objects
by ``1 - beta``, normalised by the number of distinct objects across both
ground truths. A prediction is *valid* when its mean l_ex over the two ground
truths does not exceed their mutual distance d_ex.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    ConfigurationError,
    check_beta,
    check_iou_threshold,
    check_mask,
    check_same_shape,
)
from .components import Component, ComponentSet, label_components

MODE_DEFAULTS = {
    "cell": {"iou_threshold": 0.8, "beta": 0.7},
    "fluor": {"iou_threshold": 0.6, "beta": 0.15},
}


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.8
    beta: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "iou_threshold", check_iou_threshold(self.iou_threshold))
        object.__setattr__(self, "beta", check_beta(self.beta))

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> EvalConfig:
        if mode not in MODE_DEFAULTS:
            raise ConfigurationError(f"unknown mode {mode!r}; expected one of {sorted(MODE_DEFAULTS)}")
        params = dict(MODE_DEFAULTS[mode])
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**params)


@dataclass(frozen=True)
class MatchTable:
    """Injective pairing between the components of two sets (by position)."""

    pairs: tuple
    unmatched_a: frozenset
    unmatched_b: frozenset

    @property
    def n_matched(self) -> int:
        return len(self.pairs)


def _as_components(x, name="mask") -> ComponentSet:
    if isinstance(x, ComponentSet):
        return x
    return label_components(check_mask(x, name))


def iou(c1: Component, c2: Component) -> float:
    """Intersection over union of two components' pixel sets."""
    inter = len(c1.pixel_set & c2.pixel_set)
    return inter / (c1.area_px + c2.area_px - inter)


def _overlaps(a: ComponentSet, b: ComponentSet):
    """(index_a, index_b, intersection) for every overlapping component pair."""
    la, lb = a.label_image, b.label_image
    both = (la > 0) & (lb > 0)
    if not both.any():
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    key_a, key_b = la[both].astype(np.int64), lb[both].astype(np.int64)
    width = int(lb.max()) + 1
    keys, counts = np.unique(key_a * width + key_b, return_counts=True)
    ids_a, ids_b = np.divmod(keys, width)
    pos_a = {cid: i for i, cid in enumerate(a.ids)}
    pos_b = {cid: i for i, cid in enumerate(b.ids)}
    ia = np.array([pos_a[int(i)] for i in ids_a], dtype=np.int64)
    ib = np.array([pos_b[int(i)] for i in ids_b], dtype=np.int64)
    return ia, ib, counts.astype(np.int64)


def match_components(a, b, iou_threshold: float) -> MatchTable:
    """Pair components of ``a`` and ``b`` whose IoU is at least ``iou_threshold``."""
    iou_threshold = check_iou_threshold(iou_threshold)
    a, b = _as_components(a, "a"), _as_components(b, "b")
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    ia, ib, inter = _overlaps(a, b)
    pairs = []
    if inter.size:
        union = a.areas[ia] + b.areas[ib] - inter
        scores = inter / union
        hit = scores >= iou_threshold
        pairs = sorted(zip(ia[hit].tolist(), ib[hit].tolist(), scores[hit].tolist()))
    used_a = [p[0] for p in pairs]
    used_b = [p[1] for p in pairs]
    if len(set(used_a)) != len(used_a) or len(set(used_b)) != len(used_b):
        raise AssertionError("non-injective matching; IoU threshold must exceed 0.5")
    return MatchTable(
        pairs=tuple(pairs),
        unmatched_a=frozenset(range(len(a))) - set(used_a),
        unmatched_b=frozenset(range(len(b))) - set(used_b),
    )


def unmatched_counts(pred, gt, iou_threshold: float) -> tuple:
    """Return (false positives, false negatives) of ``pred`` against ``gt``."""
    table = match_components(pred, gt, iou_threshold)
    return len(table.unmatched_a), len(table.unmatched_b)


def detection_metrics(tp: int, fp: int, fn: int, f_beta_param: float = 2.0) -> tuple:
    """Precision, recall and F-beta from object counts; every 0/0 is 0."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    b2 = f_beta_param**2
    denom = b2 * precision + recall
    f_score = (1 + b2) * precision * recall / denom if denom else 0.0
    return precision, recall, f_score


def l_ex_from_counts(fp: int, fn: int, union_size: int, beta: float) -> float:
    if union_size < 1:
        raise ValueError("union_size must be >= 1")
    return (beta * fp + (1 - beta) * fn) / union_size


def d_ex_from_counts(disagreed: int, union_size: int) -> float:
    """d_ex as half the disagreed-object count over the object-union size."""
    if union_size < 1:
        raise ValueError("union_size must be >= 1")
    return disagreed / (2 * union_size)


class GroundTruthPair:
    """Two ground-truth segmentations of one image, matched at ``iou_threshold``."""

    def __init__(self, g1, g2, iou_threshold: float = 0.8):
        self.g1 = _as_components(g1, "g1")
        self.g2 = _as_components(g2, "g2")
        if self.g1.dims != self.g2.dims:
            raise ValueError(f"dimension mismatch: {self.g1.dims} vs {self.g2.dims}")
        self.iou_threshold = check_iou_threshold(iou_threshold)
        self.gt_match = match_components(self.g1, self.g2, self.iou_threshold)
        self.union_size = len(self.g1) + len(self.g2) - self.gt_match.n_matched
        if self.union_size < 1:
            raise ValueError("both ground truths are empty; the l_ex error is undefined")

    @property
    def dims(self) -> tuple:
        return self.g1.dims

    @property
    def disagreed(self) -> int:
        """Objects present in exactly one of the two ground truths."""
        return len(self.gt_match.unmatched_a) + len(self.gt_match.unmatched_b)

    def ground_truth(self, index: int) -> ComponentSet:
        if index not in (1, 2):
            raise ValueError("ground-truth index must be 1 or 2")
        return self.g1 if index == 1 else self.g2


def _check_pair_config(pair: GroundTruthPair, cfg: EvalConfig) -> None:
    if pair.iou_threshold != cfg.iou_threshold:
        raise ConfigurationError(
            f"ground-truth pair was matched at T={pair.iou_threshold}, config has T={cfg.iou_threshold}"
        )


def l_ex_error(pred, gt_index: int, pair: GroundTruthPair, cfg: EvalConfig) -> float:
    """l_ex error of ``pred`` against ground truth ``gt_index`` of ``pair``.

    The denominator is the pair's union size whichever ground truth is used.
    """
    _check_pair_config(pair, cfg)
    fp, fn = unmatched_counts(_as_components(pred, "pred"), pair.ground_truth(gt_index), cfg.iou_threshold)
    return l_ex_from_counts(fp, fn, pair.union_size, cfg.beta)


def d_ex_distance(pair: GroundTruthPair, cfg: EvalConfig) -> float:
    """Mean of the two ground truths' l_ex errors against each other.

    Each unmatched object appears once as a false positive (weight beta) and
    once as a false negative (weight 1 - beta). The two weights are summed
    before scaling, so the result does not depend on beta even in floating
    point. The plain average is :func:`d_ex_averaged`.
    """
    _check_pair_config(pair, cfg)
    m = pair.gt_match
    u1, u2 = len(m.unmatched_a), len(m.unmatched_b)
    w = cfg.beta + (1 - cfg.beta)
    return (w * u1 + w * u2) / (2 * pair.union_size)


def d_ex_averaged(pair: GroundTruthPair, cfg: EvalConfig) -> float:
    """(l_ex(G1, G2) + l_ex(G2, G1)) / 2 evaluated term by term."""
    _check_pair_config(pair, cfg)
    m = pair.gt_match
    u1, u2 = len(m.unmatched_a), len(m.unmatched_b)
    forward = l_ex_from_counts(u1, u2, pair.union_size, cfg.beta)
    backward = l_ex_from_counts(u2, u1, pair.union_size, cfg.beta)
    return (forward + backward) / 2


def d_ex_symmetric_difference(pair: GroundTruthPair) -> float:
    """d_ex computed from the disagreed-object count; independent of beta."""
    return d_ex_from_counts(pair.disagreed, pair.union_size)


@dataclass(frozen=True)
class GroundTruthScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_beta: float
    l_ex: float

    @classmethod
    def from_counts(cls, tp, fp, fn, union_size, beta, f_beta_param=2.0) -> GroundTruthScore:
        p, r, f = detection_metrics(tp, fp, fn, f_beta_param)
        return cls(tp, fp, fn, p, r, f, l_ex_from_counts(fp, fn, union_size, beta))


REPORT_COLUMNS = ("TP", "FP", "FN", "Precision", "Recall", "F2-Score", "l_ex")


@dataclass(frozen=True)
class EvalReport:
    gt1: GroundTruthScore
    gt2: GroundTruthScore
    union_size: int
    d_ex: float
    config: EvalConfig = field(default_factory=EvalConfig)

    @property
    def avg_l_ex(self) -> float:
        return (self.gt1.l_ex + self.gt2.l_ex) / 2

    @property
    def valid(self) -> bool:
        return self.avg_l_ex <= self.d_ex

    @classmethod
    def from_counts(cls, counts1, counts2, union_size, d_ex, config: EvalConfig, f_beta_param=2.0):
        """Build a report from (tp, fp, fn) per ground truth, as printed in result tables."""
        s1 = GroundTruthScore.from_counts(*counts1, union_size, config.beta, f_beta_param)
        s2 = GroundTruthScore.from_counts(*counts2, union_size, config.beta, f_beta_param)
        return cls(s1, s2, union_size, d_ex, config)

    @staticmethod
    def header() -> list:
        cols = []
        for i in (1, 2):
            cols += [f"GT{i} {c}" for c in REPORT_COLUMNS]
        return cols + ["Avg. l_ex", "d_ex", "valid", "union size", "IoU threshold", "beta"]

    def row(self) -> list:
        out = []
        for s in (self.gt1, self.gt2):
            out += [s.tp, s.fp, s.fn, _fmt(s.precision), _fmt(s.recall), _fmt(s.f_beta), _fmt(s.l_ex)]
        return out + [
            _fmt(self.avg_l_ex),
            _fmt(self.d_ex),
            "true" if self.valid else "false",
            self.union_size,
            repr(self.config.iou_threshold),
            repr(self.config.beta),
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(avg_l_ex=self.avg_l_ex, valid=self.valid)
        return d


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_reports(reports, path_or_file, labels=None) -> None:
    """Write one CSV row per report; ``labels`` fills an optional leading Model column."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(f, lineterminator="\n")
        header = EvalReport.header()
        writer.writerow((["Model"] + header) if labels is not None else header)
        for i, rep in enumerate(reports):
            writer.writerow(([labels[i]] + rep.row()) if labels is not None else rep.row())
    finally:
        if own:
            f.close()


def reports_to_csv(reports, labels=None) -> str:
    buf = io.StringIO()
    write_reports(reports, buf, labels)
    return buf.getvalue()


def validity(pred, pair: GroundTruthPair, cfg: EvalConfig, f_beta_param: float = 2.0) -> EvalReport:
    """Score ``pred`` against both ground truths and decide validity."""
    _check_pair_config(pair, cfg)
    pred = _as_components(pred, "pred")
    if pred.dims != pair.dims:
        raise ValueError(f"dimension mismatch: prediction {pred.dims} vs ground truth {pair.dims}")
    scores = []
    for gt in (pair.g1, pair.g2):
        table = match_components(pred, gt, cfg.iou_threshold)
        scores.append(
            GroundTruthScore.from_counts(
                table.n_matched,
                len(table.unmatched_a),
                len(table.unmatched_b),
                pair.union_size,
                cfg.beta,
                f_beta_param,
            )
        )
    return EvalReport(scores[0], scores[1], pair.union_size, d_ex_distance(pair, cfg), cfg)


def _check_prob_pair(pr, g):
    pr = np.asarray(pr, dtype=np.float64)
    g = check_mask(g, "g")
    check_same_shape(pr, g, ("pr", "g"))
    if pr.size and (pr.min() < 0 or pr.max() > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return pr, g


def pixel_bce(pr, g, eps: float = 1e-7) -> float:
    """Mean binary cross-entropy of a probability map against a binary mask."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    pr, g = _check_prob_pair(pr, g)
    p = np.clip(pr, eps, 1 - eps)
    return float(-np.mean(np.where(g, np.log(p), np.log1p(-p))))


def pixel_jaccard_loss(pr, g) -> float:
    """1 - soft IoU of a probability map and a binary mask; 0 when both are empty."""
    pr, g = _check_prob_pair(pr, g)
    gf = g.astype(np.float64)
    inter = float(np.sum(pr * gf))
    denom = float(np.sum(pr)) + float(np.sum(gf)) - inter
    if denom == 0:
        return 0.0
    return 1.0 - inter / denom


class ExperimentalScorer(BaseEstimator):
    """Estimator-style wrapper: ``fit`` on two ground truths, then score predictions.

    ``score`` returns the validity margin ``d_ex - avg_l_ex`` (higher is
    better, non-negative exactly when the prediction is valid).
    """

    def __init__(self, iou_threshold: float = 0.8, beta: float = 0.7, f_beta: float = 2.0):
        self.iou_threshold = iou_threshold
        self.beta = beta
        self.f_beta = f_beta

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> ExperimentalScorer:
        cfg = EvalConfig.for_mode(mode, **overrides)
        return cls(iou_threshold=cfg.iou_threshold, beta=cfg.beta)

    def fit(self, ground_truths, y=None):
        if len(ground_truths) != 2:
            raise ValueError(f"exactly two ground truths are required, got {len(ground_truths)}")
        self.config_ = EvalConfig(self.iou_threshold, self.beta)
        self.pair_ = GroundTruthPair(ground_truths[0], ground_truths[1], self.config_.iou_threshold)
        self.d_ex_ = d_ex_distance(self.pair_, self.config_)
        return self

    def report(self, pred) -> EvalReport:
        check_is_fitted(self, "pair_")
        return validity(pred, self.pair_, self.config_, self.f_beta)

    def predict(self, pred) -> bool:
        return self.report(pred).valid

    def score(self, pred, y=None) -> float:
        rep = self.report(pred)
        return rep.d_ex - rep.avg_l_ex
