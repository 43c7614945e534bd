"""Gradient-boosted trees trained on the AFT likelihood, with early stopping and JSON persistence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import LabelError, ModelFormatError, SchemaError
from .metrics import concordance_index
from .survival import AftParams, Distribution, aft_grad_hess_array, aft_loss_array, check_survival_target
from .tree import Tree, grow_tree

FORMAT_VERSION = 1


@dataclass(frozen=True)
class BoostParams:
    """Booster hyperparameters. Defaults are the tuned values reported for the time-to-fix model."""

    learning_rate: float = 0.0002
    max_depth: int = 8
    subsample: float = 0.5
    min_child_weight: float = 50.0
    colsample_bynode: float = 0.5
    reg_lambda: float = 0.01
    reg_alpha: float = 0.02
    num_rounds: int = 500
    early_stopping_patience: int = 10
    seed: int = 0
    aft: AftParams = field(default_factory=AftParams)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if not 0 < self.colsample_bynode <= 1:
            raise ValueError("colsample_bynode must be in (0, 1]")
        if self.min_child_weight < 0 or self.reg_lambda < 0 or self.reg_alpha < 0:
            raise ValueError("min_child_weight, lambda and alpha must be nonnegative")
        if self.num_rounds < 1 or self.early_stopping_patience < 1:
            raise ValueError("num_rounds and early_stopping_patience must be positive")
        if isinstance(self.aft, dict):
            object.__setattr__(self, "aft", AftParams(**self.aft))

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "subsample": self.subsample,
            "min_child_weight": self.min_child_weight,
            "colsample_bynode": self.colsample_bynode,
            "lambda": self.reg_lambda,
            "alpha": self.reg_alpha,
            "num_rounds": self.num_rounds,
            "early_stopping_patience": self.early_stopping_patience,
            "seed": self.seed,
            "sigma": self.aft.sigma,
            "distribution": self.aft.distribution.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostParams":
        d = dict(d)
        aft = AftParams(d.pop("sigma", 1.0), Distribution(d.pop("distribution", "normal")))
        if "lambda" in d:
            d["reg_lambda"] = d.pop("lambda")
        if "alpha" in d:
            d["reg_alpha"] = d.pop("alpha")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown booster parameters: {sorted(unknown)}")
        return cls(aft=aft, **d)


def _as_array(matrix) -> tuple[np.ndarray, list[str] | None]:
    if hasattr(matrix, "values") and hasattr(matrix, "columns") and not hasattr(matrix, "iloc"):
        return np.asarray(matrix.values, dtype=float), list(matrix.columns)
    if hasattr(matrix, "iloc"):
        return matrix.to_numpy(dtype=float), [str(c) for c in matrix.columns]
    X = check_array(matrix, dtype=float, ensure_all_finite="allow-nan", ensure_min_samples=0)
    return X, None


@dataclass
class TreeEnsemble:
    """A trained booster. ``best_iteration`` counts trees (1-based round number)."""

    base_score: float
    trees: list[Tree]
    params: BoostParams
    n_features: int
    feature_names: list[str] | None = None
    history: dict = field(default_factory=lambda: {"train": [], "valid": []})
    best_iteration: int = 0

    @property
    def n_rounds(self) -> int:
        return len(self.trees)

    def _check_schema(self, X, names):
        if X.shape[1] < self.n_features:
            raise SchemaError(f"model expects {self.n_features} columns, got {X.shape[1]}")
        if names is not None and self.feature_names is not None:
            if names[: self.n_features] != self.feature_names:
                raise SchemaError("column names do not match the training schema")

    def predict_margin(self, matrix, until_best: bool = False) -> np.ndarray:
        """Ensemble output in log-days."""
        X, names = _as_array(matrix)
        self._check_schema(X, names)
        n_trees = self.best_iteration if until_best else len(self.trees)
        margin = np.full(X.shape[0], self.base_score)
        for tree in self.trees[:n_trees]:
            margin = margin + tree.predict(X)
        return margin

    def predict(self, matrix, until_best: bool = False) -> np.ndarray:
        return np.exp(self.predict_margin(matrix, until_best))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "params": self.params.to_dict(),
            "base_score": self.base_score,
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "best_iteration": self.best_iteration,
            "history": {"train": list(self.history["train"]), "valid": list(self.history["valid"])},
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {version!r}")
        try:
            return cls(
                base_score=float(d["base_score"]),
                trees=[Tree.from_dict(t) for t in d["trees"]],
                params=BoostParams.from_dict(d["params"]),
                n_features=int(d["n_features"]),
                feature_names=d.get("feature_names"),
                history={"train": list(d["history"]["train"]), "valid": list(d["history"]["valid"])},
                best_iteration=int(d["best_iteration"]),
            )
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed model document: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, allow_nan=False))

    @classmethod
    def load(cls, path) -> "TreeEnsemble":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not JSON ({exc})") from exc
        return cls.from_dict(doc)


def initial_score(lower: np.ndarray, upper: np.ndarray) -> float:
    """Mean log of each label's midpoint; right-censored labels contribute their lower bound."""
    mid = np.where(np.isfinite(upper), (lower + upper) / 2.0, lower)
    return float(np.mean(np.log(mid)))


def train(matrix, labels, valid_matrix=None, valid_labels=None, params: BoostParams = BoostParams()) -> TreeEnsemble:
    """Boost trees on the AFT negative log-likelihood.

    Training stops once the validation mean NLL has not improved for
    ``early_stopping_patience`` rounds; ``best_iteration`` marks the round with
    the lowest validation NLL. Without a validation set all rounds run and the
    training NLL is tracked instead.
    """
    X, names = _as_array(matrix)
    lower, upper = check_survival_target(labels)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if X.shape[0] != lower.size:
        raise SchemaError(f"{X.shape[0]} rows but {lower.size} labels")
    if np.isinf(upper).all():
        raise LabelError("every label is right-censored; there is no finite time information to fit")

    has_valid = valid_matrix is not None
    if has_valid:
        Xv, vnames = _as_array(valid_matrix)
        vlower, vupper = check_survival_target(valid_labels)
        if Xv.shape[1] != X.shape[1] or (names is not None and vnames is not None and names != vnames):
            raise SchemaError("training and validation matrices have different columns")
        if Xv.shape[0] != vlower.size:
            raise SchemaError(f"{Xv.shape[0]} validation rows but {vlower.size} labels")

    aft = params.aft
    rng = np.random.default_rng(params.seed)
    n = X.shape[0]
    n_sub = max(1, int(round(params.subsample * n)))
    base = initial_score(lower, upper)
    margin = np.full(n, base)
    vmargin = np.full(Xv.shape[0], base) if has_valid else None

    model = TreeEnsemble(base, [], params, X.shape[1], names)
    best = math.inf
    since_best = 0
    for r in range(params.num_rounds):
        grad, hess = aft_grad_hess_array(lower, upper, margin, aft)
        rows = np.arange(n) if n_sub >= n else np.sort(rng.choice(n, size=n_sub, replace=False))
        tree = grow_tree(
            X, grad, hess, rows,
            max_depth=params.max_depth,
            min_child_weight=params.min_child_weight,
            reg_lambda=params.reg_lambda,
            reg_alpha=params.reg_alpha,
            learning_rate=params.learning_rate,
            colsample_bynode=params.colsample_bynode,
            rng=rng,
        )
        model.trees.append(tree)
        margin = margin + tree.predict(X)
        train_nll = float(np.mean(aft_loss_array(lower, upper, margin, aft)))
        model.history["train"].append(train_nll)
        if has_valid:
            vmargin = vmargin + tree.predict(Xv)
            monitored = float(np.mean(aft_loss_array(vlower, vupper, vmargin, aft)))
            model.history["valid"].append(monitored)
        else:
            monitored = train_nll
        if monitored < best:
            best = monitored
            model.best_iteration = r + 1
            since_best = 0
        else:
            since_best += 1
            if has_valid and since_best >= params.early_stopping_patience:
                break
    return model


def predict(model: TreeEnsemble, matrix, until_best: bool = False) -> np.ndarray:
    """Predicted time to fix in days."""
    return model.predict(matrix, until_best)


class AFTBoostRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn wrapper around :func:`train`.

    ``y`` is a sequence of :class:`~aftboost.survival.SurvivalLabel` or an
    ``(n, 2)`` array of ``[lower, upper]`` bounds in days (``upper=inf`` for
    right-censored rows). ``predict`` returns days; ``score`` is the C-index.
    """

    def __init__(
        self,
        learning_rate=0.0002,
        max_depth=8,
        subsample=0.5,
        min_child_weight=50.0,
        colsample_bynode=0.5,
        reg_lambda=0.01,
        reg_alpha=0.02,
        n_estimators=500,
        early_stopping_rounds=10,
        sigma=1.0,
        distribution="normal",
        random_state=0,
    ):
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.subsample = subsample
        self.min_child_weight = min_child_weight
        self.colsample_bynode = colsample_bynode
        self.reg_lambda = reg_lambda
        self.reg_alpha = reg_alpha
        self.n_estimators = n_estimators
        self.early_stopping_rounds = early_stopping_rounds
        self.sigma = sigma
        self.distribution = distribution
        self.random_state = random_state

    def _boost_params(self) -> BoostParams:
        return BoostParams(
            learning_rate=self.learning_rate,
            max_depth=self.max_depth,
            subsample=self.subsample,
            min_child_weight=self.min_child_weight,
            colsample_bynode=self.colsample_bynode,
            reg_lambda=self.reg_lambda,
            reg_alpha=self.reg_alpha,
            num_rounds=self.n_estimators,
            early_stopping_patience=self.early_stopping_rounds,
            seed=0 if self.random_state is None else int(self.random_state),
            aft=AftParams(self.sigma, Distribution(self.distribution)),
        )

    def fit(self, X, y, eval_set=None):
        valid_X, valid_y = eval_set if eval_set is not None else (None, None)
        self.model_ = train(X, y, valid_X, valid_y, self._boost_params())
        self.n_features_in_ = self.model_.n_features
        self.best_iteration_ = self.model_.best_iteration
        self.history_ = self.model_.history
        return self

    def predict(self, X, until_best=True):
        check_is_fitted(self, "model_")
        return self.model_.predict(X, until_best)

    def predict_log_time(self, X, until_best=True):
        check_is_fitted(self, "model_")
        return self.model_.predict_margin(X, until_best)

    def score(self, X, y, sample_weight=None):
        return concordance_index(y, self.predict(X)).c_index
