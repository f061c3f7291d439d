"""Scikit-learn estimator wrapper around the joint training loop.

``DomainAdaptedMlpClassifier`` follows the standard estimator contract
(init stores parameters untouched, ``fit`` learns, fitted attributes carry
a trailing underscore, ``get_params``/``set_params``/``clone`` work), so it
drops into pipelines and model-selection utilities. The one extension is
the optional ``X_target`` fit parameter carrying the unlabeled target
domain sample.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .datasets import LabeledDataset
from .exceptions import InputError
from .mlp import forward
from .training import ADAPT_NONE, ExperimentConfig, train
from .validation import as_features


class DomainAdaptedMlpClassifier(BaseEstimator, ClassifierMixin):
    """Feedforward classifier that can align itself to an unlabeled domain.

    Parameters mirror :class:`~mmdadapt.training.ExperimentConfig`;
    ``adapt_weight`` may be a single float (applied to every tapped layer)
    or a sequence matching ``tap_layers``.

    Examples
    --------
    >>> clf = DomainAdaptedMlpClassifier(epochs=5)
    >>> clf.fit(X_source, y_source, X_target=X_target)   # doctest: +SKIP
    >>> clf.predict(X_target)                            # doctest: +SKIP
    """

    def __init__(
        self,
        adapt_loss: str = "rkhs-mmd",
        adapt_weight=0.5,
        hidden_dims=(64, 32),
        tap_layers=None,
        batch_size: int = 32,
        epochs: int = 50,
        base_lr: float = 1e-3,
        fc_lr_multiplier: float = 10.0,
        weight_decay: float = 5e-4,
        momentum: float = 0.9,
        lambda_ramp_epochs: int = 0,
        kernel=None,
        random_state: int = 0,
    ):
        self.adapt_loss = adapt_loss
        self.adapt_weight = adapt_weight
        self.hidden_dims = hidden_dims
        self.tap_layers = tap_layers
        self.batch_size = batch_size
        self.epochs = epochs
        self.base_lr = base_lr
        self.fc_lr_multiplier = fc_lr_multiplier
        self.weight_decay = weight_decay
        self.momentum = momentum
        self.lambda_ramp_epochs = lambda_ramp_epochs
        self.kernel = kernel
        self.random_state = random_state

    def _config(self) -> ExperimentConfig:
        weight = self.adapt_weight
        if np.ndim(weight) == 0:
            n_taps = len(self.tap_layers) if self.tap_layers is not None else 1
            lambdas = (float(weight),) * n_taps
        else:
            lambdas = tuple(float(w) for w in weight)
        return ExperimentConfig(
            adapt_loss=self.adapt_loss,
            lambdas=lambdas,
            tap_layers=tuple(self.tap_layers) if self.tap_layers is not None else None,
            hidden_dims=tuple(self.hidden_dims),
            batch_size=self.batch_size,
            epochs=self.epochs,
            base_lr=self.base_lr,
            fc_lr_multiplier=self.fc_lr_multiplier,
            weight_decay=self.weight_decay,
            momentum=self.momentum,
            lambda_ramp_epochs=self.lambda_ramp_epochs,
            seed=self.random_state,
            kernel=self.kernel,
        )

    def fit(self, X, y, X_target=None):
        """Fit on labeled source data, optionally aligning to ``X_target``.

        ``X_target`` is required unless ``adapt_loss="none"``; its rows are
        used only through the alignment loss, never through labels.
        """
        X = as_features(X, name="X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise InputError(f"y has {y.shape[0]} entries for {X.shape[0]} rows of X")
        classes, y_idx = np.unique(y, return_inverse=True)
        if classes.shape[0] < 2:
            raise InputError("fit needs at least two classes in y")
        config = self._config()
        if config.adapt_loss != ADAPT_NONE and X_target is None:
            raise InputError(
                f"adapt_loss={config.adapt_loss!r} needs X_target; pass the unlabeled "
                "target sample to fit, or set adapt_loss='none' for a plain classifier"
            )
        source = LabeledDataset(X, y_idx, tuple(str(c) for c in classes))
        self.model_, self.history_ = train(config, source, X_target)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this DomainAdaptedMlpClassifier instance is not fitted yet"
            )

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return forward(self.model_, as_features(X, name="X")).probabilities

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
