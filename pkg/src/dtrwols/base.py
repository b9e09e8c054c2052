"""Shared scikit-learn style plumbing for the regime estimators."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .tabular import Dataset, as_dataset


class RegimeEstimator(BaseEstimator):
    """Base class: subclasses implement ``_fit_dataset(data) -> DTRFit``.

    ``fit`` accepts a :class:`~dtrwols.tabular.Dataset`, a mapping of
    columns, or a DataFrame. When ``y`` is given it replaces the outcome
    column named by the estimator's ``outcome`` parameter.
    """

    def _prepare(self, X, y=None) -> Dataset:
        data = as_dataset(X)
        if y is not None:
            outcome = getattr(self, "outcome", None)
            if outcome is None:
                raise ValidationError(f"{type(self).__name__} takes outcomes from its stage columns; pass y=None")
            data = data.with_columns(**{outcome: np.asarray(y, dtype=np.float64)})
        return data

    def fit(self, X, y=None):
        data = self._prepare(X, y)
        result = self._fit_dataset(data)
        self.result_ = result
        self.regime_ = result.regime
        self.stage_fits_ = result.stages
        self.n_stages_ = len(result.stages)
        self.n_samples_ = data.n
        return self

    def predict(self, X) -> np.ndarray:
        """Recommended action for each row (columns are stages 1..K)."""
        check_is_fitted(self, "regime_")
        return self.regime_.recommend(as_dataset(X))

    def blip_coefficients(self) -> np.ndarray:
        """All blip coefficients, stage 1 first, as one vector."""
        check_is_fitted(self, "result_")
        return self.result_.psi_vector()

    def _fit_dataset(self, data: Dataset):
        raise NotImplementedError
