"""scikit-learn style wrappers: a trainable parser and two graph transformers."""

from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .graph import AmrGraph, Mode, from_levi, linearize, restore, to_levi
from .model import ParserConfig, Variant, parse_sentence
from .smatch import corpus_smatch
from .training import TrainConfig, load_model, save_model, train
from .validation import check_examples, check_graphs, check_sentences


class AmrParser(BaseEstimator):
    """Text-to-AMR parser.

    ``fit`` takes sentences with gold graphs (or sentences plus ``y``),
    ``predict`` returns one :class:`AmrGraph` per sentence and ``score`` is
    the micro-averaged Smatch F1.

    Parameters
    ----------
    variant : str
        ``"nd-bd-bd"``, ``"nd-ad-bd"`` or ``"nd-ad-lv"``.
    config : dict or None
        Overrides for :class:`ParserConfig`; ``None`` uses the toy dimensions.
    epochs, learning_rate, batch_size, eval_every, target_smatch, seed
        Passed to :class:`TrainConfig`.
    """

    def __init__(
        self,
        variant="nd-ad-lv",
        config=None,
        epochs=200,
        learning_rate=1e-3,
        batch_size=1,
        eval_every=10,
        target_smatch=None,
        seed=0,
    ):
        self.variant = variant
        self.config = config
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.eval_every = eval_every
        self.target_smatch = target_smatch
        self.seed = seed

    def _parser_config(self) -> ParserConfig:
        overrides = dict(self.config or {})
        overrides["variant"] = Variant.coerce(self.variant).value
        return ParserConfig.toy(**overrides)

    def fit(self, X, y=None):
        config = self._parser_config()
        examples = check_examples(X, y, config.kind.mode)
        tc = TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            eval_every=self.eval_every,
            target_smatch=self.target_smatch,
            seed=self.seed,
        )
        result = train(examples, config, tc)
        self.parser_ = result.parser
        self.history_ = result.history
        self.n_epochs_ = result.epochs_run
        return self

    def predict(self, X) -> list[AmrGraph]:
        check_is_fitted(self, "parser_")
        return [parse_sentence(self.parser_, s).graph for s in check_sentences(X)]

    def score(self, X, y=None) -> float:
        sentences = check_sentences(X, y, require_gold=True)
        pairs = zip(self.predict(sentences), (s.gold for s in sentences))
        return corpus_smatch(pairs, seed=self.seed).f1

    def save(self, directory: str | Path) -> Path:
        check_is_fitted(self, "parser_")
        return save_model(self.parser_, directory)

    @classmethod
    def load(cls, directory: str | Path) -> "AmrParser":
        parser = load_model(directory)
        est = cls(variant=parser.config.variant, config=parser.config.to_dict())
        est.parser_ = parser
        est.history_ = []
        est.n_epochs_ = 0
        return est


class LeviTransformer(TransformerMixin, BaseEstimator):
    """Stateless AMR graph to Levi graph mapping."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return [to_levi(g) for g in check_graphs(X)]

    def inverse_transform(self, X):
        return [from_levi(lv) for lv in X]

    def __sklearn_is_fitted__(self):
        return True


class Linearizer(TransformerMixin, BaseEstimator):
    """AMR graphs to node sequences (and back) in concepts or Levi mode."""

    def __init__(self, mode="levi"):
        self.mode = mode

    def fit(self, X=None, y=None):
        self.mode_ = Mode.coerce(self.mode)
        return self

    def transform(self, X):
        mode = Mode.coerce(self.mode)
        return [linearize(g, mode) for g in check_graphs(X)]

    def inverse_transform(self, X):
        mode = Mode.coerce(self.mode)
        return [restore(seq, mode) for seq in X]

    def __sklearn_is_fitted__(self):
        return True
