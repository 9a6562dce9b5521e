"""
Loss models, decision-dependent distributions and datasets.
"""
from .datasets import (
    FiniteDatabase,
    load_database_csv,
    make_bernoulli_database,
    make_credit_like_dataset,
    train_test_split,
)
from .distributions import (
    BernoulliLinearShift,
    DatabaseShift,
    DecisionDistribution,
    IdentityShift,
    LinearShift,
    StrategicResponse,
    Support,
    bernoulli_database_shift,
    bernoulli_linear_shift,
    db_sample_mean,
    exact_expected_clipped_grad,
    expected_grad,
    expected_grad_at,
    expected_loss_at,
    finite_database_shift,
    monte_carlo_clipped_grad,
    performative_risk,
    strategic_feature_shift,
)
from .losses import (
    BoundedNonconvexLoss,
    LossModel,
    QuadraticScalarLoss,
    RegularizedLogisticLoss,
    bounded_nonconvex_loss,
    grad_check_fd,
    quadratic_scalar_loss,
    regularized_logistic_loss,
)

__all__ = [
    "FiniteDatabase",
    "load_database_csv",
    "make_bernoulli_database",
    "make_credit_like_dataset",
    "train_test_split",
    "BernoulliLinearShift",
    "DatabaseShift",
    "DecisionDistribution",
    "IdentityShift",
    "LinearShift",
    "StrategicResponse",
    "Support",
    "bernoulli_database_shift",
    "bernoulli_linear_shift",
    "db_sample_mean",
    "exact_expected_clipped_grad",
    "expected_grad",
    "expected_grad_at",
    "expected_loss_at",
    "finite_database_shift",
    "monte_carlo_clipped_grad",
    "performative_risk",
    "strategic_feature_shift",
    "BoundedNonconvexLoss",
    "LossModel",
    "QuadraticScalarLoss",
    "RegularizedLogisticLoss",
    "bounded_nonconvex_loss",
    "grad_check_fd",
    "quadratic_scalar_loss",
    "regularized_logistic_loss",
]
