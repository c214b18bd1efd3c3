"""Sparse NDVI-driven arrival and price forecasting."""

from ._core import (
    ArimaLiteModel,
    ElasticNetConfig,
    ElasticNetModel,
    NumericalError,
    PcaModel,
    PriceModel,
    RegPcrConfig,
    RegPcrModel,
    RidgeModel,
    StateAggModel,
    ValidationError,
    arima,
    elastic_net,
    f_survival,
    fit_pca,
    fit_price_model,
    fit_regpcr,
    fit_state_aggregate,
    incomplete_beta,
    lambda_max,
    ridge,
    run_cli,
    soft_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
