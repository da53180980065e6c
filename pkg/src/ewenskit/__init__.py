"""Ewens and weighted random partitions: exact tables, samplers, limit statistics."""

from .core import FellerBits, Partition, PartitionBatch, TruncatedCounts, feller_map
from .errors import CapacityError, ConditioningError, DomainError, EstimateUndefinedError, EwensKitError
from .measures import (
    Constant,
    IndicatorSmallParts,
    LcsSpec,
    Macdonald,
    MeasureSpec,
    Multiplicative,
    ParityCycles,
    ProductForm,
    ewens_pmf,
    normalizer_enumerate,
    normalizer_recursive,
    weight_from_dict,
    weighted_pmf,
)
from .samplers import RngStream, importance_estimate, sample_ewens

__version__ = "0.1.0"
