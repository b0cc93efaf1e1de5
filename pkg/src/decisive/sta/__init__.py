"""Stochastic timed automata: regions, thick graphs, sampling and analyses."""

from .analysis import (
    GENERAL_REFUSAL,
    StaClass,
    StaKind,
    classify,
    memoryless_attractor,
    oneclock_attractor,
    sta_approx_quantitative,
    sta_check_qualitative,
    sta_handle,
    sta_time_bounded,
)
from .model import DelayDist, StaEdge, StaModel, make_sta, parse_guard
from .regions import Region, all_regions, region_of, time_successor
from .sampler import StaSimulator, location_set, min_jumps, sample_step
from .thickgraph import RegionMap, ThickGraph, thick_graph

__all__ = [
    "GENERAL_REFUSAL", "DelayDist", "Region", "RegionMap", "StaClass", "StaEdge", "StaKind",
    "StaModel", "StaSimulator", "ThickGraph", "all_regions", "classify", "location_set",
    "make_sta", "memoryless_attractor", "min_jumps", "oneclock_attractor", "parse_guard",
    "region_of", "sample_step", "sta_approx_quantitative", "sta_check_qualitative",
    "sta_handle", "sta_time_bounded", "thick_graph", "time_successor",
]
