"""System-level downlink simulator for RIS-aided multi-cell networks."""

from .cascade import CascadedGain, cascaded_gain, combined_gain, pair_ris
from .config import ScenarioConfig, config_from_dict, parse_config
from .engine import (Cdf, DropResult, HeatmapResult, InterferenceFlags, UeRecord,
                     associate, cdf, compute_rsrp, compute_sinr_db, heatmap, run_drop)
from .errors import ConfigurationError, DropError, StatisticsError
from .geometry import (Layout, NodePlacement, build_layout, drop_ris_panels,
                       drop_ues, wrapped_displacement)
from .radio import (LinkGain, PatternParams, RadioContext, bs_sector_gain,
                    element_pattern, link_gain, los_probability, shadow_fading,
                    uma_pathloss)
from .ris import (RisElementState, RisPanel, conjugate_config, element_response,
                  inject_failures, make_panel, panel_beam_pattern, quantize_phase,
                  rayleigh_distance, sweep_codebook)

__version__ = "0.1.0"

__all__ = [
    "CascadedGain", "Cdf", "ConfigurationError", "DropError", "DropResult",
    "HeatmapResult", "InterferenceFlags", "Layout", "LinkGain", "NodePlacement",
    "PatternParams", "RadioContext", "RisElementState", "RisPanel",
    "ScenarioConfig", "StatisticsError", "UeRecord", "associate",
    "bs_sector_gain", "build_layout", "cascaded_gain", "cdf", "combined_gain",
    "compute_rsrp", "compute_sinr_db", "config_from_dict", "conjugate_config",
    "drop_ris_panels", "drop_ues", "element_pattern", "element_response",
    "heatmap", "inject_failures", "link_gain", "los_probability", "make_panel",
    "pair_ris", "panel_beam_pattern", "parse_config", "quantize_phase",
    "rayleigh_distance", "run_drop", "shadow_fading", "sweep_codebook",
    "uma_pathloss", "wrapped_displacement",
]
