"""Mission scenarios: configuration, survey geometry, the runner, scoring and exports."""
from .audit import PlannerAudit, audit_planner_traffic
from .config import Altitudes, AreaParams, BaselineParams, ConfigError, ScenarioConfig, config_from_dict, load_config
from .coverage import (Area, BaselineResult, CoverageError, avoid_threats, baseline_path, generate_search_path,
                       swath_coverage)
from .export import FORMATS, ExportError, export, export_all, geojson, summary, trajectory_csv
from .metrics import ScoreError, ScoreReport, score
from .missionlog import LogError, MissionLog, Record
from .runner import MissionRunner, RunResult, default_package_dir, default_scenario_path, run_scenario

__all__ = [
    "Altitudes", "Area", "AreaParams", "BaselineParams", "BaselineResult", "ConfigError", "CoverageError",
    "ExportError", "FORMATS", "LogError", "MissionLog", "MissionRunner", "PlannerAudit", "Record", "RunResult", "ScenarioConfig",
    "ScoreError", "ScoreReport", "audit_planner_traffic", "avoid_threats", "baseline_path", "config_from_dict", "default_package_dir",
    "default_scenario_path", "export", "export_all", "generate_search_path", "geojson", "load_config",
    "run_scenario", "score", "summary", "swath_coverage", "trajectory_csv",
]
