from mmwave_map_localization.simharness.scenario import load_scenario, run_scenario
from mmwave_map_localization.simharness.stats import ErrorStats, UserResult, export_cdf, write_outputs

__all__ = ['ErrorStats', 'UserResult', 'export_cdf', 'load_scenario', 'run_scenario', 'write_outputs']
