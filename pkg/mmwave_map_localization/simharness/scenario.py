"""Monte Carlo localization scenario.

Users are dropped uniformly over the floor, linked to their nearest covering BSs,
and localized n_trials times from noisy copies of the traced path observations.
Each user owns its random streams, so results do not depend on the worker count
or on the order in which users complete.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from json import JSONDecodeError
import json
import logging
import math
from pathlib import Path
from pprint import pformat
from typing import Optional

import numpy as np
from pydantic import ValidationError

from mmwave_map_localization.config_def import ObservationMode, ScenarioConfig
from mmwave_map_localization.errors import LocalizationError, ScenarioError, TraceError
from mmwave_map_localization.geometry.indoor_map import IndoorMap, load_map_file
from mmwave_map_localization.geometry.primitives import Vec3, as_vec3, vec3
from mmwave_map_localization.localization.candidates import PathObservation, observations_from_components
from mmwave_map_localization.localization.map_at import locate
from mmwave_map_localization.raytracer.tracer import trace
from mmwave_map_localization.simharness.stats import ErrorStats, UserResult

logger = logging.getLogger(__name__)

MAX_PLACEMENT_DRAWS = 10_000
""" Uniform draws allowed per placement before the free floor is deemed too small """

_PLACEMENT_STREAM = 0
_TRIAL_STREAM = 1


@dataclass(frozen=True, eq=False)
class Link:
    """ A BS covering a user, with the noiseless observations it reports """

    bs_index: int
    bs_position: Vec3
    distance: float
    los: bool
    observations: tuple[PathObservation, ...]

    @property
    def bs_id(self) -> str:
        return bs_label(self.bs_index)


def bs_label(index: int) -> str:
    return f'BS{index + 1}'


def load_scenario(path: Path) -> ScenarioConfig:
    """ Reads a scenario file

    Raises:
        OSError: the file cannot be read
        JSONDecodeError | UnicodeDecodeError | ValidationError: the file is not a valid scenario
    """
    with open(path, 'r', encoding='utf-8') as f:
        try:
            cfg = ScenarioConfig(**json.load(f))
        except JSONDecodeError:
            logger.exception(f'Failed to parse scenario file {path}')
            raise
        except UnicodeDecodeError:
            logger.exception(f'Unicode decoding error in scenario file {path}')
            raise
        except ValidationError:
            logger.exception(f'Scenario file failed validation {path}')
            raise

    logger.info(f'Scenario file loaded successfully {path}: \n{pformat(cfg.model_dump())}')

    return cfg


def covering_links(indoor_map: IndoorMap, user: Vec3, cfg: ScenarioConfig) -> list[Link]:
    """ Nearest BSs that reach the user with enough retraceable components

    BSs are tried in order of distance (index breaks ties), up to max_link_distance,
    until max(bs_counts) of them cover the user. Only components with at most
    max_interactions interactions count, and a BS reports at most max_paths_per_link
    of them, strongest first.
    """
    wanted = max(cfg.bs_counts)
    bs_positions = np.array(cfg.bs_positions, dtype=np.float64)
    distances = np.linalg.norm(bs_positions - user, axis=1)

    links: list[Link] = []
    for index in sorted(range(len(bs_positions)), key=lambda i: (distances[i], i)):
        if distances[index] > cfg.max_link_distance or len(links) == wanted:
            break

        bs = as_vec3(bs_positions[index])
        try:
            if cfg.mode is ObservationMode.AOD:
                components = trace(indoor_map, bs, user, cfg.trace)
            else:
                components = trace(indoor_map, user, bs, cfg.trace)
        except TraceError as e:
            logger.debug(f'{bs_label(index)} skipped for user at {user.tolist()}: {e}')
            continue

        usable = [c for c in components if len(c.interactions) <= cfg.max_interactions]
        if len(usable) < cfg.min_components:
            continue
        usable.sort(key=lambda c: (-c.received_power_dbm, c.tof, c.signature))
        usable = usable[:cfg.max_paths_per_link]

        links.append(Link(
            bs_index=index,
            bs_position=bs,
            distance=float(distances[index]),
            los=indoor_map.is_line_of_sight(bs, user),
            observations=tuple(observations_from_components(usable, bs_label(index), bs, cfg.mode)),
        ))

    return links


def place_user(indoor_map: IndoorMap, cfg: ScenarioConfig, rng: np.random.Generator,
               user_index: int) -> tuple[Vec3, list[Link]]:
    """ Draws a user position uniformly over the free floor until some BS covers it

    Raises:
        ScenarioError: no covered position found within max_resamples redraws
    """
    lo, hi = indoor_map.bounding_box
    if not lo[2] <= cfg.user_height <= hi[2]:
        raise ScenarioError(f'user height {cfg.user_height} m lies outside the map bounds')

    for attempt in range(cfg.max_resamples + 1):
        for _ in range(MAX_PLACEMENT_DRAWS):
            user = vec3(rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), cfg.user_height)
            if indoor_map.clearance(user) >= cfg.wall_clearance:
                break
        else:
            raise ScenarioError(f'no point of the floor keeps {cfg.wall_clearance} m from every surface')

        links = covering_links(indoor_map, user, cfg)
        if len(links) > 0:
            return user, links

        logger.warning(f'User {user_index} at {np.round(user, 3).tolist()} is not covered by any BS, '
                       f'resampling ({attempt + 1}/{cfg.max_resamples})')

    raise ScenarioError(f'user {user_index} could not be covered after {cfg.max_resamples} resamples')


def perturb(observations: tuple[PathObservation, ...], sigma_aod: float, sigma_tof: float,
            rng: np.random.Generator) -> list[PathObservation]:
    """ Adds zero-mean Gaussian noise to azimuth, elevation and time of flight

    Observations whose noisy time of flight is not positive are dropped.
    """
    noise = rng.standard_normal((len(observations), 3))
    noisy = []
    for obs, (d_az, d_el, d_tof) in zip(observations, noise):
        tof = obs.tof + sigma_tof * d_tof
        if tof <= 0.0:
            logger.debug(f'Dropped observation from {obs.bs_id}: noisy time of flight {tof} s')
            continue
        noisy.append(PathObservation(
            bs_id=obs.bs_id,
            bs_position=obs.bs_position,
            angle=(obs.angle[0] + sigma_aod * d_az, obs.angle[1] + sigma_aod * d_el),
            tof=tof,
            mode=obs.mode,
        ))
    return noisy


def run_trials(indoor_map: IndoorMap, user: Vec3, links: list[Link], cfg: ScenarioConfig,
               rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """ 3-D positioning error of every trial, NaN where no estimate was produced, and the number of ambiguous trials """
    observations = tuple(obs for link in links for obs in link.observations)
    errors = np.full(cfg.n_trials, np.nan)
    ambiguous = 0
    for trial in range(cfg.n_trials):
        noisy = perturb(observations, cfg.sigma_aod, cfg.sigma_tof, rng)
        try:
            estimate, diagnostics = locate(indoor_map, noisy, cfg.max_interactions, cfg.cluster_threshold, cfg.trace)
        except LocalizationError as e:
            logger.debug(f'Trial {trial} failed: {e}')
            continue
        errors[trial] = float(np.linalg.norm(estimate - user))
        ambiguous += int(diagnostics.ambiguous)
    return errors, ambiguous


def simulate_user(task: tuple[int, ScenarioConfig, IndoorMap]) -> list[UserResult]:
    """ Places one user and runs its trials for every BS count it has enough coverage for """
    user_index, cfg, indoor_map = task

    placement_rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed, spawn_key=(_PLACEMENT_STREAM, user_index)))
    user, links = place_user(indoor_map, cfg, placement_rng, user_index)

    results = []
    for bs_count in cfg.bs_counts:
        if len(links) < bs_count:
            logger.debug(f'User {user_index} has {len(links)} covering BSs, left out of the {bs_count}-BS series')
            continue

        used = links[:bs_count]
        trial_rng = np.random.default_rng(
            np.random.SeedSequence(cfg.rng_seed, spawn_key=(_TRIAL_STREAM, user_index, bs_count)))
        errors, ambiguous = run_trials(indoor_map, user, used, cfg, trial_rng)

        results.append(UserResult(
            user=user_index,
            bs_count=bs_count,
            bs_ids=tuple(link.bs_id for link in used),
            position=(float(user[0]), float(user[1]), float(user[2])),
            link_los=tuple(link.los for link in used),
            distance_m=used[0].distance,
            errors=tuple(float(e) for e in errors),
            ambiguous_trials=ambiguous,
        ))

    summary = ', '.join(f'{r.bs_count} BS: {r.rms_error * 100:.1f} cm' for r in results
                        if not math.isnan(r.rms_error))
    logger.info(f'User {user_index} at {np.round(user, 2).tolist()} done ({summary or "no estimate"})')

    return results


def run_scenario(cfg: ScenarioConfig, indoor_map: Optional[IndoorMap] = None,
                 scenario_dir: Optional[Path] = None) -> ErrorStats:
    """ Runs the Monte Carlo experiment described by cfg

    Args:
        cfg (ScenarioConfig): scenario parameters
        indoor_map (Optional[IndoorMap], optional): map to use instead of cfg.map_path. Defaults to None.
        scenario_dir (Optional[Path], optional): directory a relative map_path is resolved against. Defaults to None.

    Returns:
        ErrorStats: per-user RMS errors of every BS-count series

    Raises:
        ScenarioError: a BS lies outside the map, or a user cannot be covered
    """
    if indoor_map is None:
        indoor_map = load_map_file(cfg.resolve_map_path(scenario_dir))

    for index, position in enumerate(cfg.bs_positions):
        if not indoor_map.contains_point(position):
            raise ScenarioError(f'{bs_label(index)} at {list(position)} lies outside map "{indoor_map.name}"')

    logger.info(f'Running scenario on map "{indoor_map.name}": {cfg.n_users} users x {cfg.n_trials} trials, '
                f'BS counts {cfg.bs_counts}, {cfg.workers} worker(s)')

    tasks = [(user_index, cfg, indoor_map) for user_index in range(cfg.n_users)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            per_user = list(executor.map(simulate_user, tasks))
    else:
        per_user = [simulate_user(task) for task in tasks]

    stats = ErrorStats([r for results in per_user for r in results])

    for bs_count in stats.bs_counts:
        logger.info(f'{bs_count} BS: mean {stats.mean(bs_count) * 100:.1f} cm, '
                    f'p90 {stats.percentile(90, bs_count) * 100:.1f} cm over '
                    f'{len(stats.errors(bs_count))} users')

    return stats
