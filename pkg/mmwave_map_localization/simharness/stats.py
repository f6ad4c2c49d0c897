from __future__ import annotations

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Optional, TextIO

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DISTANCE_BINS = ('<10 m', '10-25 m', '>=25 m')

PER_USER_COLUMNS = [
    'user', 'bs_count', 'bs_ids', 'x', 'y', 'z', 'n_los', 'n_nlos', 'env', 'link_class',
    'distance_m', 'distance_bin', 'trials_used', 'ambiguous_trials', 'rms_error_m',
]

CDF_COLUMNS = ['error_m', 'cumulative_fraction']

FLOAT_FORMAT = '%.10g'


def distance_bin(distance: float) -> str:
    if distance < 10.0:
        return DISTANCE_BINS[0]
    if distance < 25.0:
        return DISTANCE_BINS[1]
    return DISTANCE_BINS[2]


def link_class(n_los: int, n_nlos: int) -> str:
    """ Link type label, e.g. "NLOS" for one BS or "1 LOS, 2 NLOS" for three """
    if n_los + n_nlos == 1:
        return 'LOS' if n_los == 1 else 'NLOS'
    parts = []
    if n_los > 0:
        parts.append(f'{n_los} LOS')
    if n_nlos > 0:
        parts.append(f'{n_nlos} NLOS')
    return ', '.join(parts)


@dataclass(frozen=True)
class UserResult:
    """ Outcome of every trial of one user localized with one BS count """

    user: int
    bs_count: int
    bs_ids: tuple[str, ...]
    position: tuple[float, float, float]
    link_los: tuple[bool, ...]
    distance_m: float
    errors: tuple[float, ...]
    # trials whose winning cluster was still tied with another after the map check
    ambiguous_trials: int = 0

    @property
    def trials_used(self) -> int:
        return int(np.count_nonzero(np.isfinite(self.errors)))

    @property
    def rms_error(self) -> float:
        errors = np.asarray(self.errors, dtype=np.float64)
        errors = errors[np.isfinite(errors)]
        if len(errors) == 0:
            return float('nan')
        return float(np.sqrt(np.mean(errors ** 2)))


class ErrorStats:
    """ Per-user RMS positioning errors of a scenario, grouped by BS count """

    def __init__(self, results: list[UserResult]):
        rows = []
        for r in sorted(results, key=lambda r: (r.bs_count, r.user)):
            n_los = sum(r.link_los)
            n_nlos = len(r.link_los) - n_los
            rows.append({
                'user': r.user,
                'bs_count': r.bs_count,
                'bs_ids': ' '.join(r.bs_ids),
                'x': r.position[0],
                'y': r.position[1],
                'z': r.position[2],
                'n_los': n_los,
                'n_nlos': n_nlos,
                'env': 'LOS' if n_los > 0 else 'NLOS',
                'link_class': link_class(n_los, n_nlos),
                'distance_m': r.distance_m,
                'distance_bin': distance_bin(r.distance_m),
                'trials_used': r.trials_used,
                'ambiguous_trials': r.ambiguous_trials,
                'rms_error_m': r.rms_error,
            })

        self.per_user = pd.DataFrame(rows, columns=PER_USER_COLUMNS)

        failed = self.per_user['rms_error_m'].isna()
        if failed.any():
            logger.warning(f'{int(failed.sum())} user series have no successful trial and are left out of the statistics')

        self._valid = self.per_user[~failed]

    @property
    def bs_counts(self) -> list[int]:
        return sorted(int(n) for n in self._valid['bs_count'].unique())

    def errors(self, bs_count: Optional[int] = None) -> np.ndarray:
        """ Per-user RMS errors of one series (all series when bs_count is None) """
        frame = self._valid if bs_count is None else self._valid[self._valid['bs_count'] == bs_count]
        return frame['rms_error_m'].to_numpy(dtype=np.float64)

    def cdf(self, bs_count: Optional[int] = None) -> pd.DataFrame:
        """ Empirical CDF of the per-user errors: sorted errors with fraction i/n """
        errors = np.sort(self.errors(bs_count))
        fractions = np.arange(1, len(errors) + 1) / len(errors) if len(errors) > 0 else np.empty(0)
        return pd.DataFrame({'error_m': errors, 'cumulative_fraction': fractions}, columns=CDF_COLUMNS)

    def percentile(self, p: float, bs_count: Optional[int] = None) -> float:
        errors = self.errors(bs_count)
        if len(errors) == 0:
            return float('nan')
        return float(np.percentile(errors, p))

    def mean(self, bs_count: Optional[int] = None, env: Optional[str] = None,
             bin_label: Optional[str] = None) -> float:
        frame = self._valid
        if bs_count is not None:
            frame = frame[frame['bs_count'] == bs_count]
        if env is not None:
            frame = frame[frame['env'] == env]
        if bin_label is not None:
            frame = frame[frame['distance_bin'] == bin_label]
        if len(frame) == 0:
            return float('nan')
        return float(frame['rms_error_m'].mean())

    def summary(self) -> pd.DataFrame:
        """ Mean error by BS count, distance bin and link type, plus distribution figures per series

        Single-BS rows split users into LOS and NLOS per distance bin with an "all"
        bin; multi-BS rows split them by link type (e.g. "1 LOS, 2 NLOS").
        """
        rows = []
        for bs_count, series in self._valid.groupby('bs_count', sort=True):
            if bs_count == 1:
                groups = [(b, series[series['distance_bin'] == b]) for b in DISTANCE_BINS] + [('all', series)]
                for label, frame in groups:
                    for env in ('LOS', 'NLOS'):
                        rows.append(self._summary_row(bs_count, label, env, frame[frame['env'] == env]))
            else:
                for cls, frame in series.groupby('link_class', sort=True):
                    rows.append(self._summary_row(bs_count, 'all', cls, frame))

            rows.append(self._summary_row(bs_count, 'all', 'all', series))

        return pd.DataFrame(rows, columns=['bs_count', 'distance_bin', 'link_class', 'n_users',
                                           'mean_error_cm', 'median_error_cm', 'p90_error_cm', 'max_error_cm'])

    @staticmethod
    def _summary_row(bs_count: int, bin_label: str, cls: str, frame: pd.DataFrame) -> dict:
        errors = frame['rms_error_m'].to_numpy(dtype=np.float64) * 100.0
        empty = len(errors) == 0
        return {
            'bs_count': int(bs_count),
            'distance_bin': bin_label,
            'link_class': cls,
            'n_users': len(errors),
            'mean_error_cm': float('nan') if empty else float(np.mean(errors)),
            'median_error_cm': float('nan') if empty else float(np.median(errors)),
            'p90_error_cm': float('nan') if empty else float(np.percentile(errors, 90)),
            'max_error_cm': float('nan') if empty else float(np.max(errors)),
        }


def export_cdf(stats: ErrorStats, sink: TextIO | Path | str, bs_count: Optional[int] = None) -> None:
    """ Writes the empirical CDF of one series as CSV (error_m, cumulative_fraction)

    Args:
        stats (ErrorStats): scenario statistics
        sink (TextIO | Path | str): open text stream or file path
        bs_count (Optional[int], optional): series to write; all users when None. Defaults to None.
    """
    stats.cdf(bs_count).to_csv(sink, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def write_outputs(stats: ErrorStats, out_dir: Path) -> list[Path]:
    """ Writes per_user.csv, summary.csv and one cdf_{n}bs.csv per BS count

    Returns:
        list[Path]: files written
    """
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    per_user = out_dir / 'per_user.csv'
    stats.per_user.to_csv(per_user, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    written.append(per_user)

    summary = out_dir / 'summary.csv'
    stats.summary().to_csv(summary, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    written.append(summary)

    for bs_count in sorted(stats.per_user['bs_count'].unique()):
        path = out_dir / f'cdf_{int(bs_count)}bs.csv'
        export_cdf(stats, path, int(bs_count))
        written.append(path)

    logger.info(f'Wrote {len(written)} result files to {out_dir}')

    return written
