"""Truncated-SVD clutter rejection on slow-time data.

Each sub-aperture cube (one angle, one side) is arranged as a Casorati
matrix, pixels by frames, and its strongest singular components, which
hold tissue and wall echoes, are removed.
"""

# Standard Library Imports
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import logging

# Third Party Imports
import numpy as np
from scipy.linalg import svd

# Local Application Imports
from nlhrflow.data_validation import ConfigError, assert_integer
from nlhrflow.velocity import kasai_frequency

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CasoratiMatrix:
    """Pixels x frames complex matrix of one sub-aperture cube.

    Attributes
    ----------
    values: numpy.ndarray
        (pixels, frames), complex. Masked rows are NaN.
    pixel_mask: numpy.ndarray of bool
        True for rows that take part in the factorization.
    source: tuple
        (beamformer_tag, alpha, side).
    clutter_rank: int
        Number of leading singular components already removed from the
        original data.
    """

    values: np.ndarray
    pixel_mask: np.ndarray
    source: tuple = ()
    clutter_rank: int = 0

    @classmethod
    def from_ensemble(cls, ensemble, alpha_index, side):
        """Matrix of one (angle, side) cube of a :class:`SlowTimeEnsemble`."""
        values = ensemble.side(side)[alpha_index]
        mask = np.all(np.isfinite(values), axis=1)
        source = (ensemble.beamformer_tag, ensemble.alpha_set[alpha_index], side)
        return cls(values, mask, source)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class SvdReport:
    """Singular spectrum of a Casorati matrix.

    ``frequencies`` holds the mean slow-time frequency (Hz) of each
    temporal singular vector, NaN for zero singular values.
    """

    singular_values: np.ndarray
    singular_values_db: np.ndarray
    frequencies: np.ndarray
    source: tuple = ()

    def to_rows(self):
        """(component index, value dB, frequency Hz) rows for CSV export."""
        return [(k, float(db), float(f)) for k, (db, f) in
                enumerate(zip(self.singular_values_db, self.frequencies))]


def _factorize(m):
    rows = m.values[m.pixel_mask]
    return rows, svd(rows, full_matrices=False)


def svd_filter(m, k_remove):
    """Remove the ``k_remove`` strongest singular components.

    Parameters
    ----------
    m: CasoratiMatrix
    k_remove: int
        0 <= k_remove < min(valid pixels, frames).

    Returns
    -------
    CasoratiMatrix
        Filtered matrix with ``clutter_rank = k_remove``. Components counted
        in ``m.clutter_rank`` are not removed again, so filtering twice with
        the same k is the same as filtering once.

    Examples
    --------
    >>> filtered = svd_filter(CasoratiMatrix.from_ensemble(slowtime, 0, "left"), 3)
    """
    assert_integer(k_remove, "k_remove", minimum=0)
    n_valid = int(m.pixel_mask.sum())
    bound = min(n_valid, m.values.shape[1])
    if k_remove >= bound:
        raise ConfigError(
            f"k_remove should be < {bound} (rank bound of a {n_valid} x {m.values.shape[1]}"
            f" matrix), not {k_remove}", field="k_remove")

    extra = k_remove - m.clutter_rank
    if extra <= 0:
        return m

    rows, (u, s, vh) = _factorize(m)
    clutter = (u[:, :extra] * s[:extra]) @ vh[:extra]
    values = np.array(m.values, dtype=complex)
    values[m.pixel_mask] = rows - clutter
    return replace(m, values=values, clutter_rank=k_remove)


def sv_report(m, prf=1.0):
    """Singular values (linear and dB re. the largest) and the Kasai
    frequency of every temporal singular vector.

    Parameters
    ----------
    m: CasoratiMatrix
    prf: float
        Frame rate of the slow-time data (Hz).

    Returns
    -------
    SvdReport
    """
    _, (_, s, vh) = _factorize(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        db = 20 * np.log10(s / s[0]) if s.size and s[0] > 0 else np.full(s.shape, -np.inf)
    frequencies = kasai_frequency(vh, prf, axis=-1)
    frequencies = np.where(s > 0, frequencies, np.nan)
    return SvdReport(s, db, frequencies, m.source)


def auto_clutter_rank(report, max_rank=10):
    """Clutter rank at the largest drop of the dB singular spectrum among
    the first ``max_rank`` components (never chosen by default)."""
    db = np.asarray(report.singular_values_db[:max_rank + 1], dtype=float)
    db = db[np.isfinite(db)]
    if db.size < 2:
        return 0
    k = int(np.argmax(db[:-1] - db[1:])) + 1
    if k >= max_rank:
        logger.warning("automatic clutter rank %d sits at the search bound", k)
    return k


def filter_ensemble(slowtime, k_remove, auto=False, max_rank=10, threads=1):
    """SVD-filter every (angle, side) cube of a slow-time ensemble on its own.

    Parameters
    ----------
    slowtime: SlowTimeEnsemble
    k_remove: int
        Components removed from each cube (ignored when ``auto``).
    auto: bool
        Pick the rank per cube with :func:`auto_clutter_rank`.
    max_rank: int
        Search bound of the automatic rank.
    threads: int
        Cubes factorized concurrently.

    Returns
    -------
    (SlowTimeEnsemble, list of SvdReport)
        Filtered ensemble, and the spectra of the unfiltered cubes in
        (angle, side) order.
    """
    jobs = [(a, side) for a in range(len(slowtime.alpha_set)) for side in ("left", "right")]

    def work(job):
        m = CasoratiMatrix.from_ensemble(slowtime, *job)
        report = sv_report(m, slowtime.prf_effective)
        k = auto_clutter_rank(report, max_rank) if auto else k_remove
        return svd_filter(m, k), report, k

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(job) for job in jobs]

    left = np.empty_like(slowtime.left, dtype=complex)
    right = np.empty_like(slowtime.right, dtype=complex)
    for (a, side), (m, _, k) in zip(jobs, results):
        (left if side == "left" else right)[a] = m.values
        logger.debug("angle %s %s: removed %d components", slowtime.alpha_set[a], side, k)
    return replace(slowtime, left=left, right=right), [r for _, r, _ in results]
