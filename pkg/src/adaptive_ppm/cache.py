"""On-disk cache of backward-pass tables.

Each run lives in a directory keyed by (family, M, gamma) holding one CSV
per stage plus ``meta.json``. The grid digest and search settings are
recorded there; a mismatch triggers a warning and a recomputation.
"""

from __future__ import annotations

import json
import logging
import os
import warnings
from pathlib import Path
from typing import Optional

from .model import Association, GeneralizedKennedy, ModulationConfig, Projective
from .tables import Family, GridSpec, read_table_csv, write_table_csv

__all__ = ["TableCache", "CacheMismatchWarning", "CACHE_ENV", "default_cache_dir"]

log = logging.getLogger(__name__)

CACHE_ENV = "ADAPTIVE_PPM_CACHE"


class CacheMismatchWarning(UserWarning):
    """Cached tables were built for a different grid or search."""


def default_cache_dir() -> Optional[Path]:
    val = os.environ.get(CACHE_ENV)
    return Path(val) if val else None


class TableCache:
    def __init__(self, root):
        self.root = Path(root)

    def key_dir(self, cfg: ModulationConfig, family: Family) -> Path:
        return self.root / f"{family.value}_M{cfg.M}_gamma{cfg.gamma.hex()}"

    @staticmethod
    def _fingerprint(grid: GridSpec, search) -> dict:
        return {"grid": grid.digest(), "n_scan": search.n_scan, "tol": search.tol}

    def load(self, cfg: ModulationConfig, grid: GridSpec, family: Family, search):
        from .dp import DpResult

        d = self.key_dir(cfg, family)
        meta_path = d / "meta.json"
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text())
        if meta.get("fingerprint") != self._fingerprint(grid, search):
            warnings.warn(f"cache entry {d} was built for a different grid or search; recomputing",
                          CacheMismatchWarning, stacklevel=3)
            return None
        tables = tuple(read_table_csv(d / f"stage_{k}.csv", grid)
                       for k in range(cfg.M - 1, 0, -1))
        c0 = meta["control0"]
        if family is Family.PROJECTIVE:
            control0 = Projective(c0["phi"])
        else:
            control0 = GeneralizedKennedy(c0["beta"], Association(c0["association"]))
        log.info("loaded %d cached tables from %s", len(tables), d)
        return DpResult(cfg, grid, family, meta["pc"], control0, tables,
                        meta["n_clamped"], search, {"cached": True})

    def store(self, result) -> Path:
        d = self.key_dir(result.cfg, result.family)
        d.mkdir(parents=True, exist_ok=True)
        (d / "meta.json").unlink(missing_ok=True)
        for t in result.tables:
            write_table_csv(t, d / f"stage_{t.stage}.csv")
        c = result.control0
        control0 = ({"phi": c.phi} if isinstance(c, Projective)
                    else {"beta": c.beta, "association": c.association.value})
        meta = {
            "family": result.family.value,
            "M": result.cfg.M,
            "mean_photons": result.cfg.mean_photons,
            "gamma": result.cfg.gamma,
            "fingerprint": self._fingerprint(result.grid, result.search),
            "pc": result.pc,
            "control0": control0,
            "n_clamped": result.n_clamped,
        }
        # meta last, so a partially written entry is never read back
        (d / "meta.json").write_text(json.dumps(meta, indent=1))
        return d
