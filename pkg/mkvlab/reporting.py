#    This file is part of mkvlab
#
#    mkvlab is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    mkvlab is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with mkvlab.  If not, see <http://www.gnu.org/licenses/>.

import csv
from datetime import datetime, timezone
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Optional, Sequence, Tuple

from mkvlab import __version__
from mkvlab.constants import *
from mkvlab.particle_engine import ParticleEnsemble
from mkvlab.utils import canonical_json, sha256_file, sha256_text, to_builtin

Row = Sequence[Any]

def particle_rows(snapshots: Iterable[ParticleEnsemble], mode: SeriesMode) -> Tuple[Tuple[str, ...], Iterator[Row]]:
    if mode == SeriesMode.full:
        def iter_full():
            for snapshot in snapshots:
                for i, state in enumerate(snapshot.states.tolist()):
                    yield snapshot.time, i, state
        return ("time", "particle_index", "state"), iter_full()
    return summary_columns, (i.summary() for i in snapshots)

def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Row]) -> None:
    logging.debug(f"Writing '{path}'")
    with path.open("w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            # str() of a Python float is its shortest round-tripping repr
            writer.writerow(to_builtin(list(row)))

def write_report(path: Path, report: Dict[str, Any]) -> None:
    logging.debug(f"Writing '{path}'")
    with path.open("w", newline="\n", encoding="utf-8") as fp:
        fp.write(canonical_json(to_builtin(report)))

def write_manifest(path: Path, seed: int, config: Dict[str, Any], outputs: Sequence[Path]) -> None:
    manifest = {
        "seed": seed,
        "config_sha256": sha256_text(canonical_json(to_builtin(config))),
        "version": __version__,
        "outputs": {i.name: sha256_file(i) for i in outputs},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    logging.debug(f"Writing '{path}'")
    with path.open("w", newline="\n", encoding="utf-8") as fp:
        fp.write(canonical_json(manifest))

def write_run(out_dir: Path, seed: int, config: Dict[str, Any], report: Dict[str, Any],
              columns: Sequence[str], rows: Iterable[Row],
              extra_series: Optional[Dict[str, Tuple[Sequence[str], Iterable[Row]]]] = None) -> Dict[str, Path]:
    """Writes report.json, series.csv, any extra CSV files, then a manifest hashing all of them."""
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir.joinpath(report_file_name)
    series_path = out_dir.joinpath(series_file_name)
    manifest_path = out_dir.joinpath(manifest_file_name)

    write_report(report_path, report)
    write_csv(series_path, columns, rows)
    paths = dict(report=report_path, series=series_path)
    for file_name, (extra_columns, extra_rows) in (extra_series or {}).items():
        extra_path = out_dir.joinpath(file_name)
        write_csv(extra_path, extra_columns, extra_rows)
        paths[extra_path.stem] = extra_path
    write_manifest(manifest_path, seed, config, tuple(paths.values()))
    logging.info(f"Wrote {len(paths) + 1} files to '{out_dir}'")
    paths["manifest"] = manifest_path
    return paths
