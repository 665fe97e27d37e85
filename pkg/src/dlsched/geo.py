"""GeoJSON view of a solution: tagged sites, annotated demands, and site-to-demand trip lines.

Coordinates are the instance's planar kilometre coordinates, not longitude/latitude.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .core import Instance, TwoPeriodConfig
from .schedule import Schedule
from .verify import InvalidScheduleError, validate

SITE_TAGS = ("unselected", "selected", "day1_only", "day2_only", "both_days")


def site_tag(schedule: Schedule, site: int) -> str:
    days = [any(i == site for i, _ in sel) for sel in schedule.selected]
    if len(days) == 1:
        return "selected" if days[0] else "unselected"
    if days[0] and days[1]:
        return "both_days"
    if days[0]:
        return "day1_only"
    if days[1]:
        return "day2_only"
    return "unselected"


def _point(x: float, y: float, props: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "Feature", "geometry": {"type": "Point", "coordinates": [x, y]}, "properties": props}


def emit_plot_data(
    instance: Instance, schedule: Schedule, config: Optional[TwoPeriodConfig] = None
) -> Dict[str, Any]:
    report = validate(instance, schedule, config)
    if not report.ok:
        raise InvalidScheduleError(report)
    features: List[Dict[str, Any]] = []
    for s in instance.sites:
        features.append(_point(s.x, s.y, {"kind": "site", "id": s.id, "tag": site_tag(schedule, s.id)}))
    by_demand = {t.demand: t for t in schedule.trips}
    for d in instance.demands:
        t = by_demand[d.id]
        features.append(
            _point(
                d.x,
                d.y,
                {
                    "kind": "demand",
                    "id": d.id,
                    "return_slot": t.return_slot,
                    "serving_site": t.site,
                    "drone_type": t.drone_type,
                    "period": t.period,
                },
            )
        )
    for t in schedule.trips:
        s, d = instance.sites[t.site], instance.demands[t.demand]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[s.x, s.y], [d.x, d.y]]},
                "properties": {
                    "kind": "trip",
                    "site": t.site,
                    "demand": t.demand,
                    "return_slot": t.return_slot,
                    "period": t.period,
                },
            }
        )
    for a, b in schedule.relocations:
        sa, sb = instance.sites[a], instance.sites[b]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[sa.x, sa.y], [sb.x, sb.y]]},
                "properties": {"kind": "relocation", "from_site": a, "to_site": b},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_geojson(path: Union[str, Path], doc: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path
