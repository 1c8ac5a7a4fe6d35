"""solar-terms: the 24 term instants from Lichun of a year, in UTC."""

import argparse

from bazi.calendrics import from_julian_date, solar_terms_for_year
from commands.common import add_json_flag, emit
from config import GlobalConfig


def utc_stamp(jd_utc: float) -> str:
    return from_julian_date(jd_utc).isoformat() + "Z"


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    terms = solar_terms_for_year(args.year)
    rows = []
    for term in terms:
        rows.append({
            "index": term.index,
            "name": term.name,
            "glyph": term.glyph,
            "jie": term.is_jie,
            "longitude_deg": term.target_longitude_deg,
            "jd_utc": round(term.instant.jd_utc, 6),
            "utc": utc_stamp(term.instant.jd_utc),
            "local": from_julian_date(term.instant.jd_utc, args.utc_offset).isoformat(),
        })
    data = {"format": "solar-terms/v1", "year": args.year, "utc_offset_minutes": args.utc_offset, "terms": rows}
    emit(data, args.json, "\n".join(r["utc"] for r in rows))
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("solar-terms", help="list solar-term instants", description=__doc__)
    parser.add_argument("year", type=int, help="year whose Lichun opens the list")
    parser.add_argument("--utc-offset", type=int, default=0, help="offset in minutes for the JSON local column")
    add_json_flag(parser)
    parser.set_defaults(handler=run)
