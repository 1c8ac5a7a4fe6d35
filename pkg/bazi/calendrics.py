"""
Calendrical primitives for chart construction.

Julian dates, the apparent longitude of the Sun, the 24 solar terms, the
equation of time and the true-solar-time correction for a birthplace.

The solar longitude comes from the abridged VSOP87 Earth series (periodic
terms L0..L5), corrected to FK5, with low-precision nutation and annual
aberration applied. ΔT is taken from the Espenak-Meeus polynomials. Over the
supported window this places solar-term instants within a minute of published
almanac times.
"""

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Optional

from scipy.optimize import brentq

from errors import InputValidationError, NumericalError, OutOfWindowError

J2000 = 2451545.0
J2000_DATETIME = datetime(2000, 1, 1, 12, 0)
DAY = timedelta(days=1)

# Civil inputs must fall in this window. The ephemeris kernel accepts a wider
# range so the solar terms bounding 1900 and 2100 births can be located.
MIN_CIVIL_YEAR = 1900
MAX_CIVIL_YEAR = 2100
MIN_TERM_YEAR = 1899
MAX_TERM_YEAR = 2100
KERNEL_MIN_JD = J2000 + (datetime(1899, 1, 1) - J2000_DATETIME) / DAY
KERNEL_MAX_JD = J2000 + (datetime(2102, 1, 1) - J2000_DATETIME) / DAY

MAX_UTC_OFFSET_MINUTES = 840
TROPICAL_YEAR_DAYS = 365.2422

SOLAR_TERM_NAMES = [
    ("Lichun", "立春"), ("Yushui", "雨水"), ("Jingzhe", "惊蛰"), ("Chunfen", "春分"),
    ("Qingming", "清明"), ("Guyu", "谷雨"), ("Lixia", "立夏"), ("Xiaoman", "小满"),
    ("Mangzhong", "芒种"), ("Xiazhi", "夏至"), ("Xiaoshu", "小暑"), ("Dashu", "大暑"),
    ("Liqiu", "立秋"), ("Chushu", "处暑"), ("Bailu", "白露"), ("Qiufen", "秋分"),
    ("Hanlu", "寒露"), ("Shuangjiang", "霜降"), ("Lidong", "立冬"), ("Xiaoxue", "小雪"),
    ("Daxue", "大雪"), ("Dongzhi", "冬至"), ("Xiaohan", "小寒"), ("Dahan", "大寒"),
]


class SolarTimeMode(Enum):
    """How far civil clock time is corrected toward local solar time."""
    CIVIL = "civil"          # no correction
    MEAN = "mean"            # longitude offset from the zone meridian
    APPARENT = "apparent"    # longitude offset plus equation of time


# ==================== Types ====================

@dataclass(frozen=True)
class CivilDateTime:
    """Wall-clock reading with its UTC offset (minutes east of Greenwich)."""
    year: int
    month: int
    day: int
    hour: int = 0
    minute: int = 0
    utc_offset_minutes: int = 0

    def __post_init__(self):
        try:
            datetime(self.year, self.month, self.day, self.hour, self.minute)
        except (ValueError, TypeError, OverflowError) as e:
            raise InputValidationError(
                f"invalid civil datetime {self.year}-{self.month}-{self.day} "
                f"{self.hour}:{self.minute}: {e}", field="birth"
            ) from None
        if not -MAX_UTC_OFFSET_MINUTES <= self.utc_offset_minutes <= MAX_UTC_OFFSET_MINUTES:
            raise InputValidationError(
                f"utc_offset_minutes must be within ±{MAX_UTC_OFFSET_MINUTES}, "
                f"got {self.utc_offset_minutes}", field="utc_offset_minutes"
            )

    @classmethod
    def from_datetime(cls, dt: datetime, utc_offset_minutes: int = 0) -> "CivilDateTime":
        return cls(dt.year, dt.month, dt.day, dt.hour, dt.minute, utc_offset_minutes)

    def to_datetime(self) -> datetime:
        """Naive datetime of the wall reading."""
        return datetime(self.year, self.month, self.day, self.hour, self.minute)

    def isoformat(self) -> str:
        return self.to_datetime().strftime("%Y-%m-%dT%H:%M")


@dataclass(frozen=True)
class GeoLocation:
    longitude_deg_east: float
    latitude_deg_north: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.longitude_deg_east, (int, float)) and -180.0 <= self.longitude_deg_east <= 180.0):
            raise InputValidationError(
                f"longitude must be within [-180, 180], got {self.longitude_deg_east}", field="lon"
            )
        if not (isinstance(self.latitude_deg_north, (int, float)) and -90.0 <= self.latitude_deg_north <= 90.0):
            raise InputValidationError(
                f"latitude must be within [-90, 90], got {self.latitude_deg_north}", field="lat"
            )


@dataclass(frozen=True)
class SolarInstant:
    """
    A corrected birth instant.

    ``local_true_solar`` is a wall reading in local solar time, floored to the
    minute; it keeps the civil UTC offset only as metadata.
    """
    jd_utc: float
    local_true_solar: CivilDateTime


@dataclass(frozen=True)
class SolarTerm:
    index: int
    target_longitude_deg: float
    instant: SolarInstant

    @property
    def name(self) -> str:
        return SOLAR_TERM_NAMES[self.index][0]

    @property
    def glyph(self) -> str:
        return SOLAR_TERM_NAMES[self.index][1]

    @property
    def is_jie(self) -> bool:
        """Jie terms (even indices from Lichun) open the BaZi months."""
        return self.index % 2 == 0


# ==================== Julian dates ====================

def to_julian_date(civil: CivilDateTime) -> float:
    """Astronomical Julian Date (UTC) of a civil wall reading."""
    utc = civil.to_datetime() - timedelta(minutes=civil.utc_offset_minutes)
    return J2000 + (utc - J2000_DATETIME) / DAY


def jd_to_datetime(jd_utc: float, utc_offset_minutes: int = 0) -> datetime:
    """Naive wall datetime at the given offset, unrounded."""
    try:
        return J2000_DATETIME + timedelta(days=jd_utc - J2000, minutes=utc_offset_minutes)
    except OverflowError:
        raise OutOfWindowError(f"Julian date {jd_utc} is outside the representable range") from None


def from_julian_date(jd_utc: float, utc_offset_minutes: int = 0) -> CivilDateTime:
    """Inverse of to_julian_date, rounded to the nearest minute."""
    wall = _round_to_minute(jd_to_datetime(jd_utc, utc_offset_minutes))
    return CivilDateTime.from_datetime(wall, utc_offset_minutes)


def _round_to_minute(dt: datetime) -> datetime:
    floored = dt.replace(second=0, microsecond=0)
    if dt - floored >= timedelta(seconds=30):
        floored += timedelta(minutes=1)
    return floored


def _floor_to_minute(dt: datetime) -> datetime:
    return dt.replace(second=0, microsecond=0)


def check_civil_window(civil: CivilDateTime) -> None:
    if not MIN_CIVIL_YEAR <= civil.year <= MAX_CIVIL_YEAR:
        raise OutOfWindowError(
            f"year {civil.year} is outside the supported window {MIN_CIVIL_YEAR}-{MAX_CIVIL_YEAR}",
            field="birth",
        )


def _check_kernel_window(jd_utc: float) -> None:
    if not KERNEL_MIN_JD <= jd_utc <= KERNEL_MAX_JD:
        raise OutOfWindowError(f"Julian date {jd_utc:.5f} is outside the supported ephemeris window")


# ==================== ΔT ====================

def delta_t_seconds(decimal_year: float) -> float:
    """TT − UT in seconds (Espenak-Meeus polynomials, 1860-2150)."""
    y = decimal_year
    if y < 1900:
        t = y - 1860
        return (7.62 + 0.5737 * t - 0.251754 * t ** 2 + 0.01680668 * t ** 3
                - 0.0004473624 * t ** 4 + t ** 5 / 233174)
    if y < 1920:
        t = y - 1900
        return -2.79 + 1.494119 * t - 0.0598939 * t ** 2 + 0.0061966 * t ** 3 - 0.000197 * t ** 4
    if y < 1941:
        t = y - 1920
        return 21.20 + 0.84493 * t - 0.076100 * t ** 2 + 0.0020936 * t ** 3
    if y < 1961:
        t = y - 1950
        return 29.07 + 0.407 * t - t ** 2 / 233 + t ** 3 / 2547
    if y < 1986:
        t = y - 1975
        return 45.45 + 1.067 * t - t ** 2 / 260 - t ** 3 / 718
    if y < 2005:
        t = y - 2000
        return (63.86 + 0.3345 * t - 0.060374 * t ** 2 + 0.0017275 * t ** 3
                + 0.000651814 * t ** 4 + 0.00002373599 * t ** 5)
    if y < 2050:
        t = y - 2000
        return 62.92 + 0.32217 * t + 0.005589 * t ** 2
    return -20 + 32 * ((y - 1820) / 100) ** 2 - 0.5628 * (2150 - y)


def _jde(jd_utc: float) -> float:
    decimal_year = 2000.0 + (jd_utc - J2000) / 365.25
    return jd_utc + delta_t_seconds(decimal_year) / 86400.0


# ==================== Solar longitude ====================

# Abridged VSOP87 heliocentric longitude of the Earth: (A, B, C) with
# term = A·cos(B + C·τ), A in 1e-8 rad, τ in Julian millennia from J2000 (TT).
EARTH_L0 = (
    (175347046, 0.0, 0.0), (3341656, 4.6692568, 6283.07585), (34894, 4.6261, 12566.1517),
    (3497, 2.7441, 5753.3849), (3418, 2.8289, 3.5231), (3136, 3.6277, 77713.7715),
    (2676, 4.4181, 7860.4194), (2343, 6.1352, 3930.2097), (1324, 0.7425, 11506.7698),
    (1273, 2.0371, 529.691), (1199, 1.1096, 1577.3435), (990, 5.233, 5884.927),
    (902, 2.045, 26.298), (857, 3.508, 398.149), (780, 1.179, 5223.694),
    (753, 2.533, 5507.553), (505, 4.583, 18849.228), (492, 4.205, 775.523),
    (357, 2.92, 0.067), (317, 5.849, 11790.629), (284, 1.899, 796.298),
    (271, 0.315, 10977.079), (243, 0.345, 5486.778), (206, 4.806, 2544.314),
    (205, 1.869, 5573.143), (202, 2.458, 6069.777), (156, 0.833, 213.299),
    (132, 3.411, 2942.463), (126, 1.083, 20.775), (115, 0.645, 0.98),
    (103, 0.636, 4694.003), (102, 0.976, 15720.839), (102, 4.267, 7.114),
    (99, 6.21, 2146.17), (98, 0.68, 155.42), (86, 5.98, 161000.69),
    (85, 1.3, 6275.96), (85, 3.67, 71430.7), (80, 1.81, 17260.15),
    (79, 3.04, 12036.46), (75, 1.76, 5088.63), (74, 3.5, 3154.69),
    (74, 4.68, 801.82), (70, 0.83, 9437.76), (62, 3.98, 8827.39),
    (61, 1.82, 7084.9), (57, 2.78, 6286.6), (56, 4.39, 14143.5),
    (56, 3.47, 6279.55), (52, 0.19, 12139.55), (52, 1.33, 1748.02),
    (51, 0.28, 5856.48), (49, 0.49, 1194.45), (41, 5.37, 8429.24),
    (41, 2.4, 19651.05), (39, 6.17, 10447.39), (37, 6.04, 10213.29),
    (37, 2.57, 1059.38), (36, 1.71, 2352.87), (36, 1.78, 6812.77),
    (33, 0.59, 17789.85), (30, 0.44, 83996.85), (30, 2.74, 1349.87),
    (25, 3.16, 4690.48),
)
EARTH_L1 = (
    (628331966747, 0.0, 0.0), (206059, 2.678235, 6283.07585), (4303, 2.6351, 12566.1517),
    (425, 1.59, 3.523), (119, 5.796, 26.298), (109, 2.966, 1577.344),
    (93, 2.59, 18849.23), (72, 1.14, 529.69), (68, 1.87, 398.15),
    (67, 4.41, 5507.55), (59, 2.89, 5223.69), (56, 2.17, 155.42),
    (45, 0.4, 796.3), (36, 0.47, 775.52), (29, 2.65, 7.11),
    (21, 5.34, 0.98), (19, 1.85, 5486.78), (19, 4.97, 213.3),
    (17, 2.99, 6275.96), (16, 0.03, 2544.31), (16, 1.43, 2146.17),
    (15, 1.21, 10977.08), (12, 2.83, 1748.02), (12, 3.26, 5088.63),
    (12, 5.27, 1194.45), (12, 2.08, 4694.0), (11, 0.77, 553.57),
    (10, 1.3, 6286.6), (10, 4.24, 1349.87), (9, 2.7, 242.73),
    (9, 5.64, 951.72), (8, 5.3, 2352.87), (6, 2.65, 9437.76),
    (6, 4.67, 4690.48),
)
EARTH_L2 = (
    (52919, 0.0, 0.0), (8720, 1.0721, 6283.0758), (309, 0.867, 12566.152),
    (27, 0.05, 3.52), (16, 5.19, 26.3), (16, 3.68, 155.42),
    (10, 0.76, 18849.23), (9, 2.06, 77713.77), (7, 0.83, 775.52),
    (5, 4.66, 1577.34), (4, 1.03, 7.11), (4, 3.44, 5573.14),
    (3, 5.14, 796.3), (3, 6.05, 5507.55), (3, 1.19, 242.73),
    (3, 6.12, 529.69), (3, 0.31, 398.15), (3, 2.28, 553.57),
    (2, 4.38, 5223.69), (2, 3.75, 0.98),
)
EARTH_L3 = (
    (289, 5.844, 6283.076), (35, 0.0, 0.0), (17, 5.49, 12566.15),
    (3, 5.2, 155.42), (1, 4.72, 3.52), (1, 5.3, 18849.23), (1, 5.97, 242.73),
)
EARTH_L4 = ((114, 3.142, 0.0), (8, 4.13, 6283.08), (1, 3.84, 12566.15))
EARTH_L5 = ((1, 3.14, 0.0),)
EARTH_SERIES = (EARTH_L0, EARTH_L1, EARTH_L2, EARTH_L3, EARTH_L4, EARTH_L5)

FK5_CORRECTION_ARCSEC = -0.09033
ABERRATION_ARCSEC = -20.4898


def _series(terms, tau: float) -> float:
    return sum(a * math.cos(b + c * tau) for a, b, c in terms)


def _earth_heliocentric_longitude(jde: float) -> float:
    """Radians, mean equinox of date."""
    tau = (jde - J2000) / 365250.0
    total = 0.0
    for power, terms in enumerate(EARTH_SERIES):
        total += _series(terms, tau) * tau ** power
    return total / 1e8


def _nutation_in_longitude_arcsec(t: float) -> float:
    omega = math.radians(125.04452 - 1934.136261 * t)
    sun_mean = math.radians(280.4665 + 36000.7698 * t)
    moon_mean = math.radians(218.3165 + 481267.8813 * t)
    return (-17.20 * math.sin(omega) - 1.32 * math.sin(2 * sun_mean)
            - 0.23 * math.sin(2 * moon_mean) + 0.21 * math.sin(2 * omega))


def _earth_sun_distance_au(t: float) -> float:
    anomaly = math.radians(357.52911 + 35999.05029 * t)
    return 1.000140 - 0.016708 * math.cos(anomaly) - 0.000139 * math.cos(2 * anomaly)


def _apparent_longitude_unchecked(jd_utc: float) -> float:
    jde = _jde(jd_utc)
    t = (jde - J2000) / 36525.0
    geometric = math.degrees(_earth_heliocentric_longitude(jde)) + 180.0
    corrections = (FK5_CORRECTION_ARCSEC
                   + _nutation_in_longitude_arcsec(t)
                   + ABERRATION_ARCSEC / _earth_sun_distance_au(t))
    return (geometric + corrections / 3600.0) % 360.0


def apparent_solar_longitude(jd_utc: float) -> float:
    """Apparent geocentric ecliptic longitude of the Sun, degrees in [0, 360)."""
    _check_kernel_window(jd_utc)
    return _apparent_longitude_unchecked(jd_utc)


def _wrap180(angle: float) -> float:
    return (angle + 180.0) % 360.0 - 180.0


# ==================== Solar terms ====================

TERM_BRACKET_DAYS = 8.0
TERM_XTOL_DAYS = 1e-7
TERM_MAX_ITERATIONS = 100


def _instant_from_jd(jd_utc: float, utc_offset_minutes: int = 0) -> SolarInstant:
    wall = jd_to_datetime(jd_utc, utc_offset_minutes)
    return SolarInstant(jd_utc, CivilDateTime.from_datetime(_floor_to_minute(wall), utc_offset_minutes))


@lru_cache(maxsize=None)
def solar_term_instant(gregorian_year: int, term_index: int) -> SolarTerm:
    """
    Instant the Sun reaches the term's longitude.

    Terms are counted from Lichun of ``gregorian_year``; indices 22 and 23
    (Xiaohan, Dahan) fall in January of the following civil year.
    """
    if not MIN_TERM_YEAR <= gregorian_year <= MAX_TERM_YEAR:
        raise OutOfWindowError(
            f"solar-term year {gregorian_year} is outside {MIN_TERM_YEAR}-{MAX_TERM_YEAR}"
        )
    if not 0 <= term_index <= 23:
        raise InputValidationError(f"term index must be in 0..23, got {term_index}", field="term_index")

    target = (315.0 + 15.0 * term_index) % 360.0
    guess = to_julian_date(CivilDateTime(gregorian_year, 2, 4, 12, 0)) + term_index * TROPICAL_YEAR_DAYS / 24.0
    low = guess - TERM_BRACKET_DAYS
    high = guess + TERM_BRACKET_DAYS

    def residual(jd: float) -> float:
        return _wrap180(_apparent_longitude_unchecked(jd) - target)

    try:
        root, result = brentq(
            residual, low, high, xtol=TERM_XTOL_DAYS, maxiter=TERM_MAX_ITERATIONS,
            full_output=True, disp=False,
        )
    except ValueError as e:
        raise NumericalError(
            f"could not bracket solar term {term_index} of {gregorian_year}: {e}"
        ) from None
    if not result.converged:
        raise NumericalError(
            f"solar term {term_index} of {gregorian_year} did not converge "
            f"after {result.iterations} iterations"
        )
    _check_kernel_window(root)
    return SolarTerm(term_index, target, _instant_from_jd(root))


def solar_terms_for_year(gregorian_year: int) -> List[SolarTerm]:
    """All 24 terms from Lichun of ``gregorian_year`` through the following Dahan."""
    return [solar_term_instant(gregorian_year, index) for index in range(24)]


# ==================== Solar time ====================

def equation_of_time(jd_utc: float) -> float:
    """Apparent minus mean solar time, in minutes."""
    _check_kernel_window(jd_utc)
    t = (_jde(jd_utc) - J2000) / 36525.0
    mean_longitude = math.radians((280.46646 + 36000.76983 * t + 0.0003032 * t * t) % 360.0)
    anomaly = math.radians(357.52911 + 35999.05029 * t - 0.0001537 * t * t)
    eccentricity = 0.016708634 - 0.000042037 * t - 0.0000001267 * t * t
    obliquity = math.radians(23.0 + (26.0 + (21.448 - 46.815 * t) / 60.0) / 60.0)
    y = math.tan(obliquity / 2.0) ** 2

    e_rad = (y * math.sin(2 * mean_longitude)
             - 2 * eccentricity * math.sin(anomaly)
             + 4 * eccentricity * y * math.sin(anomaly) * math.cos(2 * mean_longitude)
             - 0.5 * y * y * math.sin(4 * mean_longitude)
             - 1.25 * eccentricity ** 2 * math.sin(2 * anomaly))
    return math.degrees(e_rad) * 4.0


def longitude_correction_minutes(civil: CivilDateTime, loc: GeoLocation) -> float:
    """4 minutes per degree east of the zone meridian."""
    zone_meridian = civil.utc_offset_minutes / 4.0
    return 4.0 * (loc.longitude_deg_east - zone_meridian)


def true_solar_time(
    civil: CivilDateTime,
    loc: GeoLocation,
    mode: SolarTimeMode = SolarTimeMode.APPARENT,
    eot_fn: Optional[Callable[[float], float]] = None,
) -> SolarInstant:
    """
    Correct a civil birth time to local solar time.

    ``eot_fn`` replaces the equation of time (used to stub it in tests).
    """
    check_civil_window(civil)
    jd_utc = to_julian_date(civil)

    correction = 0.0
    if mode in (SolarTimeMode.MEAN, SolarTimeMode.APPARENT):
        correction += longitude_correction_minutes(civil, loc)
    if mode is SolarTimeMode.APPARENT:
        correction += (eot_fn or equation_of_time)(jd_utc)

    local = civil.to_datetime() + timedelta(minutes=correction)
    local = _floor_to_minute(local)
    return SolarInstant(jd_utc, CivilDateTime.from_datetime(local, civil.utc_offset_minutes))
