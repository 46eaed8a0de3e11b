"""Unit conversions. Internally: minutes, kilometres, dollars."""

KM_PER_MILE = 1.609344
MINUTES_PER_HOUR = 60.0


def mph_to_kmh(v):
    return v * KM_PER_MILE


def km_to_miles(d):
    return d / KM_PER_MILE


def miles_to_km(d):
    return d * KM_PER_MILE


def per_hour_to_per_minute(rate):
    return rate / MINUTES_PER_HOUR


def clock_to_minutes(clock: str) -> float:
    """Parse ``"HH:MM"`` into minutes after midnight."""
    hh, mm = clock.strip().split(":")
    return int(hh) * 60.0 + float(mm)
