"""Transit and AMoD fares, and the price of a commute route."""

from __future__ import annotations

from dataclasses import dataclass

from .units import km_to_miles


@dataclass(frozen=True)
class FareSchedule:
    """Fare parameters.

    Transit fares are flat per line (``TransitLine.fare``, falling back to
    ``transit_fare``); transfers pay ``transfer_discount`` times the line
    fare. AMoD follows a TNC-style tariff scaled by the discount factor
    ``lambda`` chosen by the operator within ``[lambda_min, lambda_max]``.
    """

    transit_fare: float = 2.5
    transfer_discount: float = 0.0
    f_base: float = 1.87
    f_book: float = 1.85
    f_min: float = 4.98
    pi_d: float = 0.85  # dollars per mile
    pi_t: float = 0.30  # dollars per minute
    lambda_min: float = 0.1
    lambda_max: float = 1.0

    @property
    def per_km(self) -> float:
        return km_to_miles(self.pi_d)


def amod_fare(d_km: float, tau_min: float, fares: FareSchedule | None = None) -> float:
    """Undiscounted AMoD fare for a trip of ``d_km`` kilometres and ``tau_min`` minutes."""
    f = fares or FareSchedule()
    raw = f.f_base + f.f_book + f.pi_d * km_to_miles(d_km) + f.pi_t * tau_min
    return max(raw, f.f_min)


def line_fare(line, fares: FareSchedule) -> float:
    return fares.transit_fare if line.fare is None else line.fare


def route_price(route, lam: float, fares: FareSchedule, lines: dict) -> float:
    """Price of ``route`` at AMoD discount ``lam``.

    The first transit leg pays the full line fare only when the route has
    no AMoD legs; every other transit leg pays the transfer fare.
    """
    has_amod = any(leg.mode == "amod" for leg in route.legs)
    price = 0.0
    first_transit_charged = has_amod
    for leg in route.legs:
        if leg.mode == "transit":
            f = line_fare(lines[leg.line], fares)
            if not first_transit_charged:
                price += f
                first_transit_charged = True
            else:
                price += fares.transfer_discount * f
        else:
            price += lam * amod_fare(leg.distance_km, leg.travel_min, fares)
    return price


def amod_fare_total(route, fares: FareSchedule) -> float:
    """Sum of undiscounted AMoD fares on ``route``; the price slope in lambda."""
    return sum(amod_fare(leg.distance_km, leg.travel_min, fares)
               for leg in route.legs if leg.mode == "amod")
