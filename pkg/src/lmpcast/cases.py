"""Built-in cases used by the tests, the CLI and the examples directory."""
from __future__ import annotations

import numpy as np

from .network import (CaseDelta, Contingency, ContingencyModel, Generator, GridCase, Line,
                      Load, StochasticUnit)


def three_bus(outage_probability: float | None = None) -> GridCase:
    """Triangle network with the bus-2 load as the only parameter.

    Generator 1 (bus 1) offers 130 MW at 10 $/MWh, generator 2 (bus 3)
    200 MW at 15 $/MWh, every line has reactance 0.1 pu and a 100 MW limit.
    The load at bus 2 ranges over (0, 200) MW. With ``outage_probability``
    set, a contingency derating generator 1 to 100 MW is attached.
    """
    lines = (Line(1, 2, 0.1, 100.0, -100.0), Line(1, 3, 0.1, 100.0, -100.0),
             Line(2, 3, 0.1, 100.0, -100.0))
    gens = (Generator(1, 0.0, 130.0, 10.0), Generator(3, 0.0, 200.0, 15.0))
    loads = (Load(2, 100.0, stochastic=True, low=0.0, high=200.0),)
    contingencies = ContingencyModel()
    if outage_probability is not None:
        contingencies = ContingencyModel((Contingency(
            "gen1-derate", float(outage_probability),
            CaseDelta(gen_limits={0: (0.0, 100.0)})),))
    return GridCase((1, 2, 3), lines, gens, loads, (), reference_bus=3, name="three-bus",
                    contingencies=contingencies)


def random_case(seed: int, n_buses: int = 4, n_params: int = 2,
                quadratic: bool = False) -> GridCase:
    """Small meshed case with random costs, limits and parametric loads/wind.

    A ring plus one chord keeps the network connected. Roughly half the
    parameters are loads and half are stochastic units.
    """
    rng = np.random.default_rng(seed)
    buses = tuple(range(1, n_buses + 1))
    pairs = [(i, i % n_buses + 1) for i in buses]
    if n_buses > 3:
        pairs.append((1, 3))
    lines = tuple(Line(a, b, float(rng.uniform(0.05, 0.3)), lim, -lim)
                  for (a, b), lim in zip(pairs, rng.uniform(15, 50, len(pairs))))
    gen_buses = sorted(rng.choice(buses, size=min(3, n_buses), replace=False).tolist())
    gens = tuple(Generator(int(b), 0.0, float(rng.uniform(100, 200)),
                           float(rng.uniform(10, 40)),
                           float(rng.uniform(0.02, 0.1)) if quadratic else 0.0)
                 for b in gen_buses)
    n_load = (n_params + 1) // 2
    load_buses = rng.choice(buses, size=n_load, replace=False)
    loads = [Load(int(b), 60.0, stochastic=True, low=0.0, high=120.0) for b in load_buses]
    fixed_bus = int(rng.choice(buses))
    loads.append(Load(fixed_bus, float(rng.uniform(10, 40))))
    wind_buses = rng.choice(buses, size=n_params - n_load, replace=False)
    units = tuple(StochasticUnit(int(b), 60.0, 30.0) for b in wind_buses)
    return GridCase(buses, lines, gens, tuple(loads), units, reference_bus=1,
                    name=f"random-{seed}")


def wind_case(n_buses: int = 20, n_wind: int = 12, seed: int = 7,
              quadratic: bool = True) -> GridCase:
    """Meshed case whose only parameters are ``n_wind`` stochastic wind units.

    Buses sit on a ring with chords every fourth bus. Five generators with
    spread-out costs cover fixed loads at every bus; wind capacities are
    40 MW, so the parameter box is the hypercube [0, 40]^n_wind.
    """
    rng = np.random.default_rng(seed)
    buses = tuple(range(1, n_buses + 1))
    pairs = [(i, i % n_buses + 1) for i in buses]
    pairs += [(i, (i + n_buses // 2 - 1) % n_buses + 1) for i in range(1, n_buses + 1, 4)]
    lines = tuple(Line(a, b, float(rng.uniform(0.05, 0.2)), lim, -lim)
                  for (a, b), lim in zip(pairs, rng.uniform(35, 90, len(pairs))))
    gen_buses = np.linspace(1, n_buses, 5, endpoint=False).astype(int)
    gens = tuple(Generator(int(b), 0.0, 250.0, float(c), 0.01 if quadratic else 0.0)
                 for b, c in zip(gen_buses, (12.0, 18.0, 25.0, 31.0, 40.0)))
    loads = tuple(Load(b, float(rng.uniform(20, 60))) for b in buses)
    wind_buses = rng.choice(buses, size=n_wind, replace=False)
    units = tuple(StochasticUnit(int(b), 40.0, 20.0) for b in sorted(wind_buses))
    return GridCase(buses, lines, gens, loads, units, reference_bus=1,
                    name=f"wind-{n_buses}-{n_wind}")
