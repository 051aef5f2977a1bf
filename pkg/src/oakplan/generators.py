"""Test-instance generators: Blocksworld and Logistics toys with scripted solutions.

These back the test suite and the `oakplan gen` subcommand.  The scripted
solvers are deliberately naive (unstack-everything-then-rebuild, one
package route at a time) but always produce valid plans, which is all the
library seeding and the evaluation harness need.
"""

from __future__ import annotations

import random

from .model import Fact, Plan, PlanningProblem
from .pddl import parse_problem

__all__ = [
    "blocks_domain_text",
    "blocks_problem",
    "random_blocks_problem",
    "solve_blocks",
    "logistics_domain_text",
    "logistics_problem",
    "random_logistics_problem",
    "solve_logistics",
    "rename_problem",
    "sussman_problem",
    "SUSSMAN_PLAN_STEPS",
]


# -- Blocksworld --------------------------------------------------------------

_BLOCKS_DOMAIN = """\
(define (domain blocksworld)
  (:requirements :strips :typing)
  (:types Obj)
  (:predicates (on ?x - Obj ?y - Obj) (ontable ?x - Obj) (clear ?x - Obj)
               (holding ?x - Obj))
  (:action pickup
    :parameters (?x - Obj)
    :precondition (and (clear ?x) (ontable ?x))
    :effect (and (holding ?x) (not (clear ?x)) (not (ontable ?x))))
  (:action putdown
    :parameters (?x - Obj)
    :precondition (holding ?x)
    :effect (and (clear ?x) (ontable ?x) (not (holding ?x))))
  (:action stack
    :parameters (?x - Obj ?y - Obj)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (not (holding ?x)) (not (clear ?y))))
  (:action unstack
    :parameters (?x - Obj ?y - Obj)
    :precondition (and (on ?x ?y) (clear ?x))
    :effect (and (holding ?x) (clear ?y) (not (on ?x ?y)) (not (clear ?x))))
)
"""


def blocks_domain_text() -> str:
    return _BLOCKS_DOMAIN


def _tower_facts(towers: list[list[str]]) -> list[str]:
    facts = []
    for tower in towers:
        facts.append(f"(ontable {tower[0]})")
        for below, above in zip(tower, tower[1:]):
            facts.append(f"(on {above} {below})")
        facts.append(f"(clear {tower[-1]})")
    return facts


def blocks_problem(
    name: str,
    init_towers: list[list[str]],
    goal_towers: list[list[str]],
) -> PlanningProblem:
    """Towers are listed bottom to top; goals keep only the `on` chains."""
    blocks = sorted({b for t in init_towers for b in t})
    goal_facts = []
    for tower in goal_towers:
        for below, above in zip(tower, tower[1:]):
            goal_facts.append(f"(on {above} {below})")
    text = (
        f"(define (problem {name})\n"
        "  (:domain blocksworld)\n"
        f"  (:objects {' '.join(blocks)} - Obj)\n"
        f"  (:init {' '.join(_tower_facts(init_towers))})\n"
        f"  (:goal (and {' '.join(goal_facts)}))\n)\n"
    )
    return parse_problem(_BLOCKS_DOMAIN, text)


def sussman_problem() -> PlanningProblem:
    return blocks_problem("sussman", [["A", "C"], ["B"]], [["C", "B", "A"]])


SUSSMAN_PLAN_STEPS = [
    ("unstack", ("C", "A")),
    ("putdown", ("C",)),
    ("pickup", ("B",)),
    ("stack", ("B", "C")),
    ("pickup", ("A",)),
    ("stack", ("A", "B")),
]


def _random_towers(rng: random.Random, blocks: list[str], max_height: int) -> list[list[str]]:
    pool = list(blocks)
    rng.shuffle(pool)
    towers: list[list[str]] = []
    while pool:
        height = rng.randint(1, min(max_height, len(pool)))
        towers.append([pool.pop() for _ in range(height)])
    return towers


def random_blocks_problem(
    rng: random.Random,
    n_blocks: int,
    max_height: int = 3,
    name: str = "bw",
) -> PlanningProblem:
    blocks = [f"b{i + 1}" for i in range(n_blocks)]
    init = _random_towers(rng, blocks, max_height)
    goal_full = _random_towers(rng, blocks, max_height)
    goals = [t for t in goal_full if len(t) >= 2]
    if not goals:  # ensure at least one on-goal
        pair = sorted(rng.sample(blocks, 2)) if n_blocks >= 2 else [blocks[0]]
        if len(pair) == 2:
            goals = [pair]
    return blocks_problem(name, init, goals)


def solve_blocks(problem: PlanningProblem) -> Plan:
    """Unstack everything to the table, then build each goal tower bottom-up."""
    on = {f.args[0]: f.args[1] for f in problem.init if f.predicate == "on"}
    steps: list[tuple[str, tuple[str, ...]]] = []
    # tear down: repeatedly unstack a clear block that sits on another
    while on:
        tops = sorted(x for x in on if x not in on.values())
        x = tops[0]
        steps.append(("unstack", (x, on[x])))
        steps.append(("putdown", (x,)))
        del on[x]
    # rebuild: goal chains ordered bottom-up
    above_of = {f.args[1]: f.args[0] for f in problem.goals if f.predicate == "on"}
    below_targets = set(above_of.values())
    bottoms = sorted(b for b in above_of if b not in below_targets)
    for bottom in bottoms:
        below = bottom
        while below in above_of:
            above = above_of[below]
            steps.append(("pickup", (above,)))
            steps.append(("stack", (above, below)))
            below = above
    return Plan(tuple(problem.instantiate(n, a) for n, a in steps))


# -- Logistics ----------------------------------------------------------------

_LOGISTICS_DOMAIN = """\
(define (domain logistics)
  (:requirements :strips :typing)
  (:types city place physobj - object
          airport location - place
          truck airplane - vehicle
          vehicle package - physobj)
  (:predicates (at ?obj - physobj ?loc - place)
               (in ?pkg - package ?veh - vehicle)
               (in-city ?loc - place ?c - city))
  (:action load-truck
    :parameters (?pkg - package ?t - truck ?loc - place)
    :precondition (and (at ?t ?loc) (at ?pkg ?loc))
    :effect (and (in ?pkg ?t) (not (at ?pkg ?loc))))
  (:action unload-truck
    :parameters (?pkg - package ?t - truck ?loc - place)
    :precondition (and (at ?t ?loc) (in ?pkg ?t))
    :effect (and (at ?pkg ?loc) (not (in ?pkg ?t))))
  (:action load-airplane
    :parameters (?pkg - package ?a - airplane ?loc - airport)
    :precondition (and (at ?a ?loc) (at ?pkg ?loc))
    :effect (and (in ?pkg ?a) (not (at ?pkg ?loc))))
  (:action unload-airplane
    :parameters (?pkg - package ?a - airplane ?loc - airport)
    :precondition (and (at ?a ?loc) (in ?pkg ?a))
    :effect (and (at ?pkg ?loc) (not (in ?pkg ?a))))
  (:action drive-truck
    :parameters (?t - truck ?from - place ?to - place ?c - city)
    :precondition (and (at ?t ?from) (in-city ?from ?c) (in-city ?to ?c))
    :effect (and (at ?t ?to) (not (at ?t ?from))))
  (:action fly-airplane
    :parameters (?a - airplane ?from - airport ?to - airport)
    :precondition (at ?a ?from)
    :effect (and (at ?a ?to) (not (at ?a ?from))))
)
"""


def logistics_domain_text() -> str:
    return _LOGISTICS_DOMAIN


def logistics_problem(
    name: str,
    cities: dict[str, list[str]],  # city -> places, first one is the airport
    trucks: dict[str, str],  # truck -> start place
    airplanes: dict[str, str],  # airplane -> start airport
    packages: dict[str, tuple[str, str]],  # package -> (start, goal place)
) -> PlanningProblem:
    objs: list[str] = []
    init: list[str] = []
    for city, places in sorted(cities.items()):
        objs.append(f"{city} - city")
        objs.append(f"{places[0]} - airport")
        for loc in places[1:]:
            objs.append(f"{loc} - location")
        for loc in places:
            init.append(f"(in-city {loc} {city})")
    for truck, loc in sorted(trucks.items()):
        objs.append(f"{truck} - truck")
        init.append(f"(at {truck} {loc})")
    for plane, loc in sorted(airplanes.items()):
        objs.append(f"{plane} - airplane")
        init.append(f"(at {plane} {loc})")
    goals: list[str] = []
    for pkg, (start, goal) in sorted(packages.items()):
        objs.append(f"{pkg} - package")
        init.append(f"(at {pkg} {start})")
        goals.append(f"(at {pkg} {goal})")
    text = (
        f"(define (problem {name})\n"
        "  (:domain logistics)\n"
        f"  (:objects {' '.join(objs)})\n"
        f"  (:init {' '.join(init)})\n"
        f"  (:goal (and {' '.join(goals)}))\n)\n"
    )
    return parse_problem(_LOGISTICS_DOMAIN, text)


def random_logistics_problem(
    rng: random.Random,
    n_cities: int = 2,
    n_packages: int = 1,
    extra_locations: int = 1,
    name: str = "log",
) -> PlanningProblem:
    cities: dict[str, list[str]] = {}
    for i in range(n_cities):
        city = f"c{i + 1}"
        places = [f"apt{i + 1}"]
        for j in range(rng.randint(0, extra_locations)):
            places.append(f"loc{i + 1}{j + 1}")
        cities[city] = places
    trucks = {f"t{i + 1}": rng.choice(cities[f"c{i + 1}"]) for i in range(n_cities)}
    airplanes = {"p1": f"apt{rng.randint(1, n_cities)}"} if n_cities > 1 else {}
    all_places = [loc for places in cities.values() for loc in places]
    packages = {}
    for k in range(n_packages):
        start = rng.choice(all_places)
        goal = rng.choice([p for p in all_places if p != start] or all_places)
        packages[f"pkg{k + 1}"] = (start, goal)
    return logistics_problem(name, cities, trucks, airplanes, packages)


def solve_logistics(problem: PlanningProblem) -> Plan:
    """Route each package in turn: truck legs within cities, one flight between."""
    city_of = {f.args[0]: f.args[1] for f in problem.init if f.predicate == "in-city"}
    pos = {
        f.args[0]: f.args[1]
        for f in problem.init
        if f.predicate == "at"
    }
    trucks = sorted(o for o, s in problem.objects.items() if s == "truck")
    planes = sorted(o for o, s in problem.objects.items() if s == "airplane")
    airports = {
        city: sorted(p for p, c in city_of.items() if c == city and problem.objects[p] == "airport")[0]
        for city in set(city_of.values())
    }
    steps: list[tuple[str, tuple[str, ...]]] = []

    def truck_in(city: str) -> str:
        cands = [t for t in trucks if city_of[pos[t]] == city]
        if not cands:
            raise ValueError(f"no truck available in {city}")
        return cands[0]

    def drive(truck: str, dest: str) -> None:
        if pos[truck] != dest:
            steps.append(("drive-truck", (truck, pos[truck], dest, city_of[dest])))
            pos[truck] = dest

    def truck_leg(pkg: str, dest: str) -> None:
        truck = truck_in(city_of[pos[pkg]])
        drive(truck, pos[pkg])
        steps.append(("load-truck", (pkg, truck, pos[pkg])))
        drive(truck, dest)
        steps.append(("unload-truck", (pkg, truck, dest)))
        pos[pkg] = dest

    def fly_leg(pkg: str, dest_airport: str) -> None:
        plane = planes[0]
        if pos[plane] != pos[pkg]:
            steps.append(("fly-airplane", (plane, pos[plane], pos[pkg])))
            pos[plane] = pos[pkg]
        steps.append(("load-airplane", (pkg, plane, pos[pkg])))
        steps.append(("fly-airplane", (plane, pos[plane], dest_airport)))
        pos[plane] = dest_airport
        steps.append(("unload-airplane", (pkg, plane, dest_airport)))
        pos[pkg] = dest_airport

    for goal in sorted(problem.goals):
        pkg, dest = goal.args
        if pos[pkg] == dest:
            continue
        if city_of[pos[pkg]] == city_of[dest]:
            truck_leg(pkg, dest)
            continue
        home_apt = airports[city_of[pos[pkg]]]
        if pos[pkg] != home_apt:
            truck_leg(pkg, home_apt)
        fly_leg(pkg, airports[city_of[dest]])
        if pos[pkg] != dest:
            truck_leg(pkg, dest)
    return Plan(tuple(problem.instantiate(n, a) for n, a in steps))


# -- renaming -----------------------------------------------------------------


def rename_problem(
    problem: PlanningProblem, rng: random.Random, prefix: str = "x"
) -> tuple[PlanningProblem, dict[str, str]]:
    """Uniform random renaming of all objects; returns (renamed, old->new map)."""
    old = sorted(problem.objects)
    fresh = [f"{prefix}{i + 1}" for i in range(len(old))]
    rng.shuffle(fresh)
    mapping = dict(zip(old, fresh))

    def rn(fact: Fact) -> Fact:
        return Fact(fact.predicate, tuple(mapping[a] for a in fact.args))

    renamed = problem.replace(
        name=f"{problem.name}-renamed",
        objects={mapping[o]: s for o, s in problem.objects.items()},
        init=frozenset(rn(f) for f in problem.init),
        goals=frozenset(rn(f) for f in problem.goals),
    )
    return renamed, mapping
