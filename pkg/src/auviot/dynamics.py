"""Episodic world model: AUV kinematics, propulsion energy, node energy
bookkeeping, AoI and service dynamics, fairness, reward assembly, and the
one-slot transition.

States are treated as immutable values: `step` never mutates its input and
returns a fresh `WorldState`, so independent episodes can run concurrently
without synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acoustics import (
    ChannelParams,
    attenuation,
    harvest_energy,
    harvest_power,
    received_level,
    required_uplink_energy,
    required_uplink_power,
    source_level,
)

ALL_DOCKED = "all_docked"
HORIZON = "horizon"

REWARD_TERMS = ("goal", "aoi", "fairness", "boundary", "stall", "margin",
                "collision", "dock")


@dataclass
class MotionParams:
    """Kinematic, propulsion, and arena constants.

    Lengths in m, speeds in m/s, angles in rad, durations in s, density in
    kg/m^3, powers in W. `arena` is ((xmin, ymin), (xmax, ymax)).
    """

    v_max: float = 4.0
    dtheta_max: float = math.radians(25.0)
    dv_max: float = 0.4
    dt: float = 25.0
    rho: float = 1000.0
    c_d: float = 0.006
    area: float = 3.0
    eta_prop: float = 0.7
    hotel_w: float = 40.0
    t_max: int = 55
    d_th: float = 100.0
    sigma_c: float = 25.0
    dock_center: tuple = (1800.0, 1800.0)
    dock_radius: float = 150.0
    arena: tuple = ((0.0, 0.0), (2000.0, 2000.0))

    def validate(self) -> None:
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.dock_radius > 0:
            raise ValueError(f"dock_radius must be positive, got {self.dock_radius}")
        if not self.d_th > 0:
            raise ValueError(f"d_th must be positive, got {self.d_th}")
        if not self.sigma_c > 0:
            raise ValueError(f"sigma_c must be positive, got {self.sigma_c}")
        if not (isinstance(self.t_max, int) and self.t_max >= 1):
            raise ValueError(f"t_max must be a positive integer, got {self.t_max}")
        (xmin, ymin), (xmax, ymax) = self.arena
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"arena must be non-degenerate, got {self.arena}")


@dataclass
class RewardWeights:
    """Reward coefficients and AoI bookkeeping constants.

    The weighting coefficients are config-exposed; the defaults here are
    working values, not published ones.
    """

    alpha_g: float = 0.05
    alpha_a: float = 0.1
    alpha_f: float = 1.0
    alpha_c: float = 5.0
    alpha_m: float = 0.5
    rho_bd: float = 10.0
    rho_st: float = 0.5
    r_dock_first: float = 20.0
    r_dock_all: float = 50.0
    stall_eps: float = 1.0
    margin_eps: float = 0.01
    lambda_f: float = 1.0
    k_reset: int = 3
    a_max: int = 55

    def validate(self) -> None:
        if not (isinstance(self.k_reset, int) and self.k_reset >= 1):
            raise ValueError(f"k_reset must be a positive integer, got {self.k_reset}")
        if not (isinstance(self.a_max, int) and self.a_max >= 1):
            raise ValueError(f"a_max must be a positive integer, got {self.a_max}")
        if not self.margin_eps > 0:
            raise ValueError(f"margin_eps must be positive, got {self.margin_eps}")


@dataclass
class ScenarioParams:
    """Episode initialization: fleet size, starts, and initial stocks."""

    n_auvs: int = 1
    n_nodes: int = 7
    auv_start: tuple = (200.0, 200.0)
    auv_spacing: float = 250.0
    initial_heading: float = math.pi / 4.0
    initial_speed: float = 0.0
    battery_j: float = 1e6
    node_energy_j: float = 5.0
    node_margin: float = 100.0

    def validate(self) -> None:
        if not (isinstance(self.n_auvs, int) and self.n_auvs >= 1):
            raise ValueError(f"n_auvs must be a positive integer, got {self.n_auvs}")
        if not (isinstance(self.n_nodes, int) and self.n_nodes >= 1):
            raise ValueError(f"n_nodes must be a positive integer, got {self.n_nodes}")
        if self.battery_j < 0 or self.node_energy_j < 0:
            raise ValueError("initial energies must be non-negative")


@dataclass
class SimParams:
    """Everything the transition function needs."""

    channel: ChannelParams = field(default_factory=ChannelParams)
    motion: MotionParams = field(default_factory=MotionParams)
    weights: RewardWeights = field(default_factory=RewardWeights)

    def validate(self) -> None:
        self.channel.validate()
        self.motion.validate()
        self.weights.validate()


@dataclass(eq=False)
class AuvState:
    pos: np.ndarray            # (2,) m
    heading: float             # rad, in (-pi, pi]
    speed: float               # m/s, in [0, v_max]
    battery_j: float
    docked: bool = False


@dataclass(eq=False)
class NodeState:
    pos: np.ndarray            # (2,) m
    energy_j: float
    aoi: int = 1               # slots, in [1, a_max]
    service_counter: int = 0   # consecutive-delivery counter, in [0, k_reset)
    service_count: int = 0     # completed reset cycles (fresh updates delivered)
    bits_collected: float = 0.0


@dataclass(eq=False)
class WorldState:
    auvs: tuple                # tuple[AuvState], length N
    nodes: tuple               # tuple[NodeState], length K
    t: int = 0


@dataclass(eq=False)
class AuvEvent:
    """Per-AUV record of what happened during one slot."""

    wet_node: int              # 1-based selection
    data_node: int             # 1-based selection
    harvest_j: float           # energy delivered to the WET node
    e_req_j: float             # uplink energy the DATA node would need
    node_energy_before_j: float  # DATA node energy at the feasibility check
    delivered: bool
    bits: float
    propulsion_j: float


@dataclass(eq=False)
class StepOutcome:
    next: WorldState
    reward: float
    reward_terms: dict         # keys REWARD_TERMS; sums exactly to reward
    events: tuple              # tuple[AuvEvent], length N
    done: bool
    done_reason: str | None    # ALL_DOCKED, HORIZON, or None


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def kinematic_step(auv: AuvState, dtheta: float, dv: float,
                   motion: MotionParams) -> tuple[AuvState, float]:
    """Advance one slot of planar motion; returns (new state, distance traveled).

    Position advances with the pre-update heading and speed; the increments
    take effect afterwards. The increments must already satisfy the control
    bounds (the action codec guarantees this).
    """
    if abs(dtheta) > motion.dtheta_max:
        raise ValueError(f"|dtheta|={abs(dtheta)} exceeds bound {motion.dtheta_max}")
    if abs(dv) > motion.dv_max:
        raise ValueError(f"|dv|={abs(dv)} exceeds bound {motion.dv_max}")
    travel = auv.speed * motion.dt
    pos = auv.pos + travel * np.array([math.cos(auv.heading), math.sin(auv.heading)])
    heading = wrap_angle(auv.heading + dtheta)
    speed = min(max(auv.speed + dv, 0.0), motion.v_max)
    return replace(auv, pos=pos, heading=heading, speed=speed), travel


def propulsion_energy(v: float, traveled: float, motion: MotionParams) -> float:
    """Propulsion plus hotel energy [J] for covering `traveled` m at speed v.

    Drag power is cubic in speed. At v=0 the vehicle holds position and only
    the hotel load draws for the full slot.
    """
    if v < 0 or traveled < 0:
        raise ValueError("speed and distance must be non-negative")
    if v == 0.0:
        return motion.hotel_w * motion.dt
    drag_w = motion.rho * motion.c_d * motion.area / (2.0 * motion.eta_prop) * v ** 3
    return (drag_w + motion.hotel_w) * traveled / v


def update_aoi(node: NodeState, delivered: bool, k_reset: int, a_max: int) -> NodeState:
    """Advance one node's AoI and service counter by one slot.

    The counter advances only on a delivery; reaching k_reset resets the AoI
    to 1, zeroes the counter, and credits one completed service. Otherwise
    the AoI ages, saturating at a_max.
    """
    counter = node.service_counter + (1 if delivered else 0)
    if counter == k_reset:
        return replace(node, aoi=1, service_counter=0,
                       service_count=node.service_count + 1)
    return replace(node, aoi=min(node.aoi + 1, a_max), service_counter=counter)


def jain_index(service_counts) -> float:
    """Jain's fairness index over service counts, in [1/K, 1].

    All-zero counts give 1.0: nothing has been served yet, so there is no
    evidence of unfairness.
    """
    counts = list(service_counts)
    if len(counts) == 0:
        raise ValueError("need at least one count")
    total = float(sum(counts))
    sq = float(sum(c * c for c in counts))
    if sq == 0.0:
        return 1.0
    return total * total / (len(counts) * sq)


def collision_penalty(positions, docked_flags, motion: MotionParams,
                      alpha_c: float) -> float:
    """Smooth pairwise proximity penalty (non-positive).

    A pair contributes only when its separation is below d_th and at least
    one member is outside the docking zone.
    """
    n = len(positions)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if docked_flags[i] and docked_flags[j]:
                continue
            d_ij = float(np.linalg.norm(np.asarray(positions[i], dtype=float)
                                        - np.asarray(positions[j], dtype=float)))
            gap = max(0.0, motion.d_th - d_ij)
            total += 1.0 - math.exp(-(gap * gap) / (2.0 * motion.sigma_c ** 2))
    return -alpha_c * total


def margin_shaping(node_energies, required, alpha_m: float, eps: float,
                   n_auvs: int) -> float:
    """Bounded shaping toward energy-feasible data-node selections.

    One tanh term per AUV comparing the selected node's stored energy with
    the uplink requirement; the sum is scaled by alpha_m / N.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    total = 0.0
    for e, req in zip(node_energies, required, strict=True):
        if req < 0:
            raise ValueError(f"required energy must be >= 0, got {req}")
        total += math.tanh((e - req) / (req + eps))
    return alpha_m / n_auvs * total


def _link_distance(auv_pos: np.ndarray, node_pos: np.ndarray) -> float:
    # ranges inside the 1 m reference sphere are treated as the reference distance
    return max(1.0, float(np.linalg.norm(auv_pos - node_pos)))


def step(state: WorldState, actions, sim: SimParams, rng=None) -> StepOutcome:
    """Run one slot of the world and assemble the reward.

    `actions` is one decoded action per AUV (heading/speed increments plus
    1-based WET and DATA node selections). Stage order within the slot:
    move, energy transfer, data collection, AoI update, docking, reward.
    Harvesting lands before the delivery feasibility check, so a node
    charged this slot may transmit this slot.

    Deterministic given (state, actions); `rng` is accepted for interface
    uniformity but unused.
    """
    motion, channel, weights = sim.motion, sim.channel, sim.weights
    n = len(state.auvs)
    k = len(state.nodes)
    if state.t >= motion.t_max or all(a.docked for a in state.auvs):
        raise ValueError("cannot step a terminal state")
    if len(actions) != n:
        raise ValueError(f"expected {n} actions, got {len(actions)}")

    (xmin, ymin), (xmax, ymax) = motion.arena
    dock = np.asarray(motion.dock_center, dtype=float)

    # (1) motion, boundary clamping, battery drain
    moved = []
    traveled = [0.0] * n
    boundary_hit = [False] * n
    propulsion = [0.0] * n
    for i, (auv, act) in enumerate(zip(state.auvs, actions)):
        if auv.docked:
            moved.append(replace(auv, pos=auv.pos.copy()))
            continue
        nxt, _ = kinematic_step(auv, act.dtheta, act.dv, motion)
        clamped = np.array([min(max(nxt.pos[0], xmin), xmax),
                            min(max(nxt.pos[1], ymin), ymax)])
        boundary_hit[i] = bool(clamped[0] != nxt.pos[0] or clamped[1] != nxt.pos[1])
        traveled[i] = float(np.linalg.norm(clamped - auv.pos))
        propulsion[i] = propulsion_energy(auv.speed, traveled[i], motion)
        moved.append(replace(nxt, pos=clamped,
                             battery_j=max(0.0, auv.battery_j - propulsion[i])))

    # (2) acoustic energy transfer at post-move positions
    node_energy = [nd.energy_j for nd in state.nodes]
    harvest = [0.0] * n
    sl_wet = source_level(channel.p_elec_w, channel.eta, channel.di_db)
    for i, act in enumerate(actions):
        d = _link_distance(moved[i].pos, state.nodes[act.wet_node - 1].pos)
        rl = received_level(sl_wet, attenuation(d, channel.f_wet_khz, channel.k_s), 0.0)
        harvest[i] = harvest_energy(harvest_power(rl, channel), motion.dt)
        node_energy[act.wet_node - 1] += harvest[i]

    # (3) uplink data collection, gated by node energy causality
    node_delivered = [False] * k
    node_bits = [0.0] * k
    e_req = [0.0] * n
    energy_before = [0.0] * n
    delivered = [False] * n
    bits = [0.0] * n
    for i, act in enumerate(actions):
        kd = act.data_node - 1
        d = _link_distance(moved[i].pos, state.nodes[kd].pos)
        e_req[i] = required_uplink_energy(required_uplink_power(d, channel), motion.dt)
        energy_before[i] = node_energy[kd]
        if node_energy[kd] >= e_req[i]:
            node_energy[kd] -= e_req[i]
            delivered[i] = True
            node_delivered[kd] = True
            bits[i] = channel.rate_bps * motion.dt
            node_bits[kd] += bits[i]

    # (4) AoI and service bookkeeping for every node
    new_nodes = tuple(
        update_aoi(
            replace(nd, pos=nd.pos.copy(), energy_j=node_energy[kk],
                    bits_collected=nd.bits_collected + node_bits[kk]),
            node_delivered[kk], weights.k_reset, weights.a_max)
        for kk, nd in enumerate(state.nodes))

    # (5) docking
    newly_docked = 0
    final_auvs = []
    for auv in moved:
        if not auv.docked and np.linalg.norm(auv.pos - dock) <= motion.dock_radius:
            final_auvs.append(replace(auv, speed=0.0, docked=True))
            newly_docked += 1
        else:
            final_auvs.append(auv)
    final_auvs = tuple(final_auvs)
    all_docked = all(a.docked for a in final_auvs)

    # (6) reward assembly
    progress = 0.0
    for prev, new in zip(state.auvs, final_auvs):
        if prev.docked:
            continue
        progress += (float(np.linalg.norm(prev.pos - dock))
                     - float(np.linalg.norm(new.pos - dock)))
    mean_aoi = sum(nd.aoi for nd in new_nodes) / k
    jain = jain_index([nd.service_count for nd in new_nodes])
    n_stalled = sum(1 for i, a in enumerate(final_auvs)
                    if not a.docked and traveled[i] < weights.stall_eps)
    terms = {
        "goal": weights.alpha_g * progress,
        "aoi": -weights.alpha_a * mean_aoi,
        "fairness": -weights.alpha_f * (1.0 - jain),
        "boundary": -weights.rho_bd * sum(boundary_hit),
        "stall": -weights.rho_st * n_stalled,
        "margin": margin_shaping(energy_before, e_req, weights.alpha_m,
                                 weights.margin_eps, n),
        "collision": collision_penalty([a.pos for a in final_auvs],
                                       [a.docked for a in final_auvs],
                                       motion, weights.alpha_c),
        "dock": (weights.r_dock_first * newly_docked
                 + (weights.r_dock_all if all_docked else 0.0)),
    }
    reward = sum(terms.values())

    # (7) termination
    t_next = state.t + 1
    if all_docked:
        done, reason = True, ALL_DOCKED
    elif t_next >= motion.t_max:
        done, reason = True, HORIZON
    else:
        done, reason = False, None

    events = tuple(
        AuvEvent(wet_node=act.wet_node, data_node=act.data_node,
                 harvest_j=harvest[i], e_req_j=e_req[i],
                 node_energy_before_j=energy_before[i], delivered=delivered[i],
                 bits=bits[i], propulsion_j=propulsion[i])
        for i, act in enumerate(actions))

    return StepOutcome(next=WorldState(auvs=final_auvs, nodes=new_nodes, t=t_next),
                       reward=reward, reward_terms=terms, events=events,
                       done=done, done_reason=reason)


def objective_value(trace, lambda_f: float) -> float:
    """Time-averaged mean AoI plus weighted unfairness over a state trace."""
    states = list(trace)
    if not states:
        raise ValueError("trace must be non-empty")
    total = 0.0
    for st in states:
        mean_aoi = sum(nd.aoi for nd in st.nodes) / len(st.nodes)
        jain = jain_index([nd.service_count for nd in st.nodes])
        total += mean_aoi + lambda_f * (1.0 - jain)
    return total / len(states)


def make_initial_state(scenario: ScenarioParams, motion: MotionParams,
                       rng: np.random.Generator) -> WorldState:
    """Build the slot-0 world: fixed AUV line-up, seeded node placement."""
    (xmin, ymin), (xmax, ymax) = motion.arena
    m = scenario.node_margin
    node_pos = rng.uniform(low=[xmin + m, ymin + m], high=[xmax - m, ymax - m],
                           size=(scenario.n_nodes, 2))
    nodes = tuple(NodeState(pos=node_pos[kk].copy(),
                            energy_j=scenario.node_energy_j)
                  for kk in range(scenario.n_nodes))
    base = np.asarray(scenario.auv_start, dtype=float)
    auvs = []
    for i in range(scenario.n_auvs):
        pos = base + np.array([0.0, i * scenario.auv_spacing])
        pos = np.array([min(max(pos[0], xmin), xmax),
                        min(max(pos[1], ymin), ymax)])
        auvs.append(AuvState(pos=pos, heading=wrap_angle(scenario.initial_heading),
                             speed=min(max(scenario.initial_speed, 0.0), motion.v_max),
                             battery_j=scenario.battery_j))
    return WorldState(auvs=tuple(auvs), nodes=nodes, t=0)
