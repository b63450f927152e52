"""Command-line front door for the batch pipeline.

Subcommands: gen, simulate, irl, ingest, reduce, serve. Exit codes: 0 ok,
1 domain error (bad content, empty inputs, no coverage), 2 usage, 3 I/O,
4 network (serve could not bind).
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys

from . import engine, gateway, generate, irl
from .logs import TrajectoryLog
from .network import compile_mdp, reduce_network

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NETWORK = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _fail(message, code):
    raise CliError(message, code)


def cmd_gen(args) -> int:
    if args.nodes < 2:
        _fail("gen requires --nodes >= 2", EXIT_USAGE)
    if args.buildings > args.nodes:
        _fail("--buildings cannot exceed --nodes", EXIT_USAGE)
    net = generate.generate_network(
        args.nodes, args.buildings, seed=args.seed, subdivide=args.subdivide
    )
    scenario = generate.default_scenario(
        net,
        seed=args.seed,
        n_agents=args.agents,
        human_slots=args.human_slots,
        ticks=args.ticks,
        total_time=args.total_time,
    )
    os.makedirs(args.out, exist_ok=True)
    network_path = os.path.join(args.out, "network.json")
    scenario_path = os.path.join(args.out, "scenario.json")
    gateway.save_network(net, network_path)
    gateway.save_scenario(scenario, scenario_path, "network.json")
    print(
        f"wrote {network_path} ({net.n_nodes} nodes, {len(net.edges)} edges) "
        f"and {scenario_path}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = gateway.load_scenario(args.scenario)
    ticks = scenario.ticks if args.ticks is None else args.ticks
    compilation = compile_mdp(
        scenario.network, scenario.slip_probability, scenario.discount
    )
    world = engine.init_world(scenario)
    deviations = 0
    for _ in range(ticks):
        if world.active_count() == 0:
            break
        events = engine.step(world, compilation)
        deviations += sum(1 for e in events if e.kind == "Deviated")
    gateway.write_log(world.log, args.out_log)
    print(
        f"simulated {len(world.agents)} agents for {world.tick} ticks: "
        f"{len(world.log)} log entries, {deviations} deviations -> {args.out_log}"
    )
    return EXIT_OK


def cmd_irl(args) -> int:
    scenario = gateway.load_scenario(args.scenario)
    log = gateway.read_log(args.log)
    compilation = compile_mdp(
        scenario.network, scenario.slip_probability, scenario.discount
    )
    observed = irl.estimate_policy(log, compilation.n_states, compilation.n_actions)
    config = irl.IrlConfig(sparsity_weight=args.sparsity, reward_bound=args.rmax)
    estimate = irl.recover_reward(compilation.dynamics, observed, config)
    report = irl.validate_recovery(compilation.dynamics, estimate, observed)
    doc = {
        "reward_estimate": estimate.to_doc(),
        "validation_report": report.to_doc(),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"agreement {report.agreement:.4f} ({len(report.mismatched_states)} mismatched) -> {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    net = gateway.load_network(args.network)
    scenario_slip, scenario_discount = gateway.DEFAULT_SLIP, gateway.DEFAULT_DISCOUNT
    if args.scenario:
        scenario = gateway.load_scenario(args.scenario)
        scenario_slip = scenario.slip_probability
        scenario_discount = scenario.discount
    compilation = compile_mdp(net, scenario_slip, scenario_discount)
    trace = gateway.read_gps_csv(args.gps_csv)
    trajectory = gateway.ingest_gps(trace, net, compilation)
    if os.path.exists(args.out_log):
        log = gateway.read_log(args.out_log)
    else:
        log = TrajectoryLog()
    agent_id = gateway.append_trajectory(log, trajectory)
    gateway.write_log(log, args.out_log)
    print(
        f"ingested {len(trace.points)} points as agent {agent_id} "
        f"({len(trajectory.actions)} steps) -> {args.out_log}"
    )
    return EXIT_OK


def cmd_reduce(args) -> int:
    net = gateway.load_network(args.network)
    reduced, mapping = reduce_network(net)
    gateway.save_network(reduced, args.out)
    if args.mapping:
        with open(args.mapping, "w", encoding="utf-8") as fh:
            json.dump(
                {str(k): list(v) for k, v in sorted(mapping.items())},
                fh,
                indent=2,
            )
            fh.write("\n")
    print(
        f"reduced {net.n_nodes} -> {reduced.n_nodes} nodes "
        f"({len(mapping)} contracted) -> {args.out}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    from .service import SessionService

    scenario = gateway.load_scenario(args.scenario)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        probe.close()
        _fail(f"cannot bind {args.host}:{args.port}: {exc}", EXIT_NETWORK)
    probe.close()

    service = SessionService()
    session_id = service.create_session(scenario, tick_interval_ms=args.tick_interval)
    initial_clock = (session_id, args.tick_interval) if args.tick_interval > 0 else None
    app = create_app(service, initial_clock=initial_clock)
    print(f"serving session {session_id} on {args.host}:{args.port}")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        session = service.session(session_id)
        log_path = os.path.splitext(args.scenario)[0] + ".log"
        gateway.write_log(session.world.log, log_path)
        print(f"session log written to {log_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wayward",
        description="pedestrian simulation, reward recovery, and live sessions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random network and scenario")
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--buildings", type=int, default=10)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--subdivide", type=int, default=0, help="degree-2 nodes per edge")
    gen.add_argument("--agents", type=int, default=100)
    gen.add_argument("--human-slots", type=int, default=0)
    gen.add_argument("--ticks", type=int, default=200)
    gen.add_argument("--total-time", type=int, default=200)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)

    sim = sub.add_parser("simulate", help="run a scenario and write its log")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--ticks", type=int, default=None, help="override scenario ticks")
    sim.add_argument("--out-log", required=True)
    sim.set_defaults(func=cmd_simulate)

    rec = sub.add_parser("irl", help="recover a reward from a trajectory log")
    rec.add_argument("--log", required=True)
    rec.add_argument("--scenario", required=True)
    rec.add_argument("--sparsity", type=float, default=1.0, help="magnitude penalty weight")
    rec.add_argument("--rmax", type=float, default=1.0, help="reward box bound")
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_irl)

    ing = sub.add_parser("ingest", help="map a GPS trace onto the network")
    ing.add_argument("--gps-csv", required=True)
    ing.add_argument("--network", required=True)
    ing.add_argument("--scenario", default=None)
    ing.add_argument("--out-log", required=True)
    ing.set_defaults(func=cmd_ingest)

    red = sub.add_parser("reduce", help="contract building-free degree-2 nodes")
    red.add_argument("--network", required=True)
    red.add_argument("--out", required=True)
    red.add_argument("--mapping", default=None, help="write node->edge mapping JSON")
    red.set_defaults(func=cmd_reduce)

    srv = sub.add_parser("serve", help="host a live participation session")
    srv.add_argument("--scenario", required=True)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--tick-interval", type=int, default=200, help="ms; 0 = manual")
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except gateway.IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (
        gateway.ParseError,
        gateway.SchemaVersionMismatch,
        gateway.EmptyTrace,
        engine.EngineError,
        irl.IrlError,
        ValueError,
    ) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
