"""Reference log producer for the headless client equivalence test.

Replays a fixed human action sequence through the in-process engine API
(activate + inject + step) on the given scenario and prints the resulting
log text, which must match what the live server hands out for the same
sequence driven over the wire.
"""

import argparse
import json
import sys
import tempfile

from wayward.engine import activate_human, init_world, inject_human_action, step
from wayward.gateway import load_scenario, write_log
from wayward.network import compile_mdp


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--agent-id", type=int, required=True)
    parser.add_argument("--actions", required=True, help="JSON list of action indices")
    parser.add_argument("--ticks", type=int, required=True)
    args = parser.parse_args()

    actions = json.loads(args.actions)
    scenario = load_scenario(args.scenario)
    compilation = compile_mdp(
        scenario.network, scenario.slip_probability, scenario.discount
    )
    world = init_world(scenario)
    activate_human(world, args.agent_id)
    for tick in range(args.ticks):
        if tick < len(actions):
            inject_human_action(world, args.agent_id, actions[tick], compilation)
        step(world, compilation)

    with tempfile.NamedTemporaryFile("r", suffix=".log") as handle:
        write_log(world.log, handle.name)
        sys.stdout.write(handle.read())
    return 0


if __name__ == "__main__":
    sys.exit(main())
