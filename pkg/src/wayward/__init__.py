"""Participatory pedestrian simulation with reward recovery from trajectories.

Subpackages by concern:

- ``mdp``      finite decision-process dynamics and forward solvers
- ``irl``      reward recovery from observed policies, with validation
- ``network``  street networks, compilation to dynamics, graph reduction
- ``agents``   rule-based pedestrian behavior (schedules, deviations)
- ``engine``   deterministic tick simulation with trajectory logging
- ``gateway``  file formats and GPS trace ingestion
- ``service``  live participation sessions over a message protocol
- ``cli``      batch front door (gen / simulate / irl / ingest / reduce / serve)
"""

__version__ = "0.1.0"
