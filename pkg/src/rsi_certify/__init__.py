"""Measurement-first certification of recursive-improvement regimes.

Submodules: series (telemetry primitives), capability (canonical index),
envelopes (thermodynamic service ceilings), dynamics (blow-up analytics),
estimate (HAC statistics), certify (tests and verdicts), safectl (barrier
throttling), cli (pipeline commands).
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    capability,
    certify,
    cli,
    dynamics,
    envelopes,
    errors,
    estimate,
    safectl,
    series,
)
