"""Search-based falsification toolkit with a surrogate e-bike benchmark.

The package splits into small layers:

* :mod:`bikebench.signals` - uniform-grid traces and queries.
* :mod:`bikebench.expressions` - the arithmetic expression grammar.
* :mod:`bikebench.testseq` - parameterized test sequences and the two
  built-in signal families.
* :mod:`bikebench.assessment` - verify machines, robustness, and the
  built-in requirement checks.
* :mod:`bikebench.plant` - the surrogate powertrain with the PWM and
  Buck controllers.
* :mod:`bikebench.search` - uniform-random falsification runs and
  campaign statistics.
* :mod:`bikebench.harness` - the benchmark matrix, result files, CLI
  backend.
"""

from .assessment import (
    Assessment,
    AssessStep,
    Predicate,
    Verdict,
    builtin_assessment,
    evaluate,
    evaluate_boolean_oracle,
)
from .plant import (
    ControllerKind,
    PlantParams,
    PlantState,
    SimulationDivergedError,
    default_params,
    sector,
    simulate,
    step,
)
from .search import (
    CampaignResult,
    IterationRecord,
    RunResult,
    SearchConfig,
    campaign,
    falsify,
    sample_uniform,
)
from .signals import Channel, TimeGrid, Trace
from .testseq import (
    ParameterizedTestSequence,
    ParamSpec,
    SeqStep,
    SeqTransition,
    TestSequence,
    builtin_pts,
    generate_signal,
    instantiate,
)

__version__ = "0.1.0"

__all__ = [
    "Assessment",
    "AssessStep",
    "CampaignResult",
    "Channel",
    "ControllerKind",
    "IterationRecord",
    "ParamSpec",
    "ParameterizedTestSequence",
    "PlantParams",
    "PlantState",
    "Predicate",
    "RunResult",
    "SearchConfig",
    "SeqStep",
    "SeqTransition",
    "SimulationDivergedError",
    "TestSequence",
    "TimeGrid",
    "Trace",
    "Verdict",
    "builtin_assessment",
    "builtin_pts",
    "campaign",
    "default_params",
    "evaluate",
    "evaluate_boolean_oracle",
    "falsify",
    "generate_signal",
    "instantiate",
    "sample_uniform",
    "sector",
    "simulate",
    "step",
]
