from .base import ALGORITHMS, RunContext, TunerOptions, TuningResult
from .greedy import PlainGreedy, TwoPhaseGreedy, run_greedy, run_two_phase_greedy
from .mcts import Mcts, MctsNode, run_mcts


def run(algorithm: str, workload, oracle, options: TunerOptions) -> TuningResult:
    runners = {"two-phase-greedy": run_two_phase_greedy, "greedy": run_greedy, "mcts": run_mcts}
    options.validate(algorithm)
    return runners[algorithm](workload, oracle, options)


__all__ = [
    "ALGORITHMS", "RunContext", "TunerOptions", "TuningResult", "PlainGreedy", "TwoPhaseGreedy",
    "Mcts", "MctsNode", "run", "run_greedy", "run_two_phase_greedy", "run_mcts",
]
