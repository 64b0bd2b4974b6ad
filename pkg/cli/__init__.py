from .runner import ExperimentRunner, RunOutput, run

__all__ = ["ExperimentRunner", "RunOutput", "run"]
