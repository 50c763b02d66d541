from .config import MODE_WITH_QS, MODE_WITHOUT_QS, RunConfig

__all__ = ["RunConfig", "MODE_WITH_QS", "MODE_WITHOUT_QS"]
