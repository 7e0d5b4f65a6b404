from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    SEED: int = 0  # default seed for every randomized routine

    # counting quasi-morphisms
    QM_N_MAX: int = 1000
    QM_DEFECT_BOUND: int = 12  # certified defect in quasi-tree models
    QM_SEGMENT_MULTIPLE: int = 4  # M = multiple * (Delta + 1) off the tree model

    # commutator search budgets
    CL_MAX: int = 2
    CL_RADIUS: int = 3

    # actions, projections and promotion
    WWPD_RADIUS: int = 2
    PROJECTION_SLACK: Optional[int] = None  # None -> xi + 2
    PROMOTION_K: Optional[int] = None  # None -> 4 * eta + 4
    PIPELINE_R_MULTIPLE: int = 1
    PIPELINE_MAX_POWER: int = 64
    ORBIT_CAP: int = 100000

    # graphs
    DELTA_EXACT_MAX_VERTICES: int = 300
    DELTA_SAMPLES: int = 20000
    GRAPH_MAX_VERTICES: int = 20000

    class Config:
        env_file = ".env"
        env_prefix = "SCLKIT_"


@lru_cache()
def get_settings():
    return Settings()


settings = get_settings()
