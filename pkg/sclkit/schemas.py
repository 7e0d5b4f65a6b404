from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class QMReport(BaseModel):
    base_segment: str
    value: int
    value_samples: Dict[str, int]
    defect_observed: int
    defect_bound: int
    defect_certified: bool
    homogenized: Tuple[str, str]
    # defect behind the enclosure: width = 2 * width_defect / n_max
    width_defect: int
    homogenized_defect_bound: int
    bavard_lower_bound: str
    threshold_m: int
    epsilon: int
    n_max: int


class PureComponent(BaseModel):
    id: str
    kind: Literal["pseudo_anosov", "dehn_twist"]
    twist_power: Optional[int] = None
    support_complexity: int = Field(ge=0)
    chiral: bool
    rep_id: Optional[str] = None
    m: Optional[int] = None
    r: Optional[int] = None
    tau: Optional[str] = None  # declared root translation length, p/q
    k: int = Field(default=1, ge=1)  # achiral power: g^k conjugate to g^-k

    @model_validator(mode="after")
    def check_component(self):
        if self.kind == "dehn_twist":
            if not self.twist_power:
                raise ValueError(f"twist component {self.id} needs a nonzero power")
            if not self.chiral:
                raise ValueError(f"twist component {self.id} cannot be achiral")
        if self.rep_id is not None:
            if not self.m or not self.r:
                raise ValueError(f"component {self.id}: rep data needs nonzero m and r")
            if not self.chiral:
                raise ValueError(f"component {self.id}: achiral components carry no class rep")
        elif self.m is not None or self.r is not None:
            raise ValueError(f"component {self.id}: m/r given without rep")
        return self

    @property
    def representative(self) -> str:
        return self.rep_id if self.rep_id is not None else self.id

    @property
    def exponents(self) -> Tuple[int, int]:
        if self.rep_id is None:
            return (1, 1)
        return (self.m, self.r)


class CurveSpec(BaseModel):
    separating: bool
    homology_class: str
    power: int


class NTDecomposition(BaseModel):
    power: int = Field(default=1, ge=1)
    components: List[PureComponent] = Field(default_factory=list)
    curves: List[CurveSpec] = Field(default_factory=list)

    @field_validator("components")
    @classmethod
    def unique_ids(cls, components):
        seen = set()
        for comp in components:
            if comp.id in seen:
                raise ValueError(f"duplicate component id {comp.id}")
            seen.add(comp.id)
        return components


class ManningReport(BaseModel):
    delta: int
    R: int
    base: int
    tree_vertices: int
    tree_edges: int
    levels: int
    inequalities_hold: bool
    worst_pair: Optional[Tuple[int, int]] = None
    # T with edges of length tree_scale = 8 Delta embeds as a (4, 16 Delta)-quasi-isometry
    tree_scale: int
    embedding_constants: Tuple[int, int]


class PromotedElementCheck(BaseModel):
    element: str
    elliptic_on_X: bool
    conjugate_projection: Optional[int] = None  # None when parallel to the axis
    member_displacement: Optional[int] = None  # None when no member image lies in the family
    displacement_bound: int
    qm_bounded_on_powers: bool
    holds: bool


class PipelineReport(BaseModel):
    element: str
    verdict: Literal["bounded", "elliptic", "not_in_commutator_subgroup"]
    lower_bound: Optional[str] = None
    power: Optional[int] = None
    tau: Optional[str] = None
    xi: Optional[int] = None
    R: Optional[int] = None
    promoted_delta: Optional[int] = None
    promoted_vertices: Optional[int] = None
    hhat_interval: Optional[Tuple[str, str]] = None
    qm: Optional[QMReport] = None
    promotion_checks: List[PromotedElementCheck] = Field(default_factory=list)


class VerdictReport(BaseModel):
    verdict: Literal["Positive", "Zero"]
    witness_class: Optional[str] = None
    chi_vector: Dict[str, str]
    classes: List[Dict[str, Any]]
    achiral: List[str]
    recipe: Optional[Dict[str, str]] = None
    witnesses: List[Dict[str, Any]] = Field(default_factory=list)
    bounds: Optional[Tuple[int, int]] = None  # (N, B)


class RunReport(BaseModel):
    subcommand: str
    inputs_digest: str
    seed: int
    results: Dict[str, Any]
    constants: Dict[str, Any] = Field(default_factory=dict)
    verdicts: Dict[str, Any] = Field(default_factory=dict)
    timing_ms: Optional[int] = None


class SelftestRow(BaseModel):
    criterion: int
    name: str
    passed: bool
    detail: str
