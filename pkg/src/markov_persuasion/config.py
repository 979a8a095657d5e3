from dataclasses import dataclass, replace

EPS_NUM = 1e-9
EPS_HULL = 1e-8


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by all modules.

    ``contact`` is relative: the absolute contact tolerance is
    ``contact * max|u|`` (``contact`` itself when ``u`` vanishes).
    """

    num: float = EPS_NUM
    hull: float = EPS_HULL
    contact: float = 1e-6
    vi: float = 1e-9
    vi_max_iter: int = 100_000
    mixing_cap: int = 1_000_000

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


DEFAULT = Tolerances()
