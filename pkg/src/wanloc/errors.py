"""Exception hierarchy.

Every error family carries a distinct process exit code used by the CLI.
"""


class WanlocError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(WanlocError):
    exit_code = 2


class LatticeError(WanlocError):
    exit_code = 3


class SingularBasis(LatticeError):
    pass


class InvalidGridSize(LatticeError):
    pass


class SpectrumError(WanlocError):
    exit_code = 4


class EigFailure(SpectrumError):
    pass


class GapViolation(SpectrumError):
    def __init__(self, k, gap):
        self.k = k
        self.gap = gap
        super().__init__(f"gap condition violated at k={[float(x) for x in k]}: gap={gap:.6g}")


class FrameError(WanlocError):
    exit_code = 5


class DegenerateProjection(FrameError):
    def __init__(self, k, sigma_min):
        self.k = k
        self.sigma_min = sigma_min
        super().__init__(
            f"projected trial subspace degenerates at k={[float(x) for x in k]}: "
            f"sigma_min={sigma_min:.3g}")


class TransportGap(FrameError):
    def __init__(self, step, norm):
        self.step = step
        self.norm = norm
        super().__init__(
            f"projector jump {norm:.3g} >= 1 between path points {step} and {step + 1}")


class NonOrthonormalInput(FrameError):
    pass


class OptimizationError(WanlocError):
    exit_code = 6


class LineSearchStall(OptimizationError):
    pass


class NotAbelian(OptimizationError):
    pass


class NonzeroMean(OptimizationError):
    pass


class WannierError(WanlocError):
    exit_code = 7


class CenterDrift(WannierError):
    pass


class InsufficientDecay(WannierError):
    pass


class HarmonicError(WanlocError):
    exit_code = 8


class QuadratureDivergence(HarmonicError):
    pass


class TangencyViolation(HarmonicError):
    pass


class InvalidPolynomials(HarmonicError):
    pass
