"""Exception hierarchy shared by every stage of the pipeline."""


class ColocError(Exception):
    """Base class for all pipeline errors."""


class UnsupportedFormat(ColocError):
    pass


class ZeroDimension(ColocError):
    pass


class MinimumSizeViolated(ZeroDimension):
    """Raster is smaller than 2x2, so no legal box fits inside it."""


class DimensionMismatch(ColocError):
    pass


class DegenerateMap(ColocError):
    """All quantized values are equal; Otsu cannot split two classes."""


class DegenerateSaliency(DegenerateMap):
    pass


class DegenerateCosaliency(DegenerateMap):
    pass


class EmptyMask(ColocError):
    pass


class EmptyList(ColocError):
    pass


class InfeasibleConstraints(ColocError):
    pass


class TooFewImages(ColocError):
    pass


class MissingMap(ColocError):
    def __init__(self, stems, detail=""):
        self.stems = sorted(stems)
        msg = "missing map(s) for stem(s): " + ", ".join(self.stems)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class MalformedBoxesFile(ColocError):
    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class NoGroundTruth(ColocError):
    pass


class EmptyResults(ColocError):
    pass


class WriteFailure(ColocError):
    pass
