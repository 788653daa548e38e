"""Exception hierarchy shared by all modules."""


class VemSchwarzError(Exception):
    """Base class for every error raised by this package."""


# mesh
class MeshError(VemSchwarzError):
    pass


class SchemaError(MeshError):
    pass


class TopologyError(MeshError):
    pass


class NonPlanarFaceError(MeshError):
    pass


class NegativeVolumeError(MeshError):
    pass


class DegenerateCellError(MeshError):
    pass


# vem3d
class SingularFaceError(VemSchwarzError):
    pass


class DisconnectedMeshError(VemSchwarzError):
    pass


# decomp
class EmptySubdomainError(VemSchwarzError):
    pass


class ClassificationError(VemSchwarzError):
    pass


# coarse
class DegenerateEdgeError(VemSchwarzError):
    pass


class SingularFaceSystemError(VemSchwarzError):
    pass


# schwarz
class NotPositiveDefiniteError(VemSchwarzError):
    pass


class NoConvergenceError(VemSchwarzError):
    pass


class BreakdownError(VemSchwarzError):
    pass


class InsufficientDataError(VemSchwarzError):
    pass


# harness
class IoError(VemSchwarzError):
    pass


class ConfigError(VemSchwarzError):
    pass
