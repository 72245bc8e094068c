"""Exception types raised across the toolkit."""


class MalformedSpec(ValueError):
    """Morphology string is syntactically invalid (ragged rows, bad characters)."""


class InvalidBody(ValueError):
    """Morphology is empty or not a single 4-connected component."""


class NotAVoxel(ValueError):
    """A cell handle refers to an unoccupied lattice position."""


class InvalidTerrain(ValueError):
    pass


class InvalidProtocol(ValueError):
    pass


class InvalidSample(ValueError):
    pass


class GenotypeShapeError(ValueError):
    """Genotype length does not match the controller layout."""


class ConfigError(ValueError):
    """Invalid run configuration. ``key`` names the offending dotted key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class SimulationDiverged(RuntimeError):
    """Non-finite body state encountered at ``time`` seconds on ``node``."""

    def __init__(self, time: float, node: int):
        super().__init__(f"simulation diverged at t={time:.6f}s (node {node})")
        self.time = time
        self.node = node
