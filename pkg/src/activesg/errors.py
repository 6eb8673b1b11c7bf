"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class GenerationFailure(RuntimeError):
    """Procedural scene placement ran out of retries."""


class SceneUnnavigable(RuntimeError):
    pass


class ExplorationExhausted(RuntimeError):
    """No candidate viewpoint passes the candidate filter."""


class ExplorationComplete(RuntimeError):
    """Nothing left to explore (no frontier cells)."""


class SceneError(ConfigurationError):
    """Scene file missing, malformed or inconsistent."""
