from typing import Optional


class MapParseError(ValueError):
    """ The map file is not valid JSON or does not follow the map schema """


class MapValidationError(ValueError):
    """ A surface breaks a geometric invariant """

    def __init__(self, surface_id: Optional[str], message: str):
        self.surface_id = surface_id
        if surface_id is not None:
            message = f"surface '{surface_id}': {message}"
        super().__init__(message)


class TraceError(ValueError):
    """ The requested link cannot be traced """


class LocalizationError(ValueError):
    """ No position estimate can be produced from the observations """


class DegenerateGeometryError(ValueError):
    """ The three-point problem has no isolated solution """


class ScenarioError(ValueError):
    """ A Monte Carlo scenario cannot be set up """
