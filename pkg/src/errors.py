"""
Exceptions
==========
Hiérarchie unique d'erreurs du projet. Toutes dérivent de ValueError pour
rester compatibles avec le code appelant qui attrape déjà ValueError.
"""

from typing import Optional


class ReconstructionError(ValueError):
    """Erreur de base, avec contexte optionnel (fichier, ligne, itération)"""

    def __init__(self, message: str, *, path: Optional[str] = None,
                 row: Optional[int] = None, iteration: Optional[int] = None):
        self.message = message
        self.path = path
        self.row = row
        self.iteration = iteration
        super().__init__(self.__str__())

    def __str__(self) -> str:
        context = []
        if self.path is not None:
            context.append(f"fichier {self.path}")
        if self.row is not None:
            context.append(f"ligne {self.row}")
        if self.iteration is not None:
            context.append(f"itération {self.iteration}")
        if context:
            return f"{self.message} ({', '.join(context)})"
        return self.message


# --- Données et masque ---

class IndexOutOfRangeError(ReconstructionError):
    pass


class SelfLoopError(ReconstructionError):
    pass


class MaskViolationError(ReconstructionError):
    pass


class UnknownMaskViolationError(MaskViolationError):
    """Violation de masque détectée à l'import d'un CSV (porte le numéro de ligne)"""


# --- Paramètres ---

class NonPositiveParameterError(ReconstructionError):
    pass


class SimplexViolationError(ReconstructionError):
    pass


class InvalidProbabilityError(ReconstructionError):
    pass


class InvalidConfigurationError(ReconstructionError):
    pass


# --- Inférence ---

class NonFiniteElboError(ReconstructionError):
    pass


class UnsupportedKError(ReconstructionError):
    pass


# --- Génération synthétique ---

class TargetUnreachableError(ReconstructionError):

    def __init__(self, message: str, *, achieved: Optional[float] = None, **kwargs):
        self.achieved = achieved
        super().__init__(message, **kwargs)


# --- Évaluation ---

class ShapeMismatchError(ReconstructionError):
    pass


class LengthMismatchError(ReconstructionError):
    pass


class EmptySampleError(ReconstructionError):
    pass


class NoNominationsError(ReconstructionError):
    """Taux de répétition indéfini: le déclarant n'a nommé personne"""


# --- Import CSV ---

class MalformedHeaderError(ReconstructionError):
    pass


class MalformedRowError(ReconstructionError):
    pass


class NegativeWeightError(ReconstructionError):
    pass
