from typing import Optional

from game.errors import InputError
from interfaces.i_choice_model import IChoiceModel

ALIASES = {
    'prox': 'proximity',
    'proximity': 'proximity',
    'prob': 'probability',
    'probability': 'probability',
    'logit': 'probability',
}


def create_choice_model(kind: str, temperature: Optional[float] = None,
                        tie_tol: Optional[float] = None) -> IChoiceModel:
    """Factory to create the appropriate choice model"""

    resolved = ALIASES.get(str(kind).lower())
    if resolved is None:
        raise InputError(f"Unknown choice model: {kind}", field='model')

    # Import only what's needed
    if resolved == 'proximity':
        from choice.choice_proximity import ProximityChoice
        return ProximityChoice(tie_tol=tie_tol)

    if temperature is None:
        raise InputError("the probability model needs a temperature", field='t')
    from choice.choice_probability import ProbabilityChoice
    return ProbabilityChoice(temperature, tie_tol=tie_tol)
