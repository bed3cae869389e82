"""
Text Utilities - Tokenización de las descripciones.

- tokenize() - Quita puntuación ASCII, pasa a minúsculas y separa por espacios

Lo comparten el vocabulario, el manifiesto y las métricas, de modo que una
descripción se parte igual al entrenar y al puntuar.
NO contiene lógica de vocabulario ni de índices (ver vocab.py).
"""

import string

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    """
    Tokeniza una descripción.

    Example:
        >>> tokenize("A man, a plan")
        ['a', 'man', 'a', 'plan']
    """
    return text.translate(_PUNCT_TABLE).lower().split()
